"""Procedural silhouette generator: a 2D articulated walker.

A walker is a stick-and-ellipse figure (torso capsule, head, two 2-segment
legs, two 2-segment arms) animated by sinusoidal joint angles at a
subject-specific stride frequency.  Lateral displacements are foreshortened
by the camera view, so the same walk renders differently across views.
Rendering is fully deterministic given (spec, view, frame count, phase seed).

Subjects differ in stride frequency, swing amplitudes, limb-length ratios,
and body envelope, which is the identity signal downstream models learn.
The bag flag attaches a lateral blob at hip height; the coat flag widens and
lengthens the torso envelope over the upper legs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

RAW_HEIGHT = 128
RAW_WIDTH = 96
_BODY_HEIGHT = 108.0
_FOOT_BASELINE = 120.0


@dataclass(frozen=True)
class WalkerSpec:
    """Subject geometry and gait parameters (lengths as body-height
    fractions, angles in radians, frequency in cycles per frame)."""

    subject_seed: int
    stride_freq: float
    stride_amp: float
    knee_amp: float
    arm_amp: float
    thigh_len: float
    shin_len: float
    torso_halfwidth: float
    head_radius: float
    sway_amp: float
    limb_thickness: float
    bag: bool = False
    coat: bool = False

    @classmethod
    def from_seed(cls, subject_seed: int, bag: bool = False,
                  coat: bool = False) -> "WalkerSpec":
        rng = np.random.default_rng(np.random.SeedSequence([0x6A17, subject_seed]))
        return cls(
            subject_seed=subject_seed,
            # whole-frame cycle lengths (11..21) so a rendered sequence
            # lands back on its first pose after exactly round(1/f) frames
            stride_freq=1.0 / int(rng.integers(11, 22)),
            stride_amp=rng.uniform(0.45, 0.75),
            knee_amp=rng.uniform(0.5, 0.9),
            arm_amp=rng.uniform(0.35, 0.65),
            thigh_len=rng.uniform(0.22, 0.27),
            shin_len=rng.uniform(0.20, 0.25),
            torso_halfwidth=rng.uniform(0.085, 0.13),
            head_radius=rng.uniform(0.055, 0.075),
            sway_amp=rng.uniform(0.008, 0.022),
            limb_thickness=rng.uniform(0.030, 0.045),
            bag=bag,
            coat=coat,
        )

    def with_condition(self, condition: str) -> "WalkerSpec":
        """nm: plain walker; bg: bag attached; cl: coat envelope."""
        return replace(self, bag=(condition == "bg"), coat=(condition == "cl"))


def _segment_mask(yy, xx, p0, p1, radius):
    """Capsule: points within `radius` of segment p0-p1."""
    (x0, y0), (x1, y1) = p0, p1
    dx, dy = x1 - x0, y1 - y0
    sq_len = dx * dx + dy * dy
    if sq_len < 1e-12:
        return (xx - x0) ** 2 + (yy - y0) ** 2 <= radius * radius
    t = ((xx - x0) * dx + (yy - y0) * dy) / sq_len
    t = np.clip(t, 0.0, 1.0)
    px = x0 + t * dx
    py = y0 + t * dy
    return (xx - px) ** 2 + (yy - py) ** 2 <= radius * radius


def _ellipse_mask(yy, xx, center, semi_x, semi_y):
    cx, cy = center
    return ((xx - cx) / semi_x) ** 2 + ((yy - cy) / semi_y) ** 2 <= 1.0


def render_frame(spec: WalkerSpec, view_deg: float, theta: float,
                 stride_scale: float = 1.0, arm_scale: float = 1.0,
                 ) -> np.ndarray:
    """Render one binary silhouette frame (RAW_HEIGHT x RAW_WIDTH, uint8).

    `theta` is the gait phase in radians; one full cycle is 2*pi.
    """
    bh = _BODY_HEIGHT
    profile = abs(math.cos(math.radians(view_deg - 90.0)))
    lateral = 0.15 + 0.85 * profile          # swing foreshortening
    frontal = 1.0 - profile
    torso_hw = spec.torso_halfwidth * (1.0 + 0.35 * frontal) * bh
    if spec.coat:
        torso_hw *= 1.45

    cx = RAW_WIDTH / 2.0
    leg_len = (spec.thigh_len + spec.shin_len) * bh
    bounce = -spec.sway_amp * bh * math.cos(2.0 * theta)
    hip_y = _FOOT_BASELINE - leg_len + bounce
    torso_top = _FOOT_BASELINE - bh + 2.0 * spec.head_radius * bh \
        + 0.02 * bh + bounce
    head_cy = torso_top - 0.02 * bh - spec.head_radius * bh

    yy, xx = np.mgrid[0:RAW_HEIGHT, 0:RAW_WIDTH].astype(np.float64)
    mask = np.zeros((RAW_HEIGHT, RAW_WIDTH), dtype=bool)

    leg_r = spec.limb_thickness * bh
    arm_r = 0.7 * leg_r
    thigh = spec.thigh_len * bh
    shin = spec.shin_len * bh

    for side in (0.0, math.pi):
        hip = (cx + (0.02 * bh * lateral if side == 0.0 else -0.02 * bh * lateral),
               hip_y)
        alpha = spec.stride_amp * stride_scale * math.sin(theta + side)
        knee = (hip[0] + thigh * math.sin(alpha) * lateral,
                hip[1] + thigh * math.cos(alpha))
        flex = spec.knee_amp * 0.5 * (1.0 - math.cos(theta + side - 0.6))
        ankle = (knee[0] + shin * math.sin(alpha - flex) * lateral,
                 knee[1] + shin * math.cos(alpha - flex))
        toe = (ankle[0] + 0.07 * bh * lateral, ankle[1] + 0.015 * bh)
        mask |= _segment_mask(yy, xx, hip, knee, leg_r)
        mask |= _segment_mask(yy, xx, knee, ankle, leg_r * 0.9)
        mask |= _segment_mask(yy, xx, ankle, toe, leg_r * 0.8)

        shoulder = (cx + (0.03 * bh * lateral if side == 0.0 else -0.03 * bh * lateral),
                    torso_top + 0.05 * bh)
        gamma = spec.arm_amp * arm_scale * math.sin(theta + side + math.pi)
        elbow = (shoulder[0] + 0.16 * bh * math.sin(gamma) * lateral,
                 shoulder[1] + 0.16 * bh * math.cos(gamma))
        hand = (elbow[0] + 0.14 * bh * math.sin(gamma - 0.35) * lateral,
                elbow[1] + 0.14 * bh * math.cos(gamma - 0.35))
        mask |= _segment_mask(yy, xx, shoulder, elbow, arm_r)
        mask |= _segment_mask(yy, xx, elbow, hand, arm_r * 0.9)

    mask |= _segment_mask(yy, xx, (cx, hip_y + 0.02 * bh),
                          (cx, torso_top + 0.04 * bh), torso_hw)
    if spec.coat:
        skirt_bottom = hip_y + 0.6 * thigh
        mask |= _segment_mask(yy, xx, (cx, torso_top + 0.10 * bh),
                              (cx, skirt_bottom), torso_hw * 0.88)
    mask |= _segment_mask(yy, xx, (cx, torso_top), (cx, head_cy), 0.035 * bh)
    head_r = spec.head_radius * bh
    mask |= _ellipse_mask(yy, xx, (cx, head_cy), head_r, head_r)

    if spec.bag:
        bag_cx = cx + torso_hw + 0.055 * bh \
            + 0.02 * bh * math.sin(theta) * lateral
        bag_cy = hip_y - 0.12 * bh
        mask |= _ellipse_mask(yy, xx, (bag_cx, bag_cy), 0.07 * bh, 0.09 * bh)
        # strap keeps the blob attached to the silhouette at every view
        mask |= _segment_mask(yy, xx, (cx, torso_top + 0.08 * bh),
                              (bag_cx, bag_cy), 0.018 * bh)

    return mask.astype(np.uint8) * 255


def render_sequence(spec: WalkerSpec, view_deg: float, num_frames: int,
                    phase_seed: int) -> np.ndarray:
    """Render a walking sequence as (num_frames, RAW_HEIGHT, RAW_WIDTH) uint8.

    The phase seed picks the starting gait phase and mild per-sequence swing
    jitter; it does not change the stride frequency, so the period stays
    1/stride_freq frames.
    """
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")
    rng = np.random.default_rng(np.random.SeedSequence([0x5E9, phase_seed]))
    phase = rng.uniform(0.0, 2.0 * math.pi)
    stride_scale = 1.0 + 0.05 * rng.uniform(-1.0, 1.0)
    arm_scale = 1.0 + 0.07 * rng.uniform(-1.0, 1.0)
    frames = np.empty((num_frames, RAW_HEIGHT, RAW_WIDTH), dtype=np.uint8)
    for t in range(num_frames):
        theta = 2.0 * math.pi * spec.stride_freq * t + phase
        frames[t] = render_frame(spec, view_deg, theta,
                                 stride_scale=stride_scale,
                                 arm_scale=arm_scale)
    return frames

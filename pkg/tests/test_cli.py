"""End-to-end command-line tests, driven through main(argv)."""

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from conftest import fast_model_config
from gaitmm.cli import main
from gaitmm.config import TrainConfig, dump_config


def tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            h.update(str(path.relative_to(root)).encode())
            h.update(path.read_bytes())
    return h.hexdigest()


def quick_train_config(**overrides) -> TrainConfig:
    base = dict(iterations=1, base_lr=1e-3, decay_at=1000, decayed_lr=1e-4,
                batch_p=2, batch_k=2, frames_per_clip=6, seed=0,
                checkpoint_every=0)
    base.update(overrides)
    return TrainConfig(**base)


def write_ini(path: Path, model_cfg, train_cfg) -> str:
    path.write_text(dump_config(model_cfg, train_cfg), encoding="utf-8")
    return str(path)


@pytest.fixture(scope="module")
def tiny_ini(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.ini"
    return write_ini(path, fast_model_config(), quick_train_config())


@pytest.fixture(scope="module")
def trained_run(tiny_ini, corpus_root, tmp_path_factory):
    """A 3-iteration training run shared by the train and eval tests."""
    out = tmp_path_factory.mktemp("run")
    rc = main(["train", "--config", tiny_ini, "--data", str(corpus_root),
               "--out", str(out), "--iterations", "3"])
    assert rc == 0
    return out


class TestVersion:

    def test_version_flag_prints_and_exits(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "gaitmm-" in capsys.readouterr().out


class TestSynthData:

    def test_layout_and_count(self, tmp_path, capsys):
        out = tmp_path / "corpus"
        rc = main(["synth-data", "--out", str(out), "--subjects", "1",
                   "--views", "2", "--seqs-per-cond", "1",
                   "--frames", "4", "--seed", "3"])
        assert rc == 0
        assert "wrote 6 sequence directories" in capsys.readouterr().out
        for cond in ("nm-01", "bg-01", "cl-01"):
            for view in ("000", "018"):
                frames = sorted((out / "001" / cond / view).glob("*.png"))
                assert [f.name for f in frames] == [
                    "0001.png", "0002.png", "0003.png", "0004.png"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "synth-data"
        assert manifest["subjects"] == 1
        assert manifest["views"] == [0, 18]
        assert manifest["seed"] == 3

    def test_zero_subjects_is_a_valid_empty_corpus(self, tmp_path, capsys):
        out = tmp_path / "empty"
        rc = main(["synth-data", "--out", str(out), "--subjects", "0"])
        assert rc == 0
        assert "wrote 0 sequence directories" in capsys.readouterr().out
        assert (out / "manifest.json").exists()
        assert (out / "index.txt").read_text() == ""

    def test_same_seed_gives_identical_trees(self, tmp_path):
        args = ["--subjects", "1", "--views", "1", "--seqs-per-cond", "1",
                "--frames", "3"]
        digests = {}
        for name, seed in (("a", "7"), ("b", "7"), ("c", "8")):
            out = tmp_path / name
            assert main(["synth-data", "--out", str(out), "--seed", seed]
                        + args) == 0
            (out / "manifest.json").unlink()  # compare the rendered data only
            digests[name] = tree_digest(out)
        assert digests["a"] == digests["b"]
        assert digests["a"] != digests["c"]

    def test_bad_view_count_is_a_config_error(self, tmp_path, capsys):
        rc = main(["synth-data", "--out", str(tmp_path / "x"),
                   "--views", "0"])
        assert rc == 2
        assert "--views" in capsys.readouterr().err


class TestTrain:

    def test_run_writes_artifacts(self, trained_run):
        lines = (trained_run / "loss.csv").read_text().strip().split("\n")
        assert lines[0].startswith("iter,")
        assert len(lines) == 1 + 3  # --iterations flag overrode the INI's 1
        assert (trained_run / "checkpoint_final.pt").exists()

    def test_manifest_records_the_run(self, trained_run, corpus_root):
        manifest = json.loads((trained_run / "manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["data"] == str(corpus_root)
        assert manifest["protocol"] == "synth"
        assert manifest["train_subjects"] == [1, 2]
        assert manifest["parameters"]["total"] > 0
        assert manifest["parameters"]["total"] == sum(
            manifest["parameters"]["per_module"].values())
        assert "k_parts = 4" in manifest["config"]

    def test_same_seed_reproduces_the_loss_curve(self, tiny_ini, corpus_root,
                                                 trained_run, tmp_path):
        out = tmp_path / "again"
        rc = main(["train", "--config", tiny_ini, "--data", str(corpus_root),
                   "--out", str(out), "--iterations", "3"])
        assert rc == 0
        assert (out / "loss.csv").read_text() == \
            (trained_run / "loss.csv").read_text()

    def test_resume_continues_the_curve(self, tiny_ini, corpus_root, tmp_path):
        out = tmp_path / "run"
        assert main(["train", "--config", tiny_ini, "--data",
                     str(corpus_root), "--out", str(out)]) == 0
        rc = main(["train", "--config", tiny_ini, "--data", str(corpus_root),
                   "--out", str(out), "--iterations", "2",
                   "--resume", str(out / "checkpoint_final.pt")])
        assert rc == 0
        rows = (out / "loss.csv").read_text().strip().split("\n")[1:]
        assert [r.split(",")[0] for r in rows] == ["1", "2"]

    def test_indivisible_part_count_is_a_config_error(self, corpus_root,
                                                      tmp_path, capsys):
        ini = write_ini(tmp_path / "bad.ini",
                        fast_model_config(k_parts=7, l_parts=1),
                        quick_train_config())
        rc = main(["train", "--config", ini, "--data", str(corpus_root),
                   "--out", str(tmp_path / "out")])
        assert rc == 2
        err = capsys.readouterr().err
        assert "divisible" in err and "k_parts=7" in err

    def test_disabling_part_branch_shrinks_the_model(self, corpus_root,
                                                     tmp_path):
        totals = {}
        for name, use_pme in (("full", True), ("lean", False)):
            ini = write_ini(tmp_path / f"{name}.ini",
                            fast_model_config(use_pme=use_pme),
                            quick_train_config(iterations=0))
            out = tmp_path / name
            assert main(["train", "--config", ini, "--data",
                         str(corpus_root), "--out", str(out)]) == 0
            manifest = json.loads((out / "manifest.json").read_text())
            totals[name] = manifest["parameters"]["total"]
        assert totals["lean"] < totals["full"]

    def test_missing_corpus_is_a_data_error(self, tiny_ini, tmp_path, capsys):
        rc = main(["train", "--config", tiny_ini,
                   "--data", str(tmp_path / "nowhere"),
                   "--out", str(tmp_path / "out")])
        assert rc == 3
        assert "error:" in capsys.readouterr().err

    def test_empty_corpus_is_a_data_error(self, tiny_ini, tmp_path, capsys):
        (tmp_path / "bare").mkdir()
        rc = main(["train", "--config", tiny_ini,
                   "--data", str(tmp_path / "bare"),
                   "--out", str(tmp_path / "out")])
        assert rc == 3
        assert "no sequences" in capsys.readouterr().err

    def test_manifest_lands_before_training_starts(self, tiny_ini,
                                                   corpus_root, tmp_path,
                                                   monkeypatch, capsys):
        from gaitmm import cli
        from gaitmm.errors import NumericError

        def boom(*args, **kwargs):
            raise NumericError("boom")

        monkeypatch.setattr(cli, "run_training", boom)
        out = tmp_path / "out"
        rc = main(["train", "--config", tiny_ini, "--data", str(corpus_root),
                   "--out", str(out)])
        assert rc == 4
        assert "boom" in capsys.readouterr().err
        assert (out / "manifest.json").exists()


@pytest.fixture(scope="module")
def eval_out(trained_run, corpus_root, tmp_path_factory):
    out = tmp_path_factory.mktemp("eval")
    rc = main(["eval", "--checkpoint",
               str(trained_run / "checkpoint_final.pt"),
               "--data", str(corpus_root), "--out", str(out)])
    assert rc == 0
    return out


class TestEval:

    def test_reports_and_caches_exist(self, eval_out):
        for name in ("rank1_nm.csv", "rank1_bg.csv", "rank1_cl.csv",
                     "rank1_summary.csv", "embeddings_gallery.npz",
                     "embeddings_probe.npz", "manifest.json"):
            assert (eval_out / name).exists(), name

    def test_accuracies_are_probabilities(self, eval_out):
        for cond in ("nm", "bg", "cl"):
            rows = (eval_out / f"rank1_{cond}.csv").read_text().strip()
            for row in rows.split("\n")[1:]:
                for cell in row.split(",")[1:]:
                    assert 0.0 <= float(cell) <= 1.0

    def test_summary_covers_all_conditions(self, eval_out):
        rows = (eval_out / "rank1_summary.csv").read_text().strip().split("\n")
        names = [r.split(",")[0] for r in rows]
        assert names == ["condition", "bg", "cl", "nm", "overall"]

    def test_missing_gallery_view_is_named(self, trained_run, tmp_path,
                                           capsys):
        # a 75-subject corpus shot from only two views cannot satisfy the
        # fixed 11-view grid of the large-training protocol
        root = tmp_path / "twoview"
        frame = Image.fromarray(
            np.full((8, 8), 255, dtype=np.uint8), mode="L")
        for subject in range(1, 75):
            d = root / f"{subject:03d}" / "nm-01" / "000"
            d.mkdir(parents=True)
            frame.save(d / "0001.png")
        for cond in ("nm-01", "nm-05"):
            for view in ("000", "018"):
                d = root / "075" / cond / view
                d.mkdir(parents=True)
                for t in (1, 2, 3):
                    frame.save(d / f"{t:04d}.png")
        rc = main(["eval", "--checkpoint",
                   str(trained_run / "checkpoint_final.pt"),
                   "--data", str(root), "--protocol", "casia_b_lt",
                   "--out", str(tmp_path / "out")])
        assert rc == 3
        assert "090" in capsys.readouterr().err

    def test_missing_checkpoint_is_a_data_error(self, corpus_root, tmp_path,
                                                capsys):
        rc = main(["eval", "--checkpoint", str(tmp_path / "ghost.pt"),
                   "--data", str(corpus_root),
                   "--out", str(tmp_path / "out")])
        assert rc == 3
        assert "ghost.pt" in capsys.readouterr().err


class TestParams:

    @staticmethod
    def parse_table(text: str) -> dict:
        rows = {}
        for line in text.strip().split("\n")[1:]:
            name, std, dws = line.split()
            rows[name] = (int(std), int(dws))
        return rows

    def test_depthwise_mode_is_cheaper_overall(self, capsys):
        assert main(["params"]) == 0
        rows = self.parse_table(capsys.readouterr().out)
        standard, depthwise = rows["total"]
        assert depthwise < standard

    def test_single_part_matches_body_branch(self, tmp_path, capsys):
        ini = write_ini(tmp_path / "one.ini",
                        fast_model_config(k_parts=1),
                        quick_train_config())
        assert main(["params", "--config", ini]) == 0
        rows = self.parse_table(capsys.readouterr().out)
        for index in (1, 2):
            bme_std, _ = rows[f"block{index}.bme"]
            pme_std, _ = rows[f"block{index}.pme"]
            assert pme_std == bme_std

    def test_bad_config_file_is_a_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[model]\ncolour = blue\n")
        assert main(["params", "--config", str(bad)]) == 2
        assert "colour" in capsys.readouterr().err


class TestThreadCap:

    def test_cap_is_applied(self, monkeypatch):
        monkeypatch.setenv("GAITMM_THREADS", "2")
        try:
            assert main(["params"]) == 0
            assert torch.get_num_threads() == 2
        finally:
            torch.set_num_threads(1)

    @pytest.mark.parametrize("value", ["abc", "0", "-3"])
    def test_bad_cap_is_a_config_error(self, monkeypatch, capsys, value):
        monkeypatch.setenv("GAITMM_THREADS", value)
        assert main(["params"]) == 2
        assert "GAITMM_THREADS" in capsys.readouterr().err


class TestAblation:

    def test_matrix_without_eval(self, tiny_ini, corpus_root, tmp_path):
        out = tmp_path / "ablation"
        rc = main(["ablation", "--config", tiny_ini,
                   "--data", str(corpus_root), "--out", str(out),
                   "--iterations", "1", "--no-eval"])
        assert rc == 0
        for variant in ("bme", "bme_pme", "bme_msma", "full"):
            assert (out / variant / "checkpoint_final.pt").exists()
        lines = (out / "ablation_summary.csv").read_text().strip().split("\n")
        assert lines[0] == ("variant,final_total_loss,nm_mean,bg_mean,"
                            "cl_mean,overall_mean")
        assert len(lines) == 5
        for line in lines[1:]:
            assert line.endswith(",,,,")
            float(line.split(",")[1])  # the loss column is still populated

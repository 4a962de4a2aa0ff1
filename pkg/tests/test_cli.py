import json

import pytest

from sidalign.cli import main


def run_pipeline(root, seed=0):
    """Tiny end-to-end run; returns paths of every artifact produced."""
    root.mkdir(parents=True, exist_ok=True)
    paths = {
        "x": root / "x.jsonl",
        "y": root / "y.jsonl",
        "trials": root / "trials.tsv",
        "prof_x": root / "prof_x.jsonl",
        "prof_y": root / "prof_y.jsonl",
        "fusion": root / "fusion.json",
        "ckpt": root / "ckpt.json",
        "log": root / "train_log.jsonl",
        "scores": root / "scores.tsv",
        "report": root / "report.json",
    }
    assert main([
        "synth", "--n-speakers", "40", "--n-enroll", "3", "--n-runtime", "2",
        "--latent-dim", "8", "--embed-dim", "8",
        "--noise-x", "0.3", "--noise-y", "0.15",
        "--seed", str(seed), "--model-seed", "99",
        "--out-x", str(paths["x"]), "--out-y", str(paths["y"]),
        "--trials-out", str(paths["trials"]),
        "--n-target", "40", "--n-imposter", "40",
    ]) == 0
    assert main(["profile", "--embeddings", str(paths["x"]),
                 "--out", str(paths["prof_x"])]) == 0
    assert main(["profile", "--embeddings", str(paths["y"]),
                 "--out", str(paths["prof_y"])]) == 0
    assert main(["logit-align", "--profiles-x", str(paths["prof_x"]),
                 "--profiles-y", str(paths["prof_y"]),
                 "--out", str(paths["fusion"])]) == 0
    assert main([
        "train", "--corpus-x", str(paths["x"]), "--corpus-y", str(paths["y"]),
        "--variant", "m2", "--epochs", "2", "--steps", "4", "--batch", "16",
        "--hidden", "8", "--seed", str(seed),
        "--out", str(paths["ckpt"]), "--log", str(paths["log"]),
    ]) == 0
    assert main([
        "score", "--scorer", "nessa-m2", "--trials", str(paths["trials"]),
        "--corpus-x", str(paths["x"]), "--corpus-y", str(paths["y"]),
        "--checkpoint", str(paths["ckpt"]), "--out", str(paths["scores"]),
    ]) == 0
    assert main([
        "eval", "--scores", str(paths["scores"]), "--scorer-id", "nessa-m2",
        "--out", str(paths["report"]),
    ]) == 0
    return paths


class TestPipeline:
    def test_end_to_end_and_determinism(self, tmp_path):
        a = run_pipeline(tmp_path / "a")
        b = run_pipeline(tmp_path / "b")
        for key in ("x", "y", "trials", "prof_x", "prof_y", "fusion",
                    "ckpt", "scores", "report"):
            assert a[key].read_bytes() == b[key].read_bytes(), key

    def test_report_contents(self, tmp_path):
        paths = run_pipeline(tmp_path / "run")
        report = json.loads(paths["report"].read_text())
        assert report["scorer_id"] == "nessa-m2"
        assert 0.0 <= report["eer"] <= 1.0
        assert {e["target_far"] for e in report["per_far"]} == {0.125, 0.05, 0.02}
        assert "tool_version" in report and "config_hash" in report

    def test_all_scorers_run(self, tmp_path):
        paths = run_pipeline(tmp_path / "run")
        for scorer in ("cosine-sym-x", "cosine-sym-y", "cosine-asym-raw"):
            out = tmp_path / f"{scorer}.tsv"
            assert main([
                "score", "--scorer", scorer, "--trials", str(paths["trials"]),
                "--corpus-x", str(paths["x"]), "--corpus-y", str(paths["y"]),
                "--out", str(out),
            ]) == 0
            assert out.exists()
        out = tmp_path / "fused.tsv"
        assert main([
            "score", "--scorer", "logit-fused", "--trials", str(paths["trials"]),
            "--corpus-x", str(paths["x"]), "--corpus-y", str(paths["y"]),
            "--fusion", str(paths["fusion"]), "--out", str(out),
        ]) == 0

    def test_eval_with_baseline(self, tmp_path):
        paths = run_pipeline(tmp_path / "run")
        base_scores = tmp_path / "base.tsv"
        base_report = tmp_path / "base.json"
        assert main([
            "score", "--scorer", "cosine-asym-raw", "--trials", str(paths["trials"]),
            "--corpus-x", str(paths["x"]), "--corpus-y", str(paths["y"]),
            "--out", str(base_scores),
        ]) == 0
        assert main(["eval", "--scores", str(base_scores),
                     "--scorer-id", "raw", "--out", str(base_report)]) == 0
        out = tmp_path / "with_impact.json"
        assert main([
            "eval", "--scores", str(paths["scores"]), "--scorer-id", "nessa-m2",
            "--baseline-report", str(base_report), "--out", str(out),
        ]) == 0
        report = json.loads(out.read_text())
        assert all("relative_impact" in e for e in report["per_far"])


class TestErrors:
    def test_missing_file_exit_one(self, tmp_path):
        assert main(["profile", "--embeddings", str(tmp_path / "nope.jsonl"),
                     "--out", str(tmp_path / "o.jsonl")]) == 1

    def test_scorer_checkpoint_required(self, tmp_path):
        paths = run_pipeline(tmp_path / "run")
        assert main([
            "score", "--scorer", "nessa-m1", "--trials", str(paths["trials"]),
            "--corpus-x", str(paths["x"]), "--corpus-y", str(paths["y"]),
            "--out", str(tmp_path / "o.tsv"),
        ]) == 1

    def test_variant_mismatch_exit_one(self, tmp_path):
        paths = run_pipeline(tmp_path / "run")
        assert main([
            "score", "--scorer", "nessa-m1", "--trials", str(paths["trials"]),
            "--corpus-x", str(paths["x"]), "--corpus-y", str(paths["y"]),
            "--checkpoint", str(paths["ckpt"]),
            "--out", str(tmp_path / "o.tsv"),
        ]) == 1

    def test_usage_error_exit_two(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["score", "--scorer", "not-a-scorer"])
        assert excinfo.value.code == 2


class TestGradcheck:
    def test_default_passes(self):
        assert main(["gradcheck", "--dim", "6", "--hidden", "10"]) == 0

    def test_absurd_tolerance_fails(self):
        assert main(["gradcheck", "--dim", "6", "--hidden", "10",
                     "--tolerance", "1e-18"]) == 1

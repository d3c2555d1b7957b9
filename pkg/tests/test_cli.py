"""CLI subcommands: gen, ingest, adjudicate, eval."""

import json

import pytest
from click.testing import CliRunner

from jarvis import canonical
from jarvis.cli import main
from jarvis.storage import read_jsonl
from tests.conftest import PROMO_TEMPLATES


@pytest.fixture
def runner():
    return CliRunner()


def corpus_spec_dict(n_genuine=30, n_colluders=5):
    return {
        "rng_seed": 77,
        "n_genuine": n_genuine,
        "time_horizon_days": 30,
        "campaigns": [{
            "n_colluders": n_colluders,
            "template_text": PROMO_TEMPLATES[0],
            "target_item": "promo-x",
            "shared_entities": ["device", "ip"],
            "paraphrase_rate": 0.1,
            "rare_char_substitution_rate": 0.1,
            "time_spread_seconds": 86400,
            "reuse_image": True,
        }],
    }


def write_spec(tmp_path, spec=None):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec or corpus_spec_dict()))
    return path


class TestGen:
    def test_writes_corpus_files(self, runner, tmp_path):
        spec = write_spec(tmp_path)
        out = tmp_path / "corpus"
        result = runner.invoke(main, ["gen", "--spec", str(spec),
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "reviews.jsonl").exists()
        assert (out / "behaviors.jsonl").exists()
        assert (out / "labels.jsonl").exists()
        labels = {d["review_id"]: d["label"]
                  for d in read_jsonl(out / "labels.jsonl")}
        assert sum(1 for v in labels.values() if v == "deceptive") == 5

    def test_deterministic_output(self, runner, tmp_path):
        spec = write_spec(tmp_path)
        outs = []
        for name in ("c1", "c2"):
            out = tmp_path / name
            runner.invoke(main, ["gen", "--spec", str(spec),
                                 "--out", str(out)])
            outs.append((out / "reviews.jsonl").read_bytes())
        assert outs[0] == outs[1]


class TestIngestAdjudicate:
    def test_ingest_then_adjudicate(self, runner, tmp_path):
        spec = write_spec(tmp_path)
        corpus_dir = tmp_path / "corpus"
        runner.invoke(main, ["gen", "--spec", str(spec),
                             "--out", str(corpus_dir)])
        data_dir = tmp_path / "data"
        result = runner.invoke(main, [
            "ingest", "--data-dir", str(data_dir),
            "--reviews", str(corpus_dir / "reviews.jsonl"),
            "--behaviors", str(corpus_dir / "behaviors.jsonl"),
            "--topk", "10"])
        assert result.exit_code == 0, result.output
        assert "ingested 35 reviews" in result.output

        result = runner.invoke(main, [
            "adjudicate", "--data-dir", str(data_dir),
            "--review-id", "r-c0-000", "--topk", "10"])
        assert result.exit_code == 0, result.output
        case = canonical.loads(result.output.strip().encode())
        assert case["adjudication"]["verdict"] == "fraudulent"

    def test_unknown_review_fails(self, runner, tmp_path):
        data_dir = tmp_path / "data"
        data_dir.mkdir()
        result = runner.invoke(main, ["adjudicate", "--data-dir",
                                      str(data_dir), "--review-id", "nope"])
        assert result.exit_code != 0


class TestEval:
    def _prepare(self, runner, tmp_path, thresholds):
        spec = write_spec(tmp_path, corpus_spec_dict(n_genuine=120))
        corpus_dir = tmp_path / "corpus"
        runner.invoke(main, ["gen", "--spec", str(spec),
                             "--out", str(corpus_dir)])
        config = {
            "detector": {"top_k": 10, "rr_edge_threshold": 0.5},
            "ablation": {},
            "thresholds": thresholds,
        }
        config_path = tmp_path / "eval.json"
        config_path.write_text(json.dumps(config))
        return corpus_dir, config_path

    def test_passing_thresholds_exit_zero(self, runner, tmp_path):
        corpus_dir, config = self._prepare(runner, tmp_path,
                                           {"precision": 0.9, "recall": 0.8})
        result = runner.invoke(main, ["eval", "--corpus", str(corpus_dir),
                                      "--config", str(config)])
        assert result.exit_code == 0, result.output
        report = canonical.loads((corpus_dir / "report.json").read_bytes())
        assert report[0]["config_key"] == "baseline"
        assert report[0]["precision"] >= 0.9

    def test_missed_threshold_exits_nonzero(self, runner, tmp_path):
        corpus_dir, config = self._prepare(runner, tmp_path,
                                           {"precision": 1.01})
        result = runner.invoke(main, ["eval", "--corpus", str(corpus_dir),
                                      "--config", str(config)])
        assert result.exit_code == 1
        assert "thresholds missed" in result.output

    def test_thresholds_with_grid_keep_grid_and_add_baseline(self, runner,
                                                             tmp_path):
        spec = write_spec(tmp_path, corpus_spec_dict(n_genuine=40))
        corpus_dir = tmp_path / "corpus"
        runner.invoke(main, ["gen", "--spec", str(spec),
                             "--out", str(corpus_dir)])
        config_path = tmp_path / "eval.json"
        config_path.write_text(json.dumps({
            "detector": {"top_k": 8, "rr_edge_threshold": 0.5},
            "ablation": {"lambda_grid": [0.0]},
            "thresholds": {"recall": 0.0},
        }))
        result = runner.invoke(main, ["eval", "--corpus", str(corpus_dir),
                                      "--config", str(config_path)])
        assert result.exit_code == 0, result.output
        report = canonical.loads((corpus_dir / "report.json").read_bytes())
        assert [r["config_key"] for r in report] == ["baseline", "lambda=0"]

    def test_ablation_grid_reports(self, runner, tmp_path):
        spec = write_spec(tmp_path, corpus_spec_dict(n_genuine=40))
        corpus_dir = tmp_path / "corpus"
        runner.invoke(main, ["gen", "--spec", str(spec),
                             "--out", str(corpus_dir)])
        config_path = tmp_path / "eval.json"
        config_path.write_text(json.dumps({
            "detector": {"top_k": 8, "rr_edge_threshold": 0.5},
            "ablation": {"lambda_grid": [0.0, 0.5, 1.0]},
        }))
        result = runner.invoke(main, ["eval", "--corpus", str(corpus_dir),
                                      "--config", str(config_path)])
        assert result.exit_code == 0, result.output
        report = canonical.loads((corpus_dir / "report.json").read_bytes())
        assert [r["config_key"] for r in report] == \
            ["lambda=0", "lambda=0.5", "lambda=1"]

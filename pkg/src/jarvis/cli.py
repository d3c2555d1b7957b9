"""Command line interface: gen, ingest, adjudicate, eval, serve.

All subcommands drive the same code paths as the HTTP service (ServiceCore,
the detector, the harness); files use the canonical serialization.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import canonical
from .detector import ReviewFraudDetector
from .evaluation import AblationConfig, run_ablation
from .service import ServiceCore, create_app
from .synth import Corpus, CorpusSpec, generate_corpus

_DETECTOR_FLAGS = [
    click.option("--lambda", "lambda_", type=float, default=0.5,
                 show_default=True, help="dense/sparse trade-off weight"),
    click.option("--topk", "top_k", type=int, default=25, show_default=True,
                 help="retrieved candidates per query"),
    click.option("--window-days", type=int, default=30, show_default=True,
                 help="sliding index window"),
    click.option("--delta-t-hours", type=float, default=72.0, show_default=True,
                 help="max hours between an expanded review and a seed review"),
    click.option("--max-fanout", "max_reviews_per_entity", type=int, default=50,
                 show_default=True, help="reviews attached per entity"),
]


def detector_flags(fn):
    for flag in reversed(_DETECTOR_FLAGS):
        fn = flag(fn)
    return fn


def _detector_params(lambda_, top_k, window_days, delta_t_hours,
                     max_reviews_per_entity) -> dict:
    return {
        "lambda_": lambda_,
        "top_k": top_k,
        "window_days": window_days,
        "delta_t_seconds": int(delta_t_hours * 3600),
        "max_reviews_per_entity": max_reviews_per_entity,
    }


@click.group()
def main():
    """Review-fraud retrieval, evidence graphs, and adjudication."""


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="corpus spec JSON")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def gen(spec_path, out_dir):
    """Generate a synthetic labeled corpus into OUT."""
    spec = CorpusSpec.from_dict(json.loads(Path(spec_path).read_text()))
    corpus = generate_corpus(spec)
    corpus.write_dir(out_dir)
    deceptive = sum(1 for v in corpus.labels.values() if v == "deceptive")
    click.echo(f"wrote {len(corpus.reviews)} reviews "
               f"({deceptive} deceptive), {len(corpus.behaviors)} behaviors "
               f"to {out_dir}")


@main.command()
@click.option("--data-dir", type=click.Path(file_okay=False), required=True)
@click.option("--reviews", "reviews_path", type=click.Path(exists=True),
              required=True)
@click.option("--behaviors", "behaviors_path", type=click.Path(exists=True),
              required=False)
@click.option("--encoders", type=click.Choice(["mock", "remote"]),
              default="mock", show_default=True)
@detector_flags
def ingest(data_dir, reviews_path, behaviors_path, encoders, **flags):
    """Ingest reviews (and behaviors) into a service data directory."""
    from .records import BehaviorRecord, Review
    from .storage import read_jsonl

    core = ServiceCore(data_dir, detector_params=_detector_params(**flags),
                       encoders=encoders)
    count = 0
    for d in read_jsonl(Path(reviews_path)):
        core.ingest_review(Review.from_dict(d))
        count += 1
    behavior_count = 0
    if behaviors_path:
        for d in read_jsonl(Path(behaviors_path)):
            core.ingest_behavior(BehaviorRecord.from_dict(d))
            behavior_count += 1
    click.echo(f"ingested {count} reviews, {behavior_count} behaviors "
               f"into {data_dir}")


@main.command()
@click.option("--data-dir", type=click.Path(exists=True, file_okay=False),
              required=True)
@click.option("--review-id", required=True)
@click.option("--encoders", type=click.Choice(["mock", "remote"]),
              default="mock", show_default=True)
@click.option("--adjudicator", type=click.Choice(["mock", "remote"]),
              default="mock", show_default=True)
@detector_flags
def adjudicate(data_dir, review_id, encoders, adjudicator, **flags):
    """Adjudicate one ingested review; prints the case record."""
    core = ServiceCore(data_dir, detector_params=_detector_params(**flags),
                       encoders=encoders, adjudicator=adjudicator)
    try:
        case = core.adjudicate(review_id)
    except KeyError:
        raise click.ClickException(f"unknown review {review_id!r}")
    click.echo(canonical.dumps(case).decode("utf-8"))


@main.command("eval")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True,
              file_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True,
              dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default=None, help="report file (defaults to CORPUS/report.json)")
def eval_cmd(corpus_dir, config_path, out_path):
    """Score the pipeline on a labeled corpus; run the ablation grid.

    Config JSON: {"detector": {...}, "ablation": {...}, "thresholds":
    {"precision": .., "recall": .., "f1": ..}}. Exits nonzero if the baseline
    run misses any threshold.
    """
    from sklearn.base import clone

    from .evaluation import run_grid_point

    config = json.loads(Path(config_path).read_text())
    corpus = Corpus.read_dir(corpus_dir)
    detector = ReviewFraudDetector(**config.get("detector", {}))
    ablation = AblationConfig.from_dict(config.get("ablation", {}))
    thresholds = config.get("thresholds", {})
    reports = run_ablation(corpus, detector, ablation)
    if thresholds and not any(r.config_key == "baseline" for r in reports):
        # thresholds are judged against an explicit baseline run
        reports.append(run_grid_point(corpus, clone(detector), corpus.labels,
                                      "baseline"))
        reports.sort(key=lambda r: r.config_key)

    out_file = Path(out_path) if out_path else Path(corpus_dir) / "report.json"
    out_file.write_bytes(canonical.dumps(
        [r.to_dict() for r in reports]))
    click.echo(f"{'config':24} {'P':>7} {'R':>7} {'F1':>7} "
               f"{'tp':>5} {'fp':>5} {'fn':>5} {'tn':>5}")
    for report in reports:
        click.echo(f"{report.config_key:24} {_fmt(report.precision):>7} "
                   f"{_fmt(report.recall):>7} {_fmt(report.f1):>7} "
                   f"{report.tp:>5} {report.fp:>5} {report.fn:>5} "
                   f"{report.tn:>5}")
    click.echo(f"report written to {out_file}")

    failed = []
    baseline = next((r for r in reports if r.config_key == "baseline"), None)
    if thresholds and baseline is not None:
        for metric, minimum in thresholds.items():
            value = getattr(baseline, metric, None)
            if value is None or value < minimum:
                failed.append(f"{metric} {_fmt(value)} < {minimum}")
    if failed:
        click.echo("thresholds missed: " + "; ".join(failed), err=True)
        sys.exit(1)


def _fmt(value) -> str:
    return "n/a" if value is None else f"{value:.3f}"


@main.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", type=click.Path(file_okay=False), required=True)
@click.option("--encoders", type=click.Choice(["mock", "remote"]),
              default="mock", show_default=True)
@click.option("--adjudicator", type=click.Choice(["mock", "remote"]),
              default="mock", show_default=True)
@click.option("--console-dir", type=click.Path(file_okay=False), default=None,
              help="static assets served under /console")
@click.option("--token", default=None, envvar="JARVIS_API_TOKEN",
              help="static bearer token; unset disables auth")
@detector_flags
def serve(port, host, data_dir, encoders, adjudicator, console_dir, token,
          **flags):
    """Run the HTTP service."""
    import uvicorn

    core = ServiceCore(data_dir, detector_params=_detector_params(**flags),
                       encoders=encoders, adjudicator=adjudicator)
    app = create_app(core, token=token, console_dir=console_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

"""Precision/recall/F1 scoring and the ablation grid runner.

The positive class is ``deceptive``. Inconclusive verdicts count as negative
predictions: the conservative mapping for a fraud pipeline. Metrics that
would divide by zero are reported as None (an explicit undefined marker),
never as 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from sklearn.base import clone

from .detector import ReviewFraudDetector
from .errors import ValidationError
from .records import Adjudication
from .validation import check_label_map

ABLATION_FLAGS = (
    "disable_dense",
    "disable_sparse",
    "disable_image",
    "disable_review_nodes",
    "disable_entity_nodes",
)


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean; callers guard the P + R > 0 precondition."""
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float | None
    recall: float | None
    f1: float | None
    config_key: str = "baseline"
    runtime_seconds: float | None = None

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int,
                    config_key: str = "baseline",
                    runtime_seconds: float | None = None) -> "EvalReport":
        precision = tp / (tp + fp) if tp + fp > 0 else None
        recall = tp / (tp + fn) if tp + fn > 0 else None
        f1 = None
        if precision is not None and recall is not None and precision + recall > 0:
            f1 = f1_score(precision, recall)
        return cls(tp=tp, fp=fp, fn=fn, tn=tn, precision=precision,
                   recall=recall, f1=f1, config_key=config_key,
                   runtime_seconds=runtime_seconds)

    def f1_or_zero(self) -> float:
        return 0.0 if self.f1 is None else self.f1

    def to_dict(self, include_runtime: bool = True) -> dict:
        d = {
            "config_key": self.config_key,
            "f1": self.f1,
            "fn": self.fn,
            "fp": self.fp,
            "precision": self.precision,
            "recall": self.recall,
            "tn": self.tn,
            "tp": self.tp,
        }
        if include_runtime:
            d["runtime_seconds"] = self.runtime_seconds
        return d


def score_run(adjudications: list[Adjudication], labels: dict[str, str],
              config_key: str = "baseline",
              runtime_seconds: float | None = None) -> EvalReport:
    """Confusion counts of verdicts against ground-truth labels."""
    check_label_map(labels)
    tp = fp = fn = tn = 0
    for adjudication in adjudications:
        label = labels.get(adjudication.review_id)
        if label is None:
            raise ValidationError(
                f"review {adjudication.review_id!r} has no label", "labels")
        predicted_positive = adjudication.verdict == "fraudulent"
        actually_positive = label == "deceptive"
        if predicted_positive and actually_positive:
            tp += 1
        elif predicted_positive:
            fp += 1
        elif actually_positive:
            fn += 1
        else:
            tn += 1
    return EvalReport.from_counts(tp, fp, fn, tn, config_key=config_key,
                                  runtime_seconds=runtime_seconds)


@dataclass(frozen=True)
class AblationConfig:
    """Which single-change runs to execute.

    Each True flag contributes one grid point with only that flag enabled
    (so no run ever disables both dense and sparse retrieval, which would
    eliminate retrieval entirely); each lambda / delta-t value contributes
    one point overriding only that knob. An all-default config yields the
    single baseline point.
    """

    disable_dense: bool = False
    disable_sparse: bool = False
    disable_image: bool = False
    disable_review_nodes: bool = False
    disable_entity_nodes: bool = False
    lambda_grid: tuple[float, ...] = ()
    delta_t_grid: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "lambda_grid", tuple(self.lambda_grid))
        object.__setattr__(self, "delta_t_grid", tuple(self.delta_t_grid))
        for lam in self.lambda_grid:
            if not 0.0 <= lam <= 1.0:
                raise ValidationError("lambda_grid values must be in [0,1]",
                                      "lambda_grid")
        for dt in self.delta_t_grid:
            if dt < 1:
                raise ValidationError("delta_t_grid values must be >= 1",
                                      "delta_t_grid")

    @classmethod
    def from_dict(cls, d: dict) -> "AblationConfig":
        return cls(
            disable_dense=d.get("disable_dense", False),
            disable_sparse=d.get("disable_sparse", False),
            disable_image=d.get("disable_image", False),
            disable_review_nodes=d.get("disable_review_nodes", False),
            disable_entity_nodes=d.get("disable_entity_nodes", False),
            lambda_grid=tuple(d.get("lambda_grid", ())),
            delta_t_grid=tuple(d.get("delta_t_grid", ())),
        )


def grid_points(ablation: AblationConfig) -> list[tuple[str, dict]]:
    points: list[tuple[str, dict]] = []
    for flag in ABLATION_FLAGS:
        if getattr(ablation, flag):
            points.append((flag, {flag: True}))
    for lam in ablation.lambda_grid:
        points.append((f"lambda={lam:g}", {"lambda_": lam}))
    for dt in ablation.delta_t_grid:
        points.append((f"delta_t={dt}", {"delta_t_seconds": dt}))
    if not points:
        points.append(("baseline", {}))
    return sorted(points, key=lambda p: p[0])


def run_grid_point(corpus, detector: ReviewFraudDetector,
                   labels: dict[str, str], config_key: str) -> EvalReport:
    started = time.perf_counter()
    detector.fit(corpus)
    adjudications = detector.adjudications(corpus.reviews)
    return score_run(adjudications, labels, config_key=config_key,
                     runtime_seconds=time.perf_counter() - started)


def run_ablation(corpus, base_detector: ReviewFraudDetector,
                 ablation: AblationConfig) -> list[EvalReport]:
    """One full pipeline run per grid point, reports sorted by config key.

    All points share the base detector's gateway so mock embeddings are
    computed once per (text, images) input across the sweep.
    """
    shared_gateway = base_detector.gateway
    if shared_gateway is None:
        from .encoders import EncoderGateway
        shared_gateway = EncoderGateway.mock(dense_dim=base_detector.dense_dim)
    reports = []
    for config_key, overrides in grid_points(ablation):
        detector = clone(base_detector)
        detector.set_params(gateway=shared_gateway, **overrides)
        reports.append(run_grid_point(corpus, detector, corpus.labels,
                                      config_key))
    return reports

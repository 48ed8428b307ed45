"""Norm-induced alignment measure.

Each feature contributes the Euclidean norm of its observation-minus-
projection errors divided by its own point count; contributions are
weight-summed and divided by a norm of the weight vector. Features may
sit on different year grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ingest import AlignedPair
from .model import Method, ScoreMatrix, WeightScheme, fingerprint

DENOMINATORS = ("l2", "l1")


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    feature: str
    errors: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.errors, dtype=np.float64).reshape(-1)
        if e.size == 0:
            raise ValueError("error series must have at least one point")
        if not np.all(np.isfinite(e)):
            raise ValueError(f"non-finite errors for {self.feature!r}")
        object.__setattr__(self, "errors", e)

    @property
    def n_points(self) -> int:
        return int(self.errors.size)


@dataclass(frozen=True)
class NormScoreBreakdown:
    measures: Mapping[str, float]
    weights: WeightScheme
    total: float


def feature_measure(e: ErrorSeries) -> float:
    """Discrete Euclidean norm of the errors divided by the number of points."""
    return float(np.sqrt(np.sum(e.errors**2)) / e.n_points)


def aggregate(measures: Sequence[float], weights: Sequence[float], denominator: str = "l2") -> float:
    """Weighted sum of per-feature measures over ``||w||_2`` (or ``sum(w)``)."""
    m = np.asarray(measures, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if denominator == "l2":
        scale = float(np.sqrt(np.sum(w**2)))
    elif denominator == "l1":
        scale = float(np.sum(w))
    else:
        raise ValueError(f"unknown weight denominator {denominator!r}")
    return float(np.sum(w * m) / scale)


def norm_score(pair: AlignedPair, w: WeightScheme, denominator: str = "l2") -> NormScoreBreakdown:
    names = pair.feature_names
    wv = w.vector(names)
    measures = {
        name: feature_measure(ErrorSeries(name, fp.errors)) for name, fp in pair.features.items()
    }
    total = aggregate([measures[n] for n in names], wv, denominator)
    return NormScoreBreakdown(measures, WeightScheme(dict(zip(names, wv))), total)


def norm_score_over_time(
    pair: AlignedPair, w: WeightScheme, denominator: str = "l2"
) -> list[tuple[int, float]]:
    """Score every year separately from the features observed that year.

    Each year uses singleton domains; weights are renormalised over the
    features present, and years where only zero-weight features are
    present are skipped like empty years.
    """
    names = pair.feature_names
    wv = dict(zip(names, w.vector(names)))
    per_year: dict[int, list[tuple[float, float]]] = {}
    for name, fp in pair.features.items():
        for year, err in zip(fp.years.tolist(), fp.errors.tolist()):
            per_year.setdefault(year, []).append((abs(err), wv[name]))
    out = []
    for year in sorted(per_year):
        items = per_year[year]
        if not any(wi > 0 for _, wi in items):
            continue
        out.append((year, aggregate([m for m, _ in items], [wi for _, wi in items], denominator)))
    return out


def norm_config(w: WeightScheme, denominator: str, normalization: bool = True) -> dict:
    return {
        "method": Method.NORM.value,
        "weights": w.as_dict(),
        "weight_denominator": denominator,
        "normalization": normalization,
    }


def norm_matrix(
    pairs: Sequence[AlignedPair], w: WeightScheme, denominator: str = "l2", normalization: bool = True
) -> ScoreMatrix:
    entries = {(p.region, p.scenario): norm_score(p, w, denominator).total for p in pairs}
    return ScoreMatrix(Method.NORM, entries, fingerprint(norm_config(w, denominator, normalization)))


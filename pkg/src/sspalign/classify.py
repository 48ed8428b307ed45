"""Nearest-trajectory classifier and rank ensemble across scoring methods."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import (
    CoverageMismatch,
    EmptyInput,
    IncompleteRegion,
    MissingScenario,
    NonPositiveTemperature,
)
from .ingest import AlignedPair
from .model import (
    SCENARIOS,
    Method,
    Orientation,
    Scenario,
    ScoreMatrix,
    WeightScheme,
    fingerprint,
)

DEFAULT_TEMPERATURE = 1.0


@dataclass(frozen=True)
class SspProbability:
    region: str
    probs: Mapping[Scenario, float]

    def best(self) -> Scenario:
        return max(self.probs, key=self.probs.__getitem__)


def mean_distance(pair: AlignedPair, weights: WeightScheme | None = None) -> float:
    """Mean over shared years of the weighted Euclidean observation-projection distance.

    Weights are rescaled to sum to one; ``None`` means equal weights.
    """
    years, obs, proj = pair.matrices()
    if len(years) == 0:
        raise EmptyInput(f"{pair.region}/{pair.scenario.value}: features share no years")
    if weights is None:
        w = np.full(obs.shape[1], 1.0 / obs.shape[1])
    else:
        w = weights.vector(pair.feature_names)
        w = w / w.sum()
    return float(np.mean(np.sqrt(np.sum(w * (obs - proj) ** 2, axis=1))))


def softmax_neg(distances: Sequence[float], temperature: float) -> np.ndarray:
    z = -np.asarray(distances, dtype=np.float64) / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def classify(
    pairs: Sequence[AlignedPair],
    temperature: float = DEFAULT_TEMPERATURE,
    weights: WeightScheme | None = None,
) -> SspProbability:
    """Per-SSP membership probabilities for one region.

    Probabilities are a softmax over negative mean distances, so the
    closest scenario trajectory receives the largest share.
    """
    if not temperature > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    by_scenario = {p.scenario: p for p in pairs}
    regions = {p.region for p in pairs}
    if len(regions) > 1:
        raise ValueError(f"classify expects one region, got {sorted(regions)}")
    missing = [s.value for s in SCENARIOS if s not in by_scenario]
    if missing:
        raise MissingScenario(f"no aligned pair for {', '.join(missing)}")
    d = [mean_distance(by_scenario[s], weights) for s in SCENARIOS]
    probs = softmax_neg(d, temperature)
    return SspProbability(regions.pop(), dict(zip(SCENARIOS, probs.tolist())))


def classifier_config(temperature: float, weights: WeightScheme | None, normalization: bool = True) -> dict:
    return {
        "method": Method.CLASSIFIER.value,
        "temperature": float(temperature),
        "weights": None if weights is None else weights.as_dict(),
        "normalization": normalization,
    }


def classifier_matrix(
    pairs: Sequence[AlignedPair],
    temperature: float = DEFAULT_TEMPERATURE,
    weights: WeightScheme | None = None,
    normalization: bool = True,
) -> ScoreMatrix:
    by_region: dict[str, list[AlignedPair]] = {}
    for p in pairs:
        by_region.setdefault(p.region, []).append(p)
    entries = {}
    for region in sorted(by_region):
        result = classify(by_region[region], temperature, weights)
        entries.update({(region, s): v for s, v in result.probs.items()})
    return ScoreMatrix(
        Method.CLASSIFIER, entries, fingerprint(classifier_config(temperature, weights, normalization))
    )


def to_alignment_ranks(m: ScoreMatrix) -> dict[tuple[str, Scenario], float]:
    """Rank scenarios within each region: 1 is best aligned, 5 worst.

    Tied values share the average of the positions they occupy.
    """
    out = {}
    for region in m.regions:
        row = m.row(region)
        missing = [s.value for s in SCENARIOS if s not in row]
        if missing:
            raise IncompleteRegion(f"{m.method.value} scores for {region!r} lack {', '.join(missing)}")
        values = np.array([row[s] for s in SCENARIOS])
        if m.orientation is Orientation.HIGHER_BETTER:
            values = -values
        for s, r in zip(SCENARIOS, rankdata(values, method="average")):
            out[(region, s)] = float(r)
    return out


@dataclass(frozen=True)
class EnsembleConfig:
    inputs: Sequence[ScoreMatrix]
    tie_rule: str = "average-rank"

    def __post_init__(self):
        if len(self.inputs) < 2:
            raise ValueError("an ensemble needs at least two score matrices")
        if self.tie_rule != "average-rank":
            raise ValueError(f"unsupported tie rule {self.tie_rule!r}")
        keys = set(self.inputs[0].entries)
        for m in self.inputs[1:]:
            if set(m.entries) != keys:
                raise CoverageMismatch(
                    f"{m.method.value} covers a different (region, scenario) set than {self.inputs[0].method.value}"
                )


def ensemble(cfg: EnsembleConfig) -> ScoreMatrix:
    """Average alignment ranks across methods and map to [0, 1], 1 = best."""
    ranks = [to_alignment_ranks(m) for m in cfg.inputs]
    entries = {}
    for key in ranks[0]:
        # ranks are multiples of 0.5, so this sum is exact in any order
        mean_rank = sum(r[key] for r in ranks) / len(ranks)
        entries[key] = 1.0 - (mean_rank - 1.0) / 4.0
    fp = fingerprint({"method": Method.ENSEMBLE.value, "inputs": sorted(m.config_fingerprint for m in cfg.inputs)})
    return ScoreMatrix(Method.ENSEMBLE, entries, fp)

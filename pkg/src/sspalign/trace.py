"""TraCE trajectory scores.

A step from ``prev`` to ``curr`` is scored by mixing two bounded metrics:

* an angle term, the weighted cosine between the step actually taken and
  the vector from ``prev`` to the current target;
* a distance term, the relative reduction in distance to target,
  ``(d_prev - d_curr) / (d_prev + d_curr)``.

``S = lam * angle + (1 - lam) * distance`` lies in [-1, 1]; positive means
the trajectory is heading towards the scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import (
    CoverageMismatch,
    DimensionMismatch,
    EmptyInput,
    InsufficientYears,
    InvalidLambda,
    MissingWeight,
)
from .ingest import AlignedPair, resample_projection
from .model import Method, Orientation, ScoreMatrix, WeightScheme, fingerprint

DEFAULT_LAMBDA = 0.9
LAMBDA_GRID = tuple(i / 20 for i in range(21))


@dataclass(frozen=True)
class TargetPolicy:
    kind: str = "same_year"
    horizon: int | None = None

    def __post_init__(self):
        if self.kind not in ("same_year", "next_year", "horizon"):
            raise ValueError(f"unknown target policy {self.kind!r}")
        if (self.kind == "horizon") != (self.horizon is not None):
            raise ValueError("a horizon year is required exactly for the horizon policy")

    @classmethod
    def parse(cls, text: str) -> "TargetPolicy":
        t = text.strip().lower().replace("-", "_")
        if t.startswith("horizon:"):
            return cls("horizon", int(t.split(":", 1)[1]))
        return cls(t)

    def __str__(self) -> str:
        if self.kind == "horizon":
            return f"horizon:{self.horizon}"
        return self.kind.replace("_", "-")


@dataclass(frozen=True)
class TraceConfig:
    lam: float = DEFAULT_LAMBDA
    target_policy: TargetPolicy = TargetPolicy()
    feature_weights: WeightScheme | None = None

    def __post_init__(self):
        lam = float(self.lam)
        if not 0.0 <= lam <= 1.0:
            raise InvalidLambda(f"lambda must lie in [0, 1], got {lam}")
        object.__setattr__(self, "lam", lam)

    def weights_for(self, features: Sequence[str], dim: int) -> np.ndarray:
        """Weights scaled to sum to one, equal when no scheme is configured."""
        if self.feature_weights is None:
            return np.full(dim, 1.0 / dim)
        if len(features) != dim:
            raise MissingWeight("feature names are required to apply a weight scheme")
        w = self.feature_weights.vector(features)
        return w / w.sum()

    def as_dict(self, normalization: bool = True) -> dict:
        return {
            "method": Method.TRACE.value,
            "lambda": self.lam,
            "target_policy": str(self.target_policy),
            "weights": None if self.feature_weights is None else self.feature_weights.as_dict(),
            "normalization": normalization,
        }


@dataclass(frozen=True, eq=False)
class TrajectoryState:
    year: int
    x: np.ndarray
    x_target: np.ndarray
    features: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        t = np.asarray(self.x_target, dtype=np.float64).reshape(-1)
        if x.shape != t.shape or x.size == 0:
            raise DimensionMismatch(f"state and target dimensions differ: {x.size} vs {t.size}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_target", t)
        object.__setattr__(self, "features", tuple(self.features))


@dataclass(frozen=True)
class TraceResult:
    steps: list[tuple[int, float]]
    mean: float
    config_fingerprint: str
    angle: np.ndarray = field(repr=False, default=None)
    distance: np.ndarray = field(repr=False, default=None)


def step_components(
    prev_x: np.ndarray,
    prev_target: np.ndarray,
    curr_x: np.ndarray,
    curr_target: np.ndarray,
    w: np.ndarray,
) -> tuple[float, float]:
    """Angle and distance metrics for one step; ``w`` must sum to one."""
    step = curr_x - prev_x
    goal = curr_target - prev_x
    if not np.any(step * w) or not np.any(goal * w):
        # stationary observation, or already on target: no direction to score
        angle = 0.0
    else:
        # cosine is scale-free; rescaling keeps tiny vectors out of underflow
        step = step / np.max(np.abs(step))
        goal = goal / np.max(np.abs(goal))
        ss = float(np.sum(w * step * step))
        gg = float(np.sum(w * goal * goal))
        angle = float(np.sum(w * step * goal)) / np.sqrt(ss * gg)
        angle = min(1.0, max(-1.0, angle))

    d_prev = float(np.sqrt(np.sum(w * (prev_x - prev_target) ** 2)))
    d_curr = float(np.sqrt(np.sum(w * (curr_x - curr_target) ** 2)))
    if d_prev + d_curr == 0.0:
        distance = 1.0
    else:
        distance = min(1.0, max(-1.0, (d_prev - d_curr) / (d_prev + d_curr)))
    return angle, distance


def combine(lam: float, angle, distance):
    return lam * angle + (1.0 - lam) * distance


def step_score(prev: TrajectoryState, curr: TrajectoryState, cfg: TraceConfig) -> float:
    if not prev.year < curr.year:
        raise ValueError(f"steps must move forward in time: {prev.year} -> {curr.year}")
    if prev.x.size != curr.x.size:
        raise DimensionMismatch(f"consecutive states differ in dimension: {prev.x.size} vs {curr.x.size}")
    if prev.features and curr.features and prev.features != curr.features:
        raise DimensionMismatch("consecutive states use different feature orderings")
    w = cfg.weights_for(curr.features or prev.features, curr.x.size)
    angle, distance = step_components(prev.x, prev.x_target, curr.x, curr.x_target, w)
    return float(combine(cfg.lam, angle, distance))


def _targets(pair: AlignedPair, years: np.ndarray, proj: np.ndarray, policy: TargetPolicy) -> np.ndarray:
    if policy.kind == "same_year":
        return proj
    if policy.kind == "next_year":
        gap = years[-1] - years[-2]
        lookup = np.append(years[1:], years[-1] + gap)
    else:
        lookup = np.full(len(years), policy.horizon)
    out = np.empty_like(proj)
    for j, fp in enumerate(pair.features.values()):
        out[:, j] = resample_projection(fp.source, lookup).values
    return out


def trajectory_components(pair: AlignedPair, cfg: TraceConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-step (years, angle, distance) over the years shared by all features."""
    years, obs, proj = pair.matrices()
    if len(years) < 2:
        raise InsufficientYears(
            f"{pair.region}/{pair.scenario.value}: need at least 2 common years, have {len(years)}"
        )
    targets = _targets(pair, years, proj, cfg.target_policy)
    w = cfg.weights_for(pair.feature_names, obs.shape[1])
    angle = np.empty(len(years) - 1)
    distance = np.empty(len(years) - 1)
    for k in range(1, len(years)):
        angle[k - 1], distance[k - 1] = step_components(obs[k - 1], targets[k - 1], obs[k], targets[k], w)
    return years[1:], angle, distance


def trace_trajectory(pair: AlignedPair, cfg: TraceConfig, normalization: bool = True) -> TraceResult:
    years, angle, distance = trajectory_components(pair, cfg)
    scores = combine(cfg.lam, angle, distance)
    mean = min(1.0, max(-1.0, float(np.mean(scores))))
    return TraceResult(
        steps=list(zip(years.tolist(), scores.tolist())),
        mean=mean,
        config_fingerprint=fingerprint(cfg.as_dict(normalization)),
        angle=angle,
        distance=distance,
    )


def trace_matrix(pairs: Sequence[AlignedPair], cfg: TraceConfig, normalization: bool = True) -> ScoreMatrix:
    entries = {(p.region, p.scenario): trace_trajectory(p, cfg, normalization).mean for p in pairs}
    return ScoreMatrix(Method.TRACE, entries, fingerprint(cfg.as_dict(normalization)))


def _spearman(a: np.ndarray, b: np.ndarray) -> float:
    ra, rb = rankdata(a), rankdata(b)
    if np.ptp(ra) == 0 or np.ptp(rb) == 0:
        return float("nan")
    return float(np.corrcoef(ra, rb)[0, 1])


def lambda_correlations(
    pairs: Sequence[AlignedPair], reference: ScoreMatrix, cfg: TraceConfig = TraceConfig(), grid=LAMBDA_GRID
) -> dict[float, float]:
    """Spearman correlation with ``reference`` for every λ on ``grid``.

    Lower-is-better references are negated first so that agreement always
    shows up as positive correlation. Undefined correlations are NaN.
    """
    if not pairs:
        raise EmptyInput("no aligned pairs to calibrate on")
    keys = [(p.region, p.scenario) for p in pairs]
    missing = [k for k in keys if k not in reference.entries]
    if missing:
        raise CoverageMismatch(f"reference lacks entries for {missing[0][0]}/{missing[0][1].value}")
    ref = np.array([reference.entries[k] for k in keys])
    if reference.orientation is Orientation.LOWER_BETTER:
        ref = -ref
    comps = [trajectory_components(p, cfg) for p in pairs]
    out = {}
    for lam in grid:
        means = np.array([np.mean(combine(lam, a, d)) for _, a, d in comps])
        out[lam] = _spearman(means, ref)
    return out


def calibrate_lambda(
    pairs: Sequence[AlignedPair], reference: ScoreMatrix, cfg: TraceConfig = TraceConfig(), grid=LAMBDA_GRID
) -> float:
    """Grid λ maximising rank agreement with ``reference``.

    Ties (within 1e-12) and the all-undefined case resolve to the λ closest
    to the default 0.9, preferring the larger λ when two are equally close.
    """
    corr = lambda_correlations(pairs, reference, cfg, grid)
    defined = {lam: c for lam, c in corr.items() if not np.isnan(c)}
    if not defined:
        candidates = list(corr)
    else:
        best = max(defined.values())
        candidates = [lam for lam, c in defined.items() if c >= best - 1e-12]
    return min(candidates, key=lambda lam: (abs(lam - DEFAULT_LAMBDA), -lam))

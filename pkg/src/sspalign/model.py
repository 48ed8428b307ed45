"""Shared domain types, dataset validation and pooled-projection normalization."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AllZeroWeights,
    MissingCoverage,
    MissingStats,
    MissingWeight,
    NegativeWeight,
    OrientationError,
    UnknownScenario,
)

STD_FLOOR = 1e-9


class Group(str, enum.Enum):
    ECONOMIC = "economic"
    ENVIRONMENTAL = "environmental"
    OTHER = "other"


# Group membership of the five indicators used in the reference study.
CANONICAL_GROUPS = {
    "temperature": Group.ENVIRONMENTAL,
    "precipitation": Group.ENVIRONMENTAL,
    "methane": Group.ENVIRONMENTAL,
    "population": Group.ECONOMIC,
    "gdp": Group.ECONOMIC,
}


class Scenario(str, enum.Enum):
    SSP1 = "SSP1"
    SSP2 = "SSP2"
    SSP3 = "SSP3"
    SSP4 = "SSP4"
    SSP5 = "SSP5"

    @classmethod
    def parse(cls, label: str, line: int | None = None) -> "Scenario":
        try:
            return cls(label.strip().upper())
        except ValueError:
            raise UnknownScenario(f"unknown scenario {label!r}", line) from None


SCENARIOS: tuple[Scenario, ...] = tuple(Scenario)


class Method(str, enum.Enum):
    NORM = "norm"
    TRACE = "trace"
    CLASSIFIER = "classifier"
    ENSEMBLE = "ensemble"


class Orientation(str, enum.Enum):
    LOWER_BETTER = "lower_better"
    HIGHER_BETTER = "higher_better"


ORIENTATION_OF = {
    Method.NORM: Orientation.LOWER_BETTER,
    Method.TRACE: Orientation.HIGHER_BETTER,
    Method.CLASSIFIER: Orientation.HIGHER_BETTER,
    Method.ENSEMBLE: Orientation.HIGHER_BETTER,
}


def fingerprint(payload) -> str:
    """Stable short digest of a JSON-serialisable payload."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Window:
    """Inclusive calendar-year range."""

    start: int = 2015
    end: int = 2022

    @classmethod
    def parse(cls, text: str) -> "Window":
        lo, sep, hi = text.partition(":")
        if not sep:
            raise ValueError(f"window must look like START:END, got {text!r}")
        return cls(int(lo), int(hi))

    def __contains__(self, year) -> bool:
        return self.start <= year <= self.end

    def __str__(self) -> str:
        return f"{self.start}:{self.end}"

    @property
    def empty(self) -> bool:
        return self.end < self.start


@dataclass(frozen=True)
class FeatureKey:
    name: str
    unit: str = ""
    group: Group = Group.OTHER

    def __post_init__(self):
        if not self.name:
            raise ValueError("feature name must be nonempty")
        object.__setattr__(self, "group", Group(self.group))


def feature_key(name: str, unit: str = "") -> FeatureKey:
    """Build a key for ``name``, inferring the group for canonical indicators."""
    name = name.strip().lower()
    return FeatureKey(name, unit, CANONICAL_GROUPS.get(name, Group.OTHER))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Yearly samples of one feature.

    Construction does not enforce the ordering and finiteness invariants so
    that malformed data can be reported by :func:`validate_dataset`; use
    :meth:`violations` to check them.
    """

    feature: FeatureKey
    years: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        years = _frozen(np.array(self.years, dtype=np.int64).reshape(-1))
        values = _frozen(np.array(self.values, dtype=np.float64).reshape(-1))
        if years.shape != values.shape:
            raise ValueError("years and values must have equal length")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_points(cls, feature, points: Iterable[tuple[int, float]]) -> "TimeSeries":
        if isinstance(feature, str):
            feature = feature_key(feature)
        pts = list(points)
        return cls(feature, [p[0] for p in pts], [p[1] for p in pts])

    def __len__(self) -> int:
        return len(self.years)

    def points(self) -> list[tuple[int, float]]:
        return list(zip(self.years.tolist(), self.values.tolist()))

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(self.feature, self.years, values)

    def restrict(self, window: Window) -> "TimeSeries":
        mask = (self.years >= window.start) & (self.years <= window.end)
        return TimeSeries(self.feature, self.years[mask], self.values[mask])

    def violations(self) -> list[tuple[str, str]]:
        """Return ``(rule, message)`` pairs for every broken invariant."""
        out = []
        if len(self.years) == 0:
            out.append(("empty-series", "series has no points"))
        diffs = np.diff(self.years)
        for i in np.flatnonzero(diffs == 0):
            out.append(("duplicate-year", f"year {int(self.years[i])} appears more than once"))
        for i in np.flatnonzero(diffs < 0):
            out.append(
                (
                    "unordered-years",
                    f"year {int(self.years[i + 1])} follows {int(self.years[i])}",
                )
            )
        for i in np.flatnonzero(~np.isfinite(self.values)):
            out.append(
                ("non-finite-value", f"value at year {int(self.years[i])} is {self.values[i]}")
            )
        return out


@dataclass(frozen=True)
class Violation:
    region: str
    feature: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.region}/{self.feature}: {self.rule}: {self.message}"


@dataclass(frozen=True)
class RegionDataset:
    region: str
    series: Mapping[str, TimeSeries]

    @property
    def features(self) -> list[str]:
        return sorted(self.series)


@dataclass(frozen=True)
class ScenarioProjection:
    scenario: Scenario
    region: str
    series: Mapping[str, TimeSeries]

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))


def validate_dataset(d: RegionDataset | ScenarioProjection) -> list[Violation]:
    """List every invariant violation in ``d``; empty means well formed."""
    out = []
    for name in sorted(d.series):
        ts = d.series[name]
        if ts.feature.name != name:
            out.append(
                Violation(d.region, name, "feature-key-mismatch", f"series is keyed as {name!r} but holds {ts.feature.name!r}")
            )
        for rule, message in ts.violations():
            out.append(Violation(d.region, name, rule, message))
    return out


@dataclass(frozen=True)
class WeightScheme:
    """Nonnegative per-feature weights keyed by feature name."""

    weights: Mapping[str, float]

    def __post_init__(self):
        clean = {}
        for name, w in self.weights.items():
            w = float(w)
            if not math.isfinite(w) or w < 0:
                raise NegativeWeight(f"weight for {name!r} must be finite and nonnegative, got {w}")
            clean[name] = w
        object.__setattr__(self, "weights", dict(sorted(clean.items())))

    @classmethod
    def equal(cls, features: Iterable[str]) -> "WeightScheme":
        return cls({f: 1.0 for f in features})

    def vector(self, features: Sequence[str]) -> np.ndarray:
        """Weights for ``features`` in order; missing entries are an error."""
        missing = [f for f in features if f not in self.weights]
        if missing:
            raise MissingWeight(f"no weight for feature(s): {', '.join(missing)}")
        w = np.array([self.weights[f] for f in features], dtype=np.float64)
        if not np.any(w > 0):
            raise AllZeroWeights(f"all weights are zero for features: {', '.join(features)}")
        return w

    def as_dict(self) -> dict[str, float]:
        return dict(self.weights)


@dataclass(frozen=True)
class NormalizationStats:
    entries: Mapping[tuple[str, str], tuple[float, float]]
    source: str = "pooled_projections"

    def __post_init__(self):
        if self.source not in ("pooled_projections", "external"):
            raise ValueError(f"unknown normalization source {self.source!r}")
        fixed = {k: (float(m), max(float(s), STD_FLOOR)) for k, (m, s) in self.entries.items()}
        object.__setattr__(self, "entries", fixed)

    def get(self, region: str, feature: str) -> tuple[float, float]:
        try:
            return self.entries[(region, feature)]
        except KeyError:
            raise MissingStats(f"no normalization statistics for region {region!r}, feature {feature!r}") from None


def compute_normalization(
    projections: Sequence[ScenarioProjection], window: Window
) -> NormalizationStats:
    """Pool projection values of all scenarios inside ``window``.

    Mean and population standard deviation are computed per (region,
    feature); the deviation is floored at ``STD_FLOOR``.
    """
    if window.empty:
        raise MissingCoverage(f"empty window {window}")
    pooled: dict[tuple[str, str], list[np.ndarray]] = {}
    for proj in projections:
        for name, ts in proj.series.items():
            pooled.setdefault((proj.region, name), []).append(ts.restrict(window).values)
    if not pooled:
        raise MissingCoverage("no projections supplied")
    entries = {}
    for key, chunks in sorted(pooled.items()):
        values = np.concatenate(chunks)
        if values.size == 0:
            raise MissingCoverage(
                f"no projection values for region {key[0]!r}, feature {key[1]!r} in window {window}"
            )
        entries[key] = (float(values.mean()), float(values.std()))
    return NormalizationStats(entries)


def normalize(series: TimeSeries, stats: NormalizationStats, region: str) -> TimeSeries:
    mean, std = stats.get(region, series.feature.name)
    return series.with_values((series.values - mean) / std)


def denormalize(series: TimeSeries, stats: NormalizationStats, region: str) -> TimeSeries:
    mean, std = stats.get(region, series.feature.name)
    return series.with_values(series.values * std + mean)


@dataclass(frozen=True)
class ScoreMatrix:
    """Scores per (region, scenario) for one method.

    The orientation is fixed by the method; passing a conflicting one is an
    error rather than a silent override.
    """

    method: Method
    entries: Mapping[tuple[str, Scenario], float]
    config_fingerprint: str = ""
    orientation: Orientation | None = None

    def __post_init__(self):
        method = Method(self.method)
        expected = ORIENTATION_OF[method]
        orientation = expected if self.orientation is None else Orientation(self.orientation)
        if orientation is not expected:
            raise OrientationError(f"{method.value} scores must be {expected.value}")
        entries = {}
        for (region, scenario), v in self.entries.items():
            v = float(v)
            if not math.isfinite(v):
                raise ValueError(f"non-finite score for {region}/{scenario}")
            entries[(region, Scenario(scenario))] = v
        object.__setattr__(self, "method", method)
        object.__setattr__(self, "orientation", orientation)
        object.__setattr__(self, "entries", dict(sorted(entries.items(), key=lambda kv: (kv[0][0], kv[0][1].value))))

    @property
    def regions(self) -> list[str]:
        return sorted({r for r, _ in self.entries})

    def row(self, region: str) -> dict[Scenario, float]:
        return {s: v for (r, s), v in self.entries.items() if r == region}

    def best(self, region: str) -> Scenario:
        """Best-aligned scenario for ``region`` under this matrix's orientation."""
        row = self.row(region)
        pick = min if self.orientation is Orientation.LOWER_BETTER else max
        return pick(row, key=row.__getitem__)

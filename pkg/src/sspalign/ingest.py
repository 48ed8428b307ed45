"""CSV ingestion, canonical serialization, projection resampling and pairing."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateKey,
    ExtrapolationRequired,
    InputError,
    MalformedHeader,
    MalformedRow,
    MissingCoverage,
    MissingFeature,
    NonFiniteValue,
    UnparseableNumber,
)
from .model import (
    Group,
    NormalizationStats,
    RegionDataset,
    Scenario,
    ScenarioProjection,
    TimeSeries,
    WeightScheme,
    Window,
    compute_normalization,
    feature_key,
    normalize,
)

OBSERVATION_HEADER = ("region", "feature", "year", "value")
PROJECTION_HEADER = ("scenario", "region", "feature", "year", "value")

_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_INTEGER = re.compile(r"^[+-]?\d+$")
_NON_FINITE_WORDS = {"nan", "inf", "infinity"}


def format_value(v: float) -> str:
    """Fixed 6-decimal rendering used by every emitted artifact."""
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _decode(data: bytes | str) -> str:
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    elif data.startswith("﻿"):
        data = data[1:]
    return data


def _parse_float(text: str, line: int) -> float:
    t = text.strip()
    if t.lstrip("+-").lower() in _NON_FINITE_WORDS:
        raise NonFiniteValue(f"non-finite value {text!r}", line)
    if not _DECIMAL.match(t):
        raise UnparseableNumber(f"cannot parse number {text!r}", line)
    v = float(t)
    if not math.isfinite(v):
        raise NonFiniteValue(f"value {text!r} overflows to {v}", line)
    return v


def _parse_year(text: str, line: int) -> int:
    t = text.strip()
    if not _INTEGER.match(t):
        raise UnparseableNumber(f"cannot parse year {text!r}", line)
    return int(t)


@dataclass
class Scan:
    rows: list[tuple[int, tuple]] = field(default_factory=list)
    issues: list[InputError] = field(default_factory=list)


def _scan(data: bytes | str, header: tuple[str, ...]) -> Scan:
    """Read every row, collecting issues instead of stopping at the first."""
    out = Scan()
    reader = csv.reader(io.StringIO(_decode(data), newline=""))
    try:
        first = next(reader)
    except StopIteration:
        out.issues.append(MalformedHeader("file is empty", 1))
        return out
    if tuple(c.strip() for c in first) != header:
        out.issues.append(
            MalformedHeader(f"expected header {','.join(header)!r}, got {','.join(first)!r}", reader.line_num)
        )
        return out
    seen: dict[tuple, int] = {}
    n_key = len(header) - 1
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            out.issues.append(MalformedRow(f"expected {len(header)} fields, got {len(row)}", line))
            continue
        try:
            labels = [c.strip() for c in row[: n_key - 1]]
            if header[0] == "scenario":
                labels[0] = Scenario.parse(labels[0], line).value
            if not all(labels):
                raise MalformedRow("empty identifier field", line)
            labels[-1] = labels[-1].lower()
            year = _parse_year(row[n_key - 1], line)
            value = _parse_float(row[n_key], line)
        except InputError as exc:
            out.issues.append(exc)
            continue
        key = (*labels, year)
        if key in seen:
            out.issues.append(
                DuplicateKey(f"duplicate key {key} (first seen on line {seen[key]})", line)
            )
            continue
        seen[key] = line
        out.rows.append((line, (*key, value)))
    return out


def scan_observations(data: bytes | str) -> Scan:
    """Rows and every row-level problem of an observations file, in file order."""
    return _scan(data, OBSERVATION_HEADER)


def scan_projections(data: bytes | str) -> Scan:
    return _scan(data, PROJECTION_HEADER)


def _group_series(rows) -> dict[str, TimeSeries]:
    by_feature: dict[str, list[tuple[int, float]]] = {}
    for feature, year, value in rows:
        by_feature.setdefault(feature, []).append((year, value))
    return {
        f: TimeSeries.from_points(feature_key(f), sorted(pts)) for f, pts in sorted(by_feature.items())
    }


def parse_observations(data: bytes | str) -> list[RegionDataset]:
    """Parse ``region,feature,year,value`` CSV into datasets sorted by region.

    Raises the first row-level :class:`~sspalign.errors.InputError`
    encountered; its ``line`` attribute holds the offending line number.
    """
    scan = _scan(data, OBSERVATION_HEADER)
    if scan.issues:
        raise scan.issues[0]
    by_region: dict[str, list] = {}
    for _, (region, feature, year, value) in scan.rows:
        by_region.setdefault(region, []).append((feature, year, value))
    return [RegionDataset(r, _group_series(rows)) for r, rows in sorted(by_region.items())]


def parse_projections(data: bytes | str) -> list[ScenarioProjection]:
    """Parse ``scenario,region,feature,year,value`` CSV.

    Output is sorted by (scenario, region).
    """
    scan = _scan(data, PROJECTION_HEADER)
    if scan.issues:
        raise scan.issues[0]
    groups: dict[tuple[str, str], list] = {}
    for _, (scenario, region, feature, year, value) in scan.rows:
        groups.setdefault((scenario, region), []).append((feature, year, value))
    return [
        ScenarioProjection(Scenario(s), r, _group_series(rows)) for (s, r), rows in sorted(groups.items())
    ]


def _write_rows(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def serialize_observations(datasets: Sequence[RegionDataset]) -> str:
    """Canonical CSV: rows sorted by (region, feature, year), 6-decimal values."""
    rows = []
    for d in sorted(datasets, key=lambda d: d.region):
        for name in sorted(d.series):
            for year, value in d.series[name].points():
                rows.append((d.region, name, year, format_value(value)))
    return _write_rows(OBSERVATION_HEADER, rows)


def serialize_projections(projections: Sequence[ScenarioProjection]) -> str:
    rows = []
    for p in sorted(projections, key=lambda p: (p.scenario.value, p.region)):
        for name in sorted(p.series):
            for year, value in p.series[name].points():
                rows.append((p.scenario.value, p.region, name, year, format_value(value)))
    return _write_rows(PROJECTION_HEADER, rows)


def resample_projection(p: TimeSeries, target_years) -> TimeSeries:
    """Linearly interpolate ``p`` onto ``target_years``.

    Target years that coincide with projection years take the projection
    value verbatim. Any target outside the projection's span raises
    :class:`ExtrapolationRequired`.
    """
    targets = np.asarray(target_years, dtype=np.int64).reshape(-1)
    if len(p) == 0:
        raise ExtrapolationRequired(f"projection for {p.feature.name!r} is empty")
    lo, hi = int(p.years[0]), int(p.years[-1])
    outside = targets[(targets < lo) | (targets > hi)]
    if outside.size:
        raise ExtrapolationRequired(
            f"year {int(outside[0])} outside projection coverage {lo}-{hi} for {p.feature.name!r}"
        )
    idx = np.searchsorted(p.years, targets, side="left")
    values = np.empty(targets.shape, dtype=np.float64)
    for k, (t, i) in enumerate(zip(targets, idx)):
        if p.years[i] == t:
            values[k] = p.values[i]
        else:
            x0, x1 = p.years[i - 1], p.years[i]
            y0, y1 = p.values[i - 1], p.values[i]
            frac = (t - x0) / (x1 - x0)
            values[k] = y0 + frac * (y1 - y0)
    return TimeSeries(p.feature, targets, values)


@dataclass(frozen=True)
class FeaturePair:
    """Observation and projection on one shared year grid.

    ``source`` keeps the projection on its native grid (normalized alongside
    the pair) so target policies can look ahead of the observation grid.
    """

    observation: TimeSeries
    projection: TimeSeries
    source: TimeSeries | None = None

    def __post_init__(self):
        if not np.array_equal(self.observation.years, self.projection.years):
            raise ValueError(
                f"observation and projection grids differ for {self.observation.feature.name!r}"
            )
        if self.source is None:
            object.__setattr__(self, "source", self.projection)

    @property
    def years(self) -> np.ndarray:
        return self.observation.years

    @property
    def errors(self) -> np.ndarray:
        return self.observation.values - self.projection.values


@dataclass(frozen=True)
class AlignedPair:
    region: str
    scenario: Scenario
    features: Mapping[str, FeaturePair]

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "features", dict(sorted(self.features.items())))

    @property
    def feature_names(self) -> list[str]:
        return list(self.features)

    def common_years(self) -> np.ndarray:
        grids = [fp.years for fp in self.features.values()]
        if not grids:
            return np.array([], dtype=np.int64)
        common = grids[0]
        for g in grids[1:]:
            common = np.intersect1d(common, g)
        return common

    def matrices(self, years=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(years, obs, proj) with obs/proj shaped (n_years, n_features).

        Defaults to the years shared by every feature.
        """
        years = self.common_years() if years is None else np.asarray(years)
        obs = np.empty((len(years), len(self.features)))
        proj = np.empty_like(obs)
        for j, fp in enumerate(self.features.values()):
            idx = np.searchsorted(fp.years, years)
            obs[:, j] = fp.observation.values[idx]
            proj[:, j] = fp.projection.values[idx]
        return years, obs, proj


def build_aligned_pairs(
    obs: RegionDataset,
    projections: Sequence[ScenarioProjection],
    window: Window = Window(),
    normalization: bool = True,
    stats: NormalizationStats | None = None,
) -> list[AlignedPair]:
    """Pair a region's observations with every scenario projected for it.

    Observations are restricted to ``window``; projections are resampled onto
    each feature's observation years. With ``normalization`` on, both sides
    are z-scored with pooled-projection statistics (computed here from
    ``projections`` unless ``stats`` is given).
    """
    mine = sorted((p for p in projections if p.region == obs.region), key=lambda p: p.scenario.value)
    if not mine:
        raise MissingCoverage(f"no projections for region {obs.region!r}")
    if normalization and stats is None:
        stats = compute_normalization(mine, window)

    restricted = {}
    for name in obs.features:
        ts = obs.series[name].restrict(window)
        if len(ts) == 0:
            raise MissingCoverage(f"region {obs.region!r} has no {name!r} observations in window {window}")
        restricted[name] = ts

    pairs = []
    for proj in mine:
        features = {}
        for name, ots in restricted.items():
            if name not in proj.series:
                raise MissingFeature(
                    f"scenario {proj.scenario.value} lacks feature {name!r} for region {obs.region!r}"
                )
            source = proj.series[name]
            try:
                pts = resample_projection(source, ots.years)
            except ExtrapolationRequired as exc:
                raise MissingCoverage(f"{proj.scenario.value}/{obs.region}: {exc}") from None
            if normalization:
                ots_n = normalize(ots, stats, obs.region)
                pts = normalize(pts, stats, obs.region)
                source = normalize(source, stats, obs.region)
            else:
                ots_n = ots
            features[name] = FeaturePair(ots_n, pts, source)
        pairs.append(AlignedPair(obs.region, proj.scenario, features))
    return pairs


def parse_weights(data: bytes | str, features: Sequence[str]) -> WeightScheme:
    """Read a ``feature,weight`` (or ``group,weight``) CSV for ``features``.

    Rows keyed by a group label (economic, environmental, other) apply to
    every member feature; rows keyed by a feature name take precedence.
    Features not covered are left out, so scoring raises ``MissingWeight``.
    """
    reader = csv.reader(io.StringIO(_decode(data), newline=""))
    try:
        first = [c.strip() for c in next(reader)]
    except StopIteration:
        raise MalformedHeader("weights file is empty", 1) from None
    if first not in (["feature", "weight"], ["group", "weight"]):
        raise MalformedHeader(f"expected header 'feature,weight' or 'group,weight', got {','.join(first)!r}", 1)
    groups = {g.value for g in Group}
    group_w: dict[str, float] = {}
    feature_w: dict[str, float] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise MalformedRow(f"expected 2 fields, got {len(row)}", line)
        key = row[0].strip().lower()
        target = group_w if key in groups else feature_w
        if key in target:
            raise DuplicateKey(f"duplicate weight for {key!r}", line)
        target[key] = _parse_float(row[1], line)
    out = {}
    for f in features:
        if f in feature_w:
            out[f] = feature_w[f]
        elif feature_key(f).group.value in group_w:
            out[f] = group_w[feature_key(f).group.value]
    return WeightScheme(out)


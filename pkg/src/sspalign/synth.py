"""Synthetic observation/projection fixtures with a known generating scenario."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .ingest import resample_projection
from .model import (
    SCENARIOS,
    RegionDataset,
    Scenario,
    ScenarioProjection,
    TimeSeries,
    Window,
    compute_normalization,
    feature_key,
)

# name -> (2015 level, yearly scale)
FEATURES = {
    "temperature": (25.0, 0.05),
    "precipitation": (1500.0, 20.0),
    "methane": (1900.0, 15.0),
    "population": (200.0, 2.5),
    "gdp": (2000.0, 60.0),
}


def make_projections(
    regions: Sequence[str],
    rng: np.random.Generator,
    years: Sequence[int] = tuple(range(2015, 2023)),
    features: Sequence[str] = tuple(FEATURES),
) -> list[ScenarioProjection]:
    """Scenario trajectories that share a 2015 level and then diverge.

    Every (region, scenario, feature) gets its own random slope and mild
    curvature, so scenarios move in distinct directions in feature space.
    """
    years = np.asarray(years)
    tau = years - years[0]
    out = []
    for region in regions:
        level = {f: FEATURES.get(f, (100.0, 1.0))[0] * rng.uniform(0.8, 1.2) for f in features}
        for scenario in SCENARIOS:
            series = {}
            for f in features:
                scale = FEATURES.get(f, (100.0, 1.0))[1]
                slope, curve = rng.normal(), rng.normal(scale=0.05)
                series[f] = TimeSeries(feature_key(f), years, level[f] + scale * (slope * tau + curve * tau**2))
            out.append(ScenarioProjection(scenario, region, series))
    return out


def make_observations(
    projections: Sequence[ScenarioProjection],
    truth: dict[str, Scenario],
    rng: np.random.Generator,
    sigma: float = 0.1,
    window: Window = Window(),
) -> list[RegionDataset]:
    """Observations following ``truth[region]`` plus Gaussian noise.

    ``sigma`` is in normalized units: noise for each feature is scaled by
    its pooled-projection standard deviation over ``window``.
    """
    stats = compute_normalization(projections, window)
    years = np.arange(window.start, window.end + 1)
    out = []
    for region, scenario in sorted(truth.items()):
        proj = next(p for p in projections if p.region == region and p.scenario is Scenario(scenario))
        series = {}
        for name, ts in proj.series.items():
            base = resample_projection(ts, years).values
            _, std = stats.get(region, name)
            series[name] = TimeSeries(ts.feature, years, base + sigma * std * rng.normal(size=len(years)))
        out.append(RegionDataset(region, series))
    return out

from pathlib import Path

import numpy as np
import pytest

from sspalign.ingest import AlignedPair, FeaturePair
from sspalign.model import TimeSeries, feature_key

DATA = Path(__file__).parent / "data"


def make_pair(obs, proj, region="R", scenario="SSP1", years=None):
    """AlignedPair from ``{feature: values}`` dicts.

    ``years`` is either one grid shared by every feature or a dict of
    per-feature grids; the default grid starts at 2015.
    """
    features = {}
    for name, u in obs.items():
        if isinstance(years, dict):
            grid = years[name]
        elif years is None:
            grid = list(range(2015, 2015 + len(u)))
        else:
            grid = years
        key = feature_key(name)
        features[name] = FeaturePair(TimeSeries(key, grid, u), TimeSeries(key, grid, proj[name]))
    return AlignedPair(region, scenario, features)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def golden_dir():
    return DATA / "golden"


GOLDEN = DATA / "golden"
GOLDEN_EXPECTED = GOLDEN / "expected"
GOLDEN_ARGS = ["score", "--method", "all", "--obs", "observations.csv", "--proj", "projections.csv"]


def run_golden(out_dir, monkeypatch):
    """Score the bundled fixture with defaults from inside its directory.

    Relative input paths keep provenance.json independent of where the
    checkout lives. Returns {file name: bytes}.
    """
    from sspalign.cli import main

    monkeypatch.chdir(GOLDEN)
    assert main([*GOLDEN_ARGS, "--out", str(out_dir)]) == 0
    return {p.name: p.read_bytes() for p in sorted(Path(out_dir).iterdir())}

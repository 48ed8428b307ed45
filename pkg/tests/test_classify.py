import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_pair
from sspalign import synth
from sspalign.classify import (
    EnsembleConfig,
    classifier_matrix,
    classify,
    ensemble,
    mean_distance,
    softmax_neg,
    to_alignment_ranks,
)
from sspalign.errors import CoverageMismatch, IncompleteRegion, MissingScenario, NonPositiveTemperature
from sspalign.ingest import build_aligned_pairs
from sspalign.model import SCENARIOS, Method, RegionDataset, Scenario, ScenarioProjection, ScoreMatrix, Window


def _pairs_at_offsets(offsets, region="R"):
    """One 1-feature pair per scenario with constant error ``offsets[k]``."""
    return [
        make_pair({"a": [float(d)] * 4}, {"a": [0.0] * 4}, region=region, scenario=s)
        for s, d in zip(SCENARIOS, offsets)
    ]


def test_mean_distance_weighted():
    pair = make_pair({"a": [3.0, 0.0], "b": [4.0, 0.0]}, {"a": [0.0, 0.0], "b": [0.0, 0.0]})
    # equal weights 1/2: sqrt((9 + 16) / 2) in year one, zero in year two
    assert mean_distance(pair) == pytest.approx(np.sqrt(12.5) / 2, abs=1e-15)


def test_equidistant_is_uniform():
    res = classify(_pairs_at_offsets([1.5] * 5))
    for p in res.probs.values():
        assert abs(p - 0.2) <= 1e-12


def test_exact_match_dominates():
    temperature = 0.7
    offsets = [10 * temperature, 12 * temperature, 0.0, 10 * temperature, 15 * temperature]
    res = classify(_pairs_at_offsets(offsets), temperature)
    assert res.probs[Scenario.SSP3] > 0.99
    assert res.best() is Scenario.SSP3


def test_classify_errors():
    with pytest.raises(MissingScenario):
        classify(_pairs_at_offsets([1.0] * 5)[:4])
    with pytest.raises(NonPositiveTemperature):
        classify(_pairs_at_offsets([1.0] * 5), temperature=0.0)


@settings(max_examples=200)
@given(st.lists(st.floats(0, 1e3), min_size=5, max_size=5), st.floats(0.01, 100), st.floats(-1e3, 1e3))
def test_softmax_sums_to_one_and_shift_invariant(d, temperature, shift):
    p = softmax_neg(d, temperature)
    assert abs(p.sum() - 1.0) <= 1e-9
    assert np.all((p >= 0) & (p <= 1))
    q = softmax_neg(np.array(d) + shift, temperature)
    np.testing.assert_allclose(p, q, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("scale", [1e-3, 7.0, 1e4])
def test_argmax_invariant_to_common_scale(seed, scale):
    rng = np.random.default_rng(seed)
    projections = synth.make_projections(["R"], rng)
    (obs,) = synth.make_observations(projections, {"R": SCENARIOS[seed]}, rng, sigma=0.3)
    best = classify(build_aligned_pairs(obs, projections, Window())).best()

    scaled_proj = [
        ScenarioProjection(p.scenario, p.region, {k: ts.with_values(ts.values * scale) for k, ts in p.series.items()})
        for p in projections
    ]
    scaled_obs = RegionDataset("R", {k: ts.with_values(ts.values * scale) for k, ts in obs.series.items()})
    assert classify(build_aligned_pairs(scaled_obs, scaled_proj, Window())).best() is best


def _matrix(method, rows):
    entries = {}
    for region, values in rows.items():
        entries.update({(region, s): v for s, v in zip(SCENARIOS, values)})
    return ScoreMatrix(method, entries)


def test_ranks_lower_better_with_ties():
    m = _matrix(Method.NORM, {"R": [0.2, 0.5, 0.5, 0.9, 0.1]})
    ranks = {s.value: r for (_, s), r in to_alignment_ranks(m).items()}
    assert ranks == {"SSP5": 1.0, "SSP1": 2.0, "SSP2": 3.5, "SSP3": 3.5, "SSP4": 5.0}


def test_ranks_higher_better():
    m = _matrix(Method.TRACE, {"R": [0.9, 0.5, 0.1, -0.2, -0.7]})
    assert [to_alignment_ranks(m)[("R", s)] for s in SCENARIOS] == [1.0, 2.0, 3.0, 4.0, 5.0]


def test_ranks_full_tie():
    m = _matrix(Method.TRACE, {"R": [0.3] * 5})
    assert set(to_alignment_ranks(m).values()) == {3.0}


def test_ranks_incomplete_region():
    m = ScoreMatrix(Method.NORM, {("R", Scenario.SSP1): 0.1})
    with pytest.raises(IncompleteRegion):
        to_alignment_ranks(m)


@settings(max_examples=100)
@given(st.lists(st.floats(-50, 50), min_size=5, max_size=5))
def test_ranks_invariant_under_monotone_transform(values):
    m = _matrix(Method.NORM, {"R": values})
    t = _matrix(Method.NORM, {"R": [np.tanh(v / 100) * 3 + 1 for v in values]})
    # tanh is strictly increasing but may merge values that differ below float resolution
    if len(set(t.row("R").values())) == len(set(values)):
        assert to_alignment_ranks(m) == to_alignment_ranks(t)


def test_ensemble_agreement():
    norm = _matrix(Method.NORM, {"R": [0.4, 0.5, 0.6, 0.7, 0.1]})
    trace = _matrix(Method.TRACE, {"R": [0.1, 0.0, -0.1, -0.2, 0.8]})
    out = ensemble(EnsembleConfig([norm, trace]))
    assert out.entries[("R", Scenario.SSP5)] == 1.0
    assert out.best("R") is Scenario.SSP5
    assert out.orientation.value == "higher_better"
    assert out.method is Method.ENSEMBLE


def test_ensemble_opposed_methods():
    a = _matrix(Method.TRACE, {"R": [0.9, 0.1, 0.5, 0.5, 0.5]})
    b = _matrix(Method.TRACE, {"R": [0.1, 0.9, 0.5, 0.5, 0.5]})
    out = ensemble(EnsembleConfig([a, b]))
    assert out.entries[("R", Scenario.SSP1)] == 0.5
    assert out.entries[("R", Scenario.SSP2)] == 0.5


def test_ensemble_needs_two_and_matching_coverage():
    a = _matrix(Method.TRACE, {"R": [0.9, 0.1, 0.5, 0.5, 0.5]})
    with pytest.raises(ValueError):
        EnsembleConfig([a])
    b = _matrix(Method.TRACE, {"Q": [0.9, 0.1, 0.5, 0.5, 0.5]})
    with pytest.raises(CoverageMismatch):
        EnsembleConfig([a, b])


def test_ensemble_permutation_symmetry(rng):
    mats = [
        _matrix(m, {r: rng.normal(size=5).round(1).tolist() for r in ("A", "B", "C")})
        for m in (Method.NORM, Method.TRACE, Method.CLASSIFIER)
    ]
    outs = [ensemble(EnsembleConfig(list(p))).entries for p in itertools.permutations(mats)]
    assert all(o == outs[0] for o in outs)


def test_classifier_matrix_rows_sum_to_one(rng):
    projections = synth.make_projections(["A", "B"], rng)
    datasets = synth.make_observations(projections, {"A": Scenario.SSP1, "B": Scenario.SSP4}, rng)
    pairs = [p for d in datasets for p in build_aligned_pairs(d, projections, Window())]
    m = classifier_matrix(pairs)
    for region in m.regions:
        assert abs(sum(m.row(region).values()) - 1.0) <= 1e-9
    assert m.best("A") is Scenario.SSP1 and m.best("B") is Scenario.SSP4

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sspalign import synth
from sspalign.errors import (
    DuplicateKey,
    ExtrapolationRequired,
    MalformedHeader,
    MalformedRow,
    MissingCoverage,
    MissingFeature,
    NonFiniteValue,
    UnknownScenario,
    UnparseableNumber,
)
from sspalign.ingest import (
    build_aligned_pairs,
    format_value,
    parse_observations,
    parse_projections,
    parse_weights,
    resample_projection,
    scan_observations,
    serialize_observations,
    serialize_projections,
)
from sspalign.model import SCENARIOS, RegionDataset, Scenario, ScenarioProjection, TimeSeries, Window, feature_key

OBS_HEADER = "region,feature,year,value\n"
PROJ_HEADER = "scenario,region,feature,year,value\n"


def test_parse_observations_structure():
    text = OBS_HEADER + "B,gdp,2016,2\nA,gdp,2015,1\nA,gdp,2016,1.5\nB,gdp,2015,3\n"
    out = parse_observations(text)
    assert [d.region for d in out] == ["A", "B"]
    assert [len(d.series) for d in out] == [1, 1]
    assert out[1].series["gdp"].points() == [(2015, 3.0), (2016, 2.0)]


def test_parse_accepts_crlf_and_bytes():
    text = (OBS_HEADER + "A,GDP,2015,1.25\n").replace("\n", "\r\n").encode()
    (d,) = parse_observations(text)
    assert d.series["gdp"].values.tolist() == [1.25]


@pytest.mark.parametrize(
    "body, exc, line",
    [
        ("A,gdp,2015,1\nA,gdp,2015,2\n", DuplicateKey, 3),
        ("A,gdp,2015,1e309\n", NonFiniteValue, 2),
        ("A,gdp,2015,nan\n", NonFiniteValue, 2),
        ("A,gdp,2015,1\nA,gdp,2016,\"1,5\"\n", UnparseableNumber, 3),
        ("A,gdp,2015.5,1\n", UnparseableNumber, 2),
        ("A,gdp,2015,1_000\n", UnparseableNumber, 2),
        ("A,gdp,2015\n", MalformedRow, 2),
    ],
)
def test_parse_observation_errors_report_line(body, exc, line):
    with pytest.raises(exc) as info:
        parse_observations(OBS_HEADER + body)
    assert info.value.line == line


def test_parse_bad_header():
    with pytest.raises(MalformedHeader):
        parse_observations("region,feature,value,year\nA,gdp,1,2015\n")
    with pytest.raises(MalformedHeader):
        parse_observations("")


def test_scan_collects_all_issues():
    scan = scan_observations(OBS_HEADER + "A,gdp,2015,1\nA,gdp,2015,2\nA,gdp,2016,x\n")
    assert [type(e) for e in scan.issues] == [DuplicateKey, UnparseableNumber]


def test_parse_projection_unknown_scenario():
    with pytest.raises(UnknownScenario) as info:
        parse_projections(PROJ_HEADER + "SSP6,A,gdp,2015,1\n")
    assert info.value.line == 2


def test_parse_projections_five_scenarios():
    body = "".join(f"SSP{k},A,gdp,2015,{k}\n" for k in range(1, 6))
    out = parse_projections(PROJ_HEADER + body)
    assert [p.scenario for p in out] == list(SCENARIOS)


def test_short_projection_parses_but_pairing_fails():
    proj_text = PROJ_HEADER + "".join(f"SSP{k},A,gdp,{y},{k}\n" for k in range(1, 6) for y in (2015, 2020))
    projections = parse_projections(proj_text)
    obs_text = OBS_HEADER + "".join(f"A,gdp,{y},1\n" for y in range(2015, 2023))
    (obs,) = parse_observations(obs_text)
    with pytest.raises(MissingCoverage):
        build_aligned_pairs(obs, projections, Window(2015, 2022))


def test_resample_hand_interpolation():
    p = TimeSeries(feature_key("gdp"), [2015, 2020], [10.0, 20.0])
    out = resample_projection(p, [2015, 2017, 2020])
    assert out.values.tolist() == pytest.approx([10.0, 14.0, 20.0], abs=1e-12)


def test_resample_identity_on_grid():
    p = TimeSeries(feature_key("gdp"), [2015, 2020, 2025], [0.1, 0.7, 0.3])
    out = resample_projection(p, p.years)
    assert out.values.tolist() == p.values.tolist()


def test_resample_rejects_extrapolation():
    p = TimeSeries(feature_key("gdp"), [2015, 2020], [10.0, 20.0])
    with pytest.raises(ExtrapolationRequired):
        resample_projection(p, [2022])
    with pytest.raises(ExtrapolationRequired):
        resample_projection(p, [2014])


@settings(max_examples=100)
@given(
    st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=8),
    st.integers(1, 10),
)
def test_resample_exact_and_monotone(values, step):
    years = [2015 + step * i for i in range(len(values))]
    p = TimeSeries(feature_key("x"), years, values)
    targets = np.arange(years[0], years[-1] + 1)
    out = resample_projection(p, targets)
    on_grid = np.isin(targets, years)
    assert out.values[on_grid].tolist() == list(values)
    for i in range(len(values) - 1):
        seg = out.values[(targets >= years[i]) & (targets <= years[i + 1])]
        d = np.diff(seg)
        if values[i + 1] >= values[i]:
            assert np.all(d >= -1e-9)
        else:
            assert np.all(d <= 1e-9)


def _five_feature_world(rng, truth=Scenario.SSP3, sigma=0.1):
    projections = synth.make_projections(["A"], rng, years=range(2015, 2031, 5))
    (obs,) = synth.make_observations(projections, {"A": truth}, rng, sigma=sigma)
    return obs, projections


def test_build_aligned_pairs_structure(rng):
    obs, projections = _five_feature_world(rng)
    pairs = build_aligned_pairs(obs, projections, Window())
    assert len(pairs) == 5
    for p in pairs:
        assert len(p.features) == 5
        for fp in p.features.values():
            assert fp.years.tolist() == list(range(2015, 2023))
            assert np.array_equal(fp.observation.years, fp.projection.years)
            assert np.all(np.isfinite(fp.observation.values))
            assert np.all(np.isfinite(fp.projection.values))


def test_build_aligned_pairs_missing_feature(rng):
    obs, projections = _five_feature_world(rng)
    broken = []
    for p in projections:
        series = dict(p.series)
        if p.scenario is Scenario.SSP2:
            del series["methane"]
        broken.append(ScenarioProjection(p.scenario, p.region, series))
    with pytest.raises(MissingFeature, match="SSP2.*methane"):
        build_aligned_pairs(obs, broken, Window())


def test_normalized_identity_preserved(rng):
    obs, projections = _five_feature_world(rng, sigma=0.0)
    pairs = {p.scenario: p for p in build_aligned_pairs(obs, projections, Window(), normalization=True)}
    for fp in pairs[Scenario.SSP3].features.values():
        np.testing.assert_allclose(fp.observation.values, fp.projection.values, rtol=0, atol=1e-12)


def test_normalization_off_keeps_raw_values(rng):
    obs, projections = _five_feature_world(rng)
    (pair, *_) = build_aligned_pairs(obs, projections, Window(), normalization=False)
    np.testing.assert_array_equal(pair.features["gdp"].observation.values, obs.series["gdp"].values)


def test_per_feature_grids_may_differ(rng):
    obs, projections = _five_feature_world(rng)
    thinned = dict(obs.series)
    gdp = thinned["gdp"]
    thinned["gdp"] = TimeSeries(gdp.feature, gdp.years[::2], gdp.values[::2])
    pairs = build_aligned_pairs(RegionDataset("A", thinned), projections, Window())
    assert pairs[0].features["gdp"].years.tolist() == [2015, 2017, 2019, 2021]
    assert pairs[0].features["methane"].years.tolist() == list(range(2015, 2023))


def test_serialize_round_trip(rng):
    obs, projections = _five_feature_world(rng)
    text = serialize_observations([obs])
    again = serialize_observations(parse_observations(text))
    assert again == text
    ptext = serialize_projections(projections)
    assert serialize_projections(parse_projections(ptext)) == ptext


def test_format_value():
    assert format_value(1.0) == "1.000000"
    assert format_value(-1e-9) == "0.000000"
    assert format_value(2.5e-7) == "0.000000"
    assert format_value(-0.1234564) == "-0.123456"


def test_parse_weights_groups_and_overrides():
    features = ["gdp", "population", "methane", "temperature"]
    w = parse_weights("group,weight\neconomic,2\nenvironmental,1\ngdp,5\n", features)
    assert w.as_dict() == {"gdp": 5.0, "methane": 1.0, "population": 2.0, "temperature": 1.0}
    w = parse_weights("feature,weight\ngdp,1\n", features)
    assert w.as_dict() == {"gdp": 1.0}
    with pytest.raises(MalformedHeader):
        parse_weights("name,weight\ngdp,1\n", features)

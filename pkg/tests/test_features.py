from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import consistency_loop, delta_loop
from virtualbid.features import (
    FeatureContext,
    FeatureVector,
    compute_feature_vector,
    compute_price_distance,
    compute_type_consistency,
    extract_features,
    load_features_csv,
    normalize_features,
    price_distance,
    write_features_csv,
)
from virtualbid.market_data import (
    ConvergenceBid,
    GeneratorConfig,
    HourlyPriceStats,
    MarketDataError,
    ParticipantSpec,
    PriceBidStep,
    Side,
    compute_hourly_stats,
    full_window,
    generate_synthetic_market,
)

DAY = date(2019, 6, 1)


def _bid(side, prices, bid_id="b", day=DAY, node="N1", pid="P", hour=14):
    steps = tuple(PriceBidStep(10.0 * (i + 1), p) for i, p in enumerate(prices))
    return ConvergenceBid(bid_id, pid, node, day, hour, Side(side), steps)


def _stats(avg, node="N1", hour=14):
    return HourlyPriceStats(node, hour, avg, 10, (DAY, DAY))


@pytest.mark.parametrize("side,prices,avg,expected", [
    ("S", [45, 55], 40, 5.0),
    ("D", [60, 50], 70, 10.0),
    ("S", [35, 45], 40, 0.0),
    ("S", [40, 45], 40, 0.0),
    ("D", [30], 20, -10.0),
])
def test_price_distance_cases(side, prices, avg, expected):
    assert compute_price_distance(_bid(side, prices), _stats(avg)) == expected


def test_price_distance_mismatch():
    with pytest.raises(MarketDataError):
        compute_price_distance(_bid("S", [40]), _stats(40, hour=3))


finite = st.integers(-50000, 50000).map(lambda x: x / 100)


@given(st.sampled_from("SD"), finite, finite, finite)
def test_delta_matches_oracle_and_mirror(side, a, b, avg):
    lo, hi = sorted((a, b))
    d = price_distance(Side(side), lo, hi, avg)
    assert d == pytest.approx(delta_loop(side, [lo, hi], avg), abs=1e-9)
    # reflect prices about the mean and flip the side
    other = "D" if side == "S" else "S"
    assert price_distance(Side(other), 2 * avg - hi, 2 * avg - lo, avg) == pytest.approx(d, abs=1e-9)
    assert (d == 0) == (lo <= avg <= hi)


def _history(n_supply, n_demand, start=DAY - timedelta(days=200)):
    out = []
    for i in range(n_supply + n_demand):
        side = "S" if i < n_supply else "D"
        out.append(_bid(side, [40], f"h{i}", day=start + timedelta(days=i)))
    return out


def test_consistency_sixty_percent():
    hist = _history(6, 4)
    assert compute_type_consistency(_bid("S", [40]), hist) == 0.6
    assert compute_type_consistency(_bid("D", [40]), hist) == 0.4


def test_consistency_empty_history():
    assert compute_type_consistency(_bid("S", [40]), []) == 0.5


def test_consistency_window_and_filters():
    hist = [
        _bid("S", [40], "old", day=DAY - timedelta(days=366)),   # outside the year
        _bid("S", [40], "same", day=DAY),                        # own date excluded
        _bid("S", [40], "other", pid="Q", day=DAY - timedelta(days=3)),
        _bid("S", [40], "elsewhere", node="N2", day=DAY - timedelta(days=3)),
        _bid("D", [40], "edge", day=DAY - timedelta(days=365)),  # inclusive edge
    ]
    assert compute_type_consistency(_bid("D", [40]), hist) == 1.0


@given(st.lists(st.tuples(st.sampled_from("SD"), st.integers(0, 800)), max_size=40), st.sampled_from("SD"))
def test_consistency_oracle_and_complement(hist, side):
    base = DAY - timedelta(days=400)
    bids = [_bid(s, [40], f"h{i}", day=base + timedelta(days=d)) for i, (s, d) in enumerate(hist)]
    cur_ord = DAY.toordinal()
    expect = consistency_loop(side, cur_ord, [(s, (base + timedelta(days=d)).toordinal()) for s, d in hist])
    got = compute_type_consistency(_bid(side, [40]), bids)
    assert got == pytest.approx(expect)
    other = "D" if side == "S" else "S"
    flipped = compute_type_consistency(_bid(other, [40]), bids)
    if got != 0.5 or flipped != 0.5:
        assert got + flipped == pytest.approx(1.0)


def test_feature_vector_fields():
    ctx = FeatureContext({("N1", 14): _stats(40), ("DLAP", 14): _stats(40, node="DLAP")}, [],
                         {"N1": False, "DLAP": True})
    v = compute_feature_vector(_bid("S", [45], node="DLAP"), ctx)
    assert (v.n_steps, v.is_major_node) == (1, 1)
    v = compute_feature_vector(_bid("D", [60, 50, 45]), ctx)
    assert (v.n_steps, v.is_major_node) == (3, 0)
    with pytest.raises(MarketDataError):
        compute_feature_vector(_bid("S", [45], node="N9"), ctx)
    with pytest.raises(MarketDataError):
        compute_feature_vector(_bid("S", [45], hour=3), ctx)


def test_batch_extraction_matches_single_bid_path():
    cfg = GeneratorConfig(n_nodes=5, n_major=1, n_days=25, participants=(
        ParticipantSpec("A", {"price_forecasting": 3, "opportunistic": 2}, n_nodes=2),
        ParticipantSpec("B", {"self_scheduling": 3}, n_nodes=3),
    ))
    ds = generate_synthetic_market(cfg, 11)
    ctx = FeatureContext(compute_hourly_stats(ds.prices, full_window(ds.prices)), ds.bids, ds.node_registry)
    batch = extract_features(ds)
    for b, v in zip(ds.bids[::7], batch[::7]):
        assert compute_feature_vector(b, ctx) == v


def test_normalize_equal_deltas():
    vecs = [FeatureVector(f"b{i}", 7.0, 0.5, 1, 0) for i in range(5)]
    X, sc = normalize_features(vecs)
    assert (X[:, 0] == 0).all() and sc.delta_mad == 1.0


def test_normalize_step_endpoints():
    X, _ = normalize_features([FeatureVector("a", 0, 0.5, 1, 0), FeatureVector("b", 1, 0.5, 10, 1)])
    assert X[:, 2].tolist() == [0.0, 1.0]
    assert X[:, 3].tolist() == [0.0, 1.0]


def test_normalize_hand_fixture():
    deltas = [-10.0, 0.0, 2.0, 4.0, 40.0]
    vecs = [FeatureVector(f"b{i}", d, 0.1 * i, i + 1, i % 2) for i, d in enumerate(deltas)]
    X, sc = normalize_features(vecs)
    # median 2; absolute deviations 12, 2, 0, 2, 38 -> MAD 2
    assert (sc.delta_median, sc.delta_mad) == (2.0, 2.0)
    assert X[:, 0].tolist() == [-6.0, -1.0, 0.0, 1.0, 19.0]
    assert X[:, 1].tolist() == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4])
    assert X[:, 2].tolist() == pytest.approx([0, 1 / 9, 2 / 9, 3 / 9, 4 / 9])


def test_normalize_needs_two():
    with pytest.raises(ValueError):
        normalize_features([FeatureVector("a", 0, 0.5, 1, 0)])


@given(st.lists(st.tuples(finite, st.integers(0, 10).map(lambda x: x / 10), st.integers(1, 10), st.integers(0, 1)),
                min_size=2, max_size=30))
def test_normalize_preserves_rank_order(rows):
    vecs = [FeatureVector(f"b{i}", *r) for i, r in enumerate(rows)]
    raw = np.array([v.as_tuple() for v in vecs], dtype=float)
    X, _ = normalize_features(vecs)
    for j in range(4):
        assert (np.argsort(X[:, j], kind="stable") == np.argsort(raw[:, j], kind="stable")).all()


def test_features_csv_round_trip(tmp_path):
    vecs = [FeatureVector("a", 1.25, 0.6, 2, 1), FeatureVector("b", -3.5, 0.5, 1, 0)]
    write_features_csv(vecs, tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "bid_id,delta,type_consistency,n_steps,is_major_node"
    assert load_features_csv(tmp_path / "f.csv") == vecs

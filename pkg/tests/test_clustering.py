import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import adjusted_rand, brute_min_spanning_weight, mutual_reachability_matrix
from virtualbid.clustering import (
    NOISE,
    ClusteringConfig,
    ClusterSignature,
    StrategyLabel,
    build_mutual_reachability_mst,
    cluster_bids,
    core_distances,
    extract_condensed_clusters,
    label_signature,
    write_clusters_csv,
    write_shares_csv,
)
from virtualbid.features import extract_features
from virtualbid.market_data import GeneratorConfig, ParticipantSpec, generate_synthetic_market


def _cluster(X, mcs, ms=5):
    cfg = ClusteringConfig(min_cluster_size=mcs, min_samples=min(ms, mcs))
    mst = build_mutual_reachability_mst(X, cfg.min_samples)
    return extract_condensed_clusters(mst, cfg, len(X))


def _same_partition(a, b):
    return adjusted_rand(a, b) == 1.0


# ---------------------------------------------------------------------------
# MST


def test_two_points_single_edge():
    X = np.array([[0.0, 0.0], [3.0, 4.0]])
    mst = build_mutual_reachability_mst(X, 2)
    assert mst.shape == (1, 3)
    assert mst[0, 2] == 5.0


def test_duplicate_points_zero_edges():
    X = np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]])
    mst = build_mutual_reachability_mst(X, 1)
    assert sorted(mst[:, 2].tolist())[0] == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_six_point_mst_is_minimum(seed):
    X = np.random.default_rng(seed).normal(size=(6, 3))
    mst = build_mutual_reachability_mst(X, 3)
    W = mutual_reachability_matrix(X, 3)
    assert mst[:, 2].sum() == pytest.approx(brute_min_spanning_weight(W), abs=1e-12)


def test_core_distance_counts_self():
    X = np.array([[0.0], [1.0], [3.0]])
    assert core_distances(X, 1).tolist() == [0.0, 0.0, 0.0]
    assert core_distances(X, 2).tolist() == [1.0, 1.0, 2.0]


def test_mst_rejects_bad_input():
    with pytest.raises(ValueError):
        build_mutual_reachability_mst(np.zeros((1, 2)), 1)
    with pytest.raises(ValueError):
        build_mutual_reachability_mst(np.array([[0.0], [np.nan]]), 1)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (12, 2), elements=st.floats(-100, 100, allow_nan=False)), st.floats(0.1, 50))
def test_mst_weights_scale(X, c):
    a = build_mutual_reachability_mst(X, 3)
    b = build_mutual_reachability_mst(X * c, 3)
    assert np.sort(b[:, 2]) == pytest.approx(np.sort(a[:, 2]) * c, rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------------------
# extraction


def test_two_blobs():
    rng = np.random.default_rng(0)
    # separation is 200x the within-blob spread
    X = np.vstack([rng.normal(0, 0.1, (50, 2)), rng.normal(20.0, 0.1, (50, 2))])
    m = _cluster(X, 10)
    assert m.n_clusters == 2
    assert (m.labels != NOISE).all()
    assert _same_partition(m.labels, np.repeat([0, 1], 50))


@pytest.mark.parametrize("seed", range(3))
def test_uniform_never_two_clusters(seed):
    X = np.random.default_rng(seed).random((100, 2))
    m = _cluster(X, 90)
    assert m.n_clusters <= 1


def test_identical_points_one_cluster():
    m = _cluster(np.ones((30, 3)), 5)
    assert m.n_clusters == 1 and (m.labels == 0).all()


def test_cluster_sizes_respect_minimum():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(c, 0.5, (n, 2)) for c, n in ((0, 60), (6, 40), (12, 25))] + [rng.uniform(-5, 20, (30, 2))])
    m = _cluster(X, 20)
    assert all(s >= 20 for s in m.cluster_sizes().values())


def test_permutation_invariance():
    rng = np.random.default_rng(5)
    X = np.vstack([rng.normal(c, 0.4, (40, 2)) for c in (0, 4, 9)])
    perm = rng.permutation(len(X))
    a = _cluster(X, 15).labels
    b = _cluster(X[perm], 15).labels
    assert _same_partition(a[perm], b)


def test_scaling_invariance_of_partition():
    rng = np.random.default_rng(6)
    X = np.vstack([rng.normal(c, 0.4, (40, 2)) for c in (0, 4, 9)])
    assert _same_partition(_cluster(X, 15).labels, _cluster(X * 7.5, 15).labels)


@pytest.mark.parametrize("seed", range(3))
def test_agrees_with_reference_hdbscan(seed):
    sk = pytest.importorskip("sklearn.cluster")
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(c, s, (n, 2)) for c, s, n in ((0, 0.5, 150), (5, 0.8, 100), (10, 0.3, 80))]
                  + [rng.uniform(-3, 13, (40, 2))])
    ours = _cluster(X, 20).labels
    ref = sk.HDBSCAN(min_cluster_size=20, min_samples=5).fit(X).labels_
    assert adjusted_rand(ours, ref) >= 0.95


# ---------------------------------------------------------------------------
# strategy labels


@pytest.mark.parametrize("sig,label", [
    (ClusterSignature(60, 0.95, 1, 0), StrategyLabel.OPPORTUNISTIC),
    (ClusterSignature(-80, 0.5, 1, 0), StrategyLabel.SELF_SCHEDULING),
    (ClusterSignature(2, 0.5, 2, 1), StrategyLabel.PRICE_FORECASTING),
    (ClusterSignature(-80, 0.5, 3, 0), StrategyLabel.OTHER),
    (ClusterSignature(60, 0.6, 1, 0), StrategyLabel.OTHER),
    (ClusterSignature(15, 0.9, 1, 0), StrategyLabel.OTHER),
])
def test_label_signature(sig, label):
    assert label_signature(sig) is label


def test_config_validation():
    with pytest.raises(ValueError):
        ClusteringConfig(min_cluster_size=1)
    with pytest.raises(ValueError):
        ClusteringConfig(min_cluster_size=5, min_samples=6)


# ---------------------------------------------------------------------------
# pipeline


def _market(participants, n_days=30, n_nodes=12, seed=0):
    cfg = GeneratorConfig(n_nodes=n_nodes, n_major=3, n_days=n_days, participants=participants)
    return generate_synthetic_market(cfg, seed)


def test_three_archetypes_recovered():
    ds = _market((
        ParticipantSpec("A", {"price_forecasting": 40}),
        ParticipantSpec("B", {"self_scheduling": 30}),
        ParticipantSpec("C", {"opportunistic": 30}),
    ))
    assert len(ds.bids) == 3000
    res = cluster_bids(extract_features(ds), ClusteringConfig(), {b.bid_id: b.participant_id for b in ds.bids})
    labels = set(res.strategy_of_cluster.values()) - {StrategyLabel.OTHER}
    assert labels == {StrategyLabel.PRICE_FORECASTING, StrategyLabel.SELF_SCHEDULING, StrategyLabel.OPPORTUNISTIC}
    hits = [s.value == ds.planted[b] for b, s, c in zip(res.bid_ids, res.point_strategies, res.model.labels) if c != NOISE]
    assert np.mean(hits) >= 0.95


def test_single_archetype():
    ds = _market((ParticipantSpec("B", {"self_scheduling": 10}),), n_days=20)
    res = cluster_bids(extract_features(ds), ClusteringConfig(), {b.bid_id: b.participant_id for b in ds.bids})
    assert set(res.strategy_of_cluster.values()) == {StrategyLabel.SELF_SCHEDULING}
    assert res.shares["B"][StrategyLabel.SELF_SCHEDULING] == pytest.approx(1.0, abs=0.02)


def test_mixed_participant_shares():
    ds = _market((
        ParticipantSpec("M", {"price_forecasting": 20, "opportunistic": 20}),
        ParticipantSpec("B", {"self_scheduling": 15}),
    ), n_days=40)
    res = cluster_bids(extract_features(ds), ClusteringConfig(), {b.bid_id: b.participant_id for b in ds.bids})
    sh = res.shares["M"]
    assert sh[StrategyLabel.PRICE_FORECASTING] == pytest.approx(0.5, abs=0.05)
    assert sh[StrategyLabel.OPPORTUNISTIC] == pytest.approx(0.5, abs=0.05)
    for row in res.shares.values():
        assert sum(row.values()) == pytest.approx(1.0)


def test_too_few_vectors():
    ds = _market((ParticipantSpec("B", {"self_scheduling": 1}),), n_days=10)
    with pytest.raises(ValueError):
        cluster_bids(extract_features(ds), ClusteringConfig())


def test_writers(tmp_path):
    ds = _market((ParticipantSpec("B", {"self_scheduling": 5}),), n_days=20)
    res = cluster_bids(extract_features(ds), ClusteringConfig(min_cluster_size=10),
                       {b.bid_id: b.participant_id for b in ds.bids})
    write_clusters_csv(res, tmp_path / "c.csv")
    write_shares_csv(res.shares, tmp_path / "s.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "bid_id,cluster_id,strategy_label" and len(lines) == 101
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == \
        "participant_id,price_forecasting,self_scheduling,opportunistic,other"

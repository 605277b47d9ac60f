"""Hierarchical density clustering of bid features and strategy labeling.

The pipeline follows HDBSCAN*: core distances, a minimum spanning tree of
the mutual-reachability graph, the single-linkage hierarchy read off that
tree, condensation by ``min_cluster_size`` and excess-of-mass selection.

Conventions that make the result deterministic:

* the core distance counts the point itself, so ``min_samples=1`` gives
  plain single linkage;
* MST edges are processed in ``(weight, lower index, higher index)`` order;
* merges at exactly the same height are treated as one simultaneous n-ary
  merge, so ties never create spurious splits;
* at equal stability the children (the more specific clusters) win;
* when the root never splits into two clusters of ``min_cluster_size``,
  the whole data set is returned as a single cluster.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from virtualbid.features import normalize_features
from virtualbid.market_data import OPPORTUNISTIC, PRICE_FORECASTING, SELF_SCHEDULING

NOISE = -1


class StrategyLabel(str, Enum):
    PRICE_FORECASTING = PRICE_FORECASTING
    SELF_SCHEDULING = SELF_SCHEDULING
    OPPORTUNISTIC = OPPORTUNISTIC
    OTHER = "other"


@dataclass(frozen=True)
class ClusteringConfig:
    min_cluster_size: int = 50
    min_samples: int = 5
    small_delta: float = 5.0
    large_delta: float = 25.0
    opportunistic_consistency: float = 0.8

    def __post_init__(self):
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        if self.min_samples > self.min_cluster_size:
            raise ValueError("min_samples must not exceed min_cluster_size")
        if self.small_delta < 0 or self.large_delta < self.small_delta:
            raise ValueError("need 0 <= small_delta <= large_delta")


@dataclass(frozen=True)
class ClusterSignature:
    """Per-cluster medians of the raw (un-normalized) features."""

    delta: float
    type_consistency: float
    n_steps: float
    is_major_node: float
    size: int = 0


@dataclass
class ClusterModel:
    labels: np.ndarray
    condensed_tree: np.ndarray
    stability: dict
    selected: list
    cluster_signatures: dict = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return len(self.selected)

    def cluster_sizes(self) -> dict:
        ids, counts = np.unique(self.labels[self.labels != NOISE], return_counts=True)
        return dict(zip(ids.tolist(), counts.tolist()))


CONDENSED_DTYPE = np.dtype([("parent", np.int64), ("child", np.int64), ("lambda_val", float), ("size", np.int64)])


# ---------------------------------------------------------------------------
# mutual reachability MST


def core_distances(X: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the ``min_samples``-th nearest neighbour, the point itself included."""
    k = min(min_samples, len(X))
    if k <= 1:
        return np.zeros(len(X))
    d, _ = cKDTree(X).query(X, k=k)
    return d[:, -1]


def build_mutual_reachability_mst(X, min_samples: int) -> np.ndarray:
    """Prim's MST over mutual-reachability distances.

    Returns an ``(N-1, 3)`` float array of ``(i, j, weight)`` rows with
    ``i < j``, sorted by ``(weight, i, j)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("need a 2-D matrix with at least 2 points")
    if not np.isfinite(X).all():
        raise ValueError("non-finite feature values")
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    n = len(X)
    core = core_distances(X, min_samples)
    in_tree = np.zeros(n, dtype=bool)
    key = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    edges = np.empty((n - 1, 3))
    cur = 0
    in_tree[0] = True
    for e in range(n - 1):
        diff = X - X[cur]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        mr = np.maximum(np.maximum(d, core), core[cur])
        better = ~in_tree & (mr < key)
        key[better] = mr[better]
        parent[better] = cur
        nxt = int(np.argmin(np.where(in_tree, np.inf, key)))
        a, b = parent[nxt], nxt
        edges[e] = (min(a, b), max(a, b), key[nxt])
        in_tree[nxt] = True
        cur = nxt
    order = np.lexsort((edges[:, 1], edges[:, 0], edges[:, 2]))
    return edges[order]


# ---------------------------------------------------------------------------
# hierarchy and condensation


def _nary_hierarchy(mst: np.ndarray, n: int):
    """Single-linkage merges with equal-height merges fused.

    Returns ``(children, height, size, root)`` where internal node ids start
    at ``n`` and ``children[v]`` lists point or node ids.
    """
    order = np.lexsort((mst[:, 1], mst[:, 0], mst[:, 2]))
    mst = mst[order]
    uf = np.arange(2 * n - 1)
    top = np.arange(n)  # union-find root -> current hierarchy node

    def find(x):
        root = x
        while uf[root] != root:
            root = uf[root]
        while uf[x] != root:
            uf[x], x = root, uf[x]
        return root

    children = {}
    height = {}
    size = np.ones(2 * n - 1, dtype=np.int64)
    nxt = n
    for i, j, w in mst:
        ri, rj = find(int(i)), find(int(j))
        if ri == rj:
            raise ValueError("edge list is not a spanning tree")
        kids = []
        for r in (ri, rj):
            node = top[r]
            if node >= n and height[node] == w:
                kids.extend(children.pop(node))
                height.pop(node)
            else:
                kids.append(node)
        v = nxt
        nxt += 1
        children[v] = kids
        height[v] = float(w)
        size[v] = size[top[ri]] + size[top[rj]]
        uf[rj] = ri
        top[ri] = v
    root = top[find(0)]
    return children, height, size, root


def _leaves(node, children, n):
    out, stack = [], [node]
    while stack:
        v = stack.pop()
        if v < n:
            out.append(v)
        else:
            stack.extend(children[v])
    return out


def condense_tree(mst: np.ndarray, n: int, min_cluster_size: int) -> np.ndarray:
    """Condensed cluster tree as a structured array (HDBSCAN layout).

    Cluster ids start at ``n`` (the root).  Rows with ``child < n`` record a
    point falling out of ``parent`` at ``lambda_val``.
    """
    children, height, size, root = _nary_hierarchy(mst, n)
    positive = [h for h in height.values() if h > 0]
    lam_cap = 1e6 / min(positive) if positive else 1.0

    def lam(v):
        h = height[v]
        return 1.0 / h if h > 0 else lam_cap

    rows = []
    next_cluster = n + 1
    stack = [(root, n)]
    while stack:
        v, c = stack.pop()
        while True:
            lv = lam(v)
            kids = children[v]
            big = [k for k in kids if size[k] >= min_cluster_size]
            for k in kids:
                if size[k] < min_cluster_size:
                    rows.extend((c, p, lv, 1) for p in _leaves(k, children, n))
            if len(big) >= 2:
                for k in big:
                    rows.append((c, next_cluster, lv, int(size[k])))
                    stack.append((k, next_cluster))
                    next_cluster += 1
                break
            if len(big) == 1:
                v = big[0]
                continue
            break
    return np.array(rows, dtype=CONDENSED_DTYPE)


def compute_stability(tree: np.ndarray) -> dict:
    root = int(tree["parent"].min())
    clusters = np.unique(np.concatenate([tree["parent"], tree["child"][tree["child"] >= root]]))
    birth = {int(c): 0.0 for c in clusters}
    for row in tree[tree["child"] >= root]:
        birth[int(row["child"])] = float(row["lambda_val"])
    stab = {int(c): 0.0 for c in clusters}
    for p, lv, s in zip(tree["parent"], tree["lambda_val"], tree["size"]):
        stab[int(p)] += (lv - birth[int(p)]) * s
    return stab


def extract_condensed_clusters(mst: np.ndarray, config: ClusteringConfig, n_points: int | None = None) -> ClusterModel:
    """Condense the hierarchy and select clusters by excess of mass."""
    mst = np.asarray(mst, dtype=float)
    n = len(mst) + 1 if n_points is None else n_points
    if mst.shape != (n - 1, 3):
        raise ValueError("malformed spanning tree")
    tree = condense_tree(mst, n, config.min_cluster_size)
    root = n
    stab = compute_stability(tree)
    cluster_rows = tree[tree["child"] >= root]
    parent_of = {int(r["child"]): int(r["parent"]) for r in cluster_rows}
    kids = {c: [] for c in stab}
    for ch, p in parent_of.items():
        kids[p].append(ch)

    selected = {}
    if not kids[root]:
        selected = {root: True}
    else:
        work = dict(stab)
        for c in sorted((c for c in stab if c != root), reverse=True):
            if not kids[c]:
                selected[c] = True
                continue
            sub = sum(work[k] for k in kids[c])
            if sub >= work[c]:
                selected[c] = False
                work[c] = sub
            else:
                selected[c] = True
                stack = list(kids[c])
                while stack:
                    d = stack.pop()
                    selected[d] = False
                    stack.extend(kids[d])
        selected[root] = False

    chosen = sorted(c for c, s in selected.items() if s)
    label_of = {c: i for i, c in enumerate(chosen)}
    owner = {}
    for c in sorted(stab):
        p = parent_of.get(c)
        inherited = owner.get(p, NOISE) if p is not None else NOISE
        owner[c] = inherited if inherited != NOISE else label_of.get(c, NOISE)
    labels = np.full(n, NOISE, dtype=np.int64)
    point_rows = tree[tree["child"] < root]
    for p, ch in zip(point_rows["parent"], point_rows["child"]):
        labels[ch] = owner[int(p)]
    return ClusterModel(labels, tree, stab, chosen)


# ---------------------------------------------------------------------------
# strategy labels


def signatures(labels: np.ndarray, raw: np.ndarray) -> dict:
    """Median raw features per cluster label (noise excluded)."""
    out = {}
    for lab in sorted(set(labels.tolist()) - {NOISE}):
        sub = raw[labels == lab]
        med = np.median(sub, axis=0)
        out[lab] = ClusterSignature(float(med[0]), float(med[1]), float(med[2]), float(med[3]), len(sub))
    return out


def label_signature(sig: ClusterSignature, config: ClusteringConfig = ClusteringConfig()) -> StrategyLabel:
    if abs(sig.delta) <= config.small_delta:
        return StrategyLabel.PRICE_FORECASTING
    if sig.delta <= -config.large_delta and sig.n_steps == 1:
        return StrategyLabel.SELF_SCHEDULING
    if sig.delta >= config.large_delta and sig.type_consistency >= config.opportunistic_consistency:
        return StrategyLabel.OPPORTUNISTIC
    return StrategyLabel.OTHER


def assign_strategy_labels(model: ClusterModel, config: ClusteringConfig = ClusteringConfig()) -> dict:
    """Map each cluster label to a :class:`StrategyLabel` from its signature."""
    if set(model.cluster_signatures) != set(model.cluster_sizes()):
        raise ValueError("cluster_signatures not populated for every cluster")
    return {c: label_signature(s, config) for c, s in model.cluster_signatures.items()}


@dataclass
class ClusteringResult:
    bid_ids: list
    model: ClusterModel
    strategy_of_cluster: dict
    point_strategies: list
    shares: dict
    scaling: object


def strategy_shares(point_strategies, participants) -> dict:
    """Fraction of each participant's bids per strategy label (noise is Other)."""
    counts = {}
    for strat, pid in zip(point_strategies, participants):
        row = counts.setdefault(pid, {s: 0 for s in StrategyLabel})
        row[strat] += 1
    return {
        pid: {s: row[s] / sum(row.values()) for s in StrategyLabel}
        for pid, row in sorted(counts.items())
    }


def cluster_bids(features, config: ClusteringConfig = ClusteringConfig(), participants=None) -> ClusteringResult:
    """Normalize, build the MST, extract clusters, and label strategies.

    ``participants`` maps bid_id to participant_id; without it shares are
    reported under a single ``"*"`` participant.
    """
    if len(features) < max(2, config.min_cluster_size):
        raise ValueError(f"need at least {max(2, config.min_cluster_size)} feature vectors")
    X, scaling = normalize_features(features)
    mst = build_mutual_reachability_mst(X, config.min_samples)
    model = extract_condensed_clusters(mst, config, len(X))
    raw = np.array([f.as_tuple() for f in features], dtype=float)
    model.cluster_signatures = signatures(model.labels, raw)
    by_cluster = assign_strategy_labels(model, config)
    points = [by_cluster.get(int(c), StrategyLabel.OTHER) if c != NOISE else StrategyLabel.OTHER
              for c in model.labels]
    pids = [participants[f.bid_id] for f in features] if participants else ["*"] * len(features)
    return ClusteringResult(
        [f.bid_id for f in features], model, by_cluster, points, strategy_shares(points, pids), scaling
    )


def write_clusters_csv(result: ClusteringResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bid_id", "cluster_id", "strategy_label"])
        for bid, c, s in zip(result.bid_ids, result.model.labels.tolist(), result.point_strategies):
            w.writerow([bid, c, s.value])


SHARES_HEADER = ["participant_id", "price_forecasting", "self_scheduling", "opportunistic", "other"]


def write_shares_csv(shares: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SHARES_HEADER) + "\n")
        for pid, row in sorted(shares.items()):
            vals = [row[StrategyLabel(k)] for k in SHARES_HEADER[1:]]
            fh.write(pid + "," + ",".join(f"{v:.6f}" for v in vals) + "\n")

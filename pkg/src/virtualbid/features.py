"""Per-bid strategy features and their pre-clustering normalization.

The four features are the signed price distance from the hourly average
D-LMP (``delta``), the historical side consistency of the bidder at the node
(``type_consistency``), the number of steps, and whether the node is a major
aggregated node (hub or default load aggregation point).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from virtualbid.market_data import (
    ConvergenceBid,
    HourlyPriceStats,
    MarketDataError,
    MarketDataset,
    Side,
    compute_hourly_stats,
    full_window,
)

HISTORY_DAYS = 365
EMPTY_HISTORY_CONSISTENCY = 0.5
FEATURE_HEADER = ["bid_id", "delta", "type_consistency", "n_steps", "is_major_node"]


@dataclass(frozen=True)
class FeatureVector:
    bid_id: str
    delta: float
    type_consistency: float
    n_steps: int
    is_major_node: int

    def as_tuple(self):
        return (self.delta, self.type_consistency, self.n_steps, self.is_major_node)


@dataclass
class FeatureContext:
    """Read-only inputs needed to featurize bids.

    ``stats`` maps ``(node_id, hour)`` to :class:`HourlyPriceStats`,
    ``history`` is the pool of all known bids, ``registry`` maps node to
    its major-node flag.
    """

    stats: dict
    history: list
    registry: dict


def price_distance(side: Side, min_price: float, max_price: float, avg_dlmp: float) -> float:
    if min_price > avg_dlmp:
        d = min_price - avg_dlmp
    elif max_price < avg_dlmp:
        d = max_price - avg_dlmp
    else:
        return 0.0
    return d if side is Side.SUPPLY else -d


def compute_price_distance(bid: ConvergenceBid, stats: HourlyPriceStats) -> float:
    """Distance of the bid's price envelope from the hourly mean D-LMP.

    Positive values mean the bid waits for a spike (a supply bid above the
    mean, a demand bid below it); zero when the mean lies inside the
    envelope, endpoints included.
    """
    if (stats.node_id, stats.hour) != (bid.node_id, bid.hour):
        raise MarketDataError(f"stats ({stats.node_id}, h{stats.hour}) do not match bid {bid.bid_id}")
    prices = bid.prices
    return price_distance(bid.side, min(prices), max(prices), stats.avg_dlmp)


def _in_window(bid: ConvergenceBid, other: ConvergenceBid) -> bool:
    return (
        other.participant_id == bid.participant_id
        and other.node_id == bid.node_id
        and bid.date - timedelta(days=HISTORY_DAYS) <= other.date < bid.date
    )


def compute_type_consistency(bid: ConvergenceBid, history) -> float:
    """Fraction of the bidder's trailing-year bids at this node on the same side.

    ``history`` may contain unrelated bids; only same participant and node,
    dated within the 365 days before ``bid.date`` (exclusive), are counted.
    """
    relevant = [h for h in history if _in_window(bid, h)]
    if not relevant:
        return EMPTY_HISTORY_CONSISTENCY
    return sum(h.side is bid.side for h in relevant) / len(relevant)


def compute_feature_vector(bid: ConvergenceBid, context: FeatureContext) -> FeatureVector:
    if bid.node_id not in context.registry:
        raise MarketDataError(f"bid {bid.bid_id} at unregistered node {bid.node_id}")
    stats = context.stats.get((bid.node_id, bid.hour))
    if stats is None:
        raise MarketDataError(f"no hourly stats for ({bid.node_id}, h{bid.hour})")
    return FeatureVector(
        bid.bid_id,
        compute_price_distance(bid, stats),
        compute_type_consistency(bid, context.history),
        bid.n_steps,
        int(bool(context.registry[bid.node_id])),
    )


def _batch_consistency(bids) -> np.ndarray:
    """Vectorized type consistency for every bid against all the others."""
    out = np.full(len(bids), EMPTY_HISTORY_CONSISTENCY)
    groups = {}
    for i, b in enumerate(bids):
        groups.setdefault((b.participant_id, b.node_id), []).append(i)
    for idx in groups.values():
        idx = np.asarray(idx)
        days = np.array([bids[i].date.toordinal() for i in idx])
        supply = np.array([bids[i].side is Side.SUPPLY for i in idx])
        order = np.argsort(days, kind="stable")
        idx, days, supply = idx[order], days[order], supply[order]
        csum = np.concatenate([[0], np.cumsum(supply)])
        lo = np.searchsorted(days, days - HISTORY_DAYS, side="left")
        hi = np.searchsorted(days, days, side="left")
        n = hi - lo
        n_sup = csum[hi] - csum[lo]
        frac = np.where(supply, n_sup, n - n_sup) / np.maximum(n, 1)
        out[idx] = np.where(n > 0, frac, EMPTY_HISTORY_CONSISTENCY)
    return out


def extract_features(dataset: MarketDataset, window=None) -> list:
    """Feature vectors for every bid in ``dataset``.

    Hourly averages are taken over ``window`` (default: the whole price
    history); type consistency uses the dataset's own bids as history.
    """
    bids = dataset.bids
    if not bids:
        return []
    stats = compute_hourly_stats(dataset.prices, window or full_window(dataset.prices))
    consistency = _batch_consistency(bids)
    out = []
    for b, tc in zip(bids, consistency):
        if b.node_id not in dataset.node_registry:
            raise MarketDataError(f"bid {b.bid_id} at unregistered node {b.node_id}")
        s = stats.get((b.node_id, b.hour))
        if s is None:
            raise MarketDataError(f"no hourly stats for ({b.node_id}, h{b.hour})")
        out.append(FeatureVector(
            b.bid_id,
            compute_price_distance(b, s),
            float(tc),
            b.n_steps,
            int(bool(dataset.node_registry[b.node_id])),
        ))
    return out


@dataclass(frozen=True)
class FeatureScaling:
    """Robust scaling applied to ``delta``: ``(delta - median) / mad``."""

    delta_median: float
    delta_mad: float


def normalize_features(vectors) -> tuple:
    """Return ``(matrix, scaling)`` with columns delta, consistency, steps, major.

    ``delta`` is centred on its median and divided by the median absolute
    deviation (1 when that is zero); step counts map affinely onto [0, 1].
    """
    if len(vectors) < 2:
        raise ValueError("need at least 2 feature vectors")
    raw = np.array([v.as_tuple() for v in vectors], dtype=float)
    med = float(np.median(raw[:, 0]))
    mad = float(np.median(np.abs(raw[:, 0] - med)))
    if mad == 0.0:
        mad = 1.0
    X = np.empty_like(raw)
    X[:, 0] = (raw[:, 0] - med) / mad
    X[:, 1] = raw[:, 1]
    X[:, 2] = (raw[:, 2] - 1.0) / 9.0
    X[:, 3] = raw[:, 3]
    return X, FeatureScaling(med, mad)


def write_features_csv(vectors, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_HEADER)
        for v in vectors:
            w.writerow([v.bid_id, f"{v.delta:.4f}", f"{v.type_consistency:.6f}", v.n_steps, v.is_major_node])


def load_features_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FEATURE_HEADER:
            raise MarketDataError(f"{path}: header must be {','.join(FEATURE_HEADER)}")
        return [
            FeatureVector(r["bid_id"], float(r["delta"]), float(r["type_consistency"]),
                          int(r["n_steps"]), int(r["is_major_node"]))
            for r in reader
        ]

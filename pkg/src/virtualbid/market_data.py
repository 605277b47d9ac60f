"""Two-settlement market data: prices, convergence bids, settlement.

Prices are held column-wise in :class:`PriceTable` (one row per node-hour)
because backtests routinely carry millions of node-hours; individual rows
are materialized as :class:`PriceRecord` on demand.  Bids are small frozen
dataclasses.

Timestamps are hour-resolution UTC, stored as ``numpy.datetime64[h]``.  The
hour-of-day used for hourly statistics is the hour label of the timestamp
as written, never a local-time conversion.
"""

from __future__ import annotations

import csv
import math
import zlib
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

MAX_STEPS = 10
PRICE_HEADER = ["timestamp", "node_id", "dlmp", "rtlmp"]
BID_HEADER = ["bid_id", "participant_id", "node_id", "date", "hour", "side", "steps"]
REGISTRY_HEADER = ["node_id", "is_major"]
GROUND_TRUTH_HEADER = ["participant_id", "archetype", "fraction"]
PLANTED_HEADER = ["bid_id", "archetype"]

PRICE_FORECASTING = "price_forecasting"
SELF_SCHEDULING = "self_scheduling"
OPPORTUNISTIC = "opportunistic"
ARCHETYPES = (PRICE_FORECASTING, SELF_SCHEDULING, OPPORTUNISTIC)


class MarketDataError(ValueError):
    """Malformed, inconsistent or unsettleable market data."""


class Side(str, Enum):
    SUPPLY = "S"
    DEMAND = "D"

    @property
    def flipped(self) -> "Side":
        return Side.DEMAND if self is Side.SUPPLY else Side.SUPPLY

    @classmethod
    def parse(cls, tag: str) -> "Side":
        try:
            return cls(tag.strip().upper())
        except ValueError:
            raise MarketDataError(f"unparseable side tag {tag!r}") from None


# ---------------------------------------------------------------------------
# timestamps


def parse_timestamp(text: str) -> np.datetime64:
    """Parse an ISO-8601 hourly timestamp into ``datetime64[h]`` UTC."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        raise MarketDataError(f"bad timestamp {text!r}") from None
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    if dt.minute or dt.second or dt.microsecond:
        raise MarketDataError(f"timestamp {text!r} is not on the hour")
    return np.datetime64(dt, "h")


def format_timestamp(ts: np.datetime64) -> str:
    return str(np.datetime64(ts, "m")) + "Z"


def hour_of_day(ts) -> np.ndarray:
    ts = np.asarray(ts, dtype="datetime64[h]")
    return (ts - ts.astype("datetime64[D]")).astype(np.int64)


def _to_day(d) -> np.datetime64:
    return np.datetime64(d, "D")


def _fmt_money(x: float) -> str:
    s = f"{x:.4f}"
    return "0.0000" if s == "-0.0000" else s


# ---------------------------------------------------------------------------
# prices


@dataclass(frozen=True)
class PriceRecord:
    """One node-hour of day-ahead (``dlmp``) and real-time (``rtlmp``) LMP."""

    node_id: str
    timestamp: np.datetime64
    dlmp: float
    rtlmp: float

    @property
    def gap(self) -> float:
        return self.dlmp - self.rtlmp

    @property
    def date(self) -> date:
        return self.timestamp.astype("datetime64[D]").item()

    @property
    def hour(self) -> int:
        return int(hour_of_day(self.timestamp))


class PriceTable:
    """Column store of price records sorted by ``(node_id, timestamp)``.

    Iterating yields :class:`PriceRecord` objects.  ``node_idx`` indexes into
    the sorted ``nodes`` tuple.
    """

    def __init__(self, node_ids: Sequence[str], timestamps, dlmp, rtlmp):
        node_ids = np.asarray(node_ids, dtype=object)
        ts = np.asarray(timestamps, dtype="datetime64[h]")
        dlmp = np.asarray(dlmp, dtype=float)
        rtlmp = np.asarray(rtlmp, dtype=float)
        n = len(node_ids)
        if not (len(ts) == len(dlmp) == len(rtlmp) == n):
            raise MarketDataError("price columns have different lengths")
        if n and not (np.isfinite(dlmp).all() and np.isfinite(rtlmp).all()):
            raise MarketDataError("non-finite price")
        nodes, idx = np.unique(node_ids.astype(str), return_inverse=True) if n else ([], np.zeros(0, int))
        self._init(tuple(str(x) for x in nodes), idx.astype(np.int64), ts, dlmp, rtlmp)

    def _init(self, nodes, node_idx, ts, dlmp, rtlmp, presorted=False):
        if not presorted and len(node_idx):
            order = np.lexsort((ts.astype(np.int64), node_idx))
            node_idx, ts, dlmp, rtlmp = node_idx[order], ts[order], dlmp[order], rtlmp[order]
        if len(node_idx) > 1:
            same = (node_idx[1:] == node_idx[:-1]) & (ts[1:] == ts[:-1])
            if same.any():
                k = int(np.argmax(same))
                raise MarketDataError(
                    f"duplicate price key ({nodes[node_idx[k]]}, {format_timestamp(ts[k])})"
                )
        self.nodes = nodes
        self.node_idx = node_idx
        self.timestamps = ts
        self.dlmp = dlmp
        self.rtlmp = rtlmp
        self._lookup = None

    @classmethod
    def empty(cls) -> "PriceTable":
        return cls([], [], [], [])

    @classmethod
    def from_grid(cls, grid: "PriceGrid") -> "PriceTable":
        n_nodes, n_days, _ = grid.dlmp.shape
        hours = (grid.days.astype("datetime64[h]")[:, None] + np.arange(24)).ravel()
        ts = np.tile(hours, n_nodes)
        node_idx = np.repeat(np.arange(n_nodes), n_days * 24)
        dl = grid.dlmp.reshape(-1)
        rt = grid.rtlmp.reshape(-1)
        keep = np.isfinite(dl) & np.isfinite(rt)
        order = np.argsort(np.asarray(grid.nodes, dtype=object).astype(str), kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        table = cls.__new__(cls)
        table._init(
            tuple(grid.nodes[i] for i in order),
            rank[node_idx][keep],
            ts[keep],
            dl[keep].copy(),
            rt[keep].copy(),
            presorted=bool((order == np.arange(len(order))).all()),
        )
        return table

    def __len__(self) -> int:
        return len(self.node_idx)

    def __iter__(self) -> Iterator[PriceRecord]:
        for i in range(len(self)):
            yield self.record_at(i)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PriceTable):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and np.array_equal(self.node_idx, other.node_idx)
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.dlmp, other.dlmp)
            and np.array_equal(self.rtlmp, other.rtlmp)
        )

    @property
    def gap(self) -> np.ndarray:
        return self.dlmp - self.rtlmp

    @property
    def node_ids(self) -> np.ndarray:
        return np.asarray(self.nodes, dtype=object)[self.node_idx]

    @property
    def hours(self) -> np.ndarray:
        return hour_of_day(self.timestamps)

    @property
    def days(self) -> np.ndarray:
        return self.timestamps.astype("datetime64[D]")

    def record_at(self, i: int) -> PriceRecord:
        return PriceRecord(
            self.nodes[self.node_idx[i]], self.timestamps[i], float(self.dlmp[i]), float(self.rtlmp[i])
        )

    def find(self, node_id: str, timestamp) -> PriceRecord | None:
        if self._lookup is None:
            self._lookup = {
                (self.nodes[n], int(t)): i
                for i, (n, t) in enumerate(zip(self.node_idx, self.timestamps.astype(np.int64)))
            }
        i = self._lookup.get((node_id, int(np.datetime64(timestamp, "h").astype(np.int64))))
        return None if i is None else self.record_at(i)

    def to_grid(self) -> "PriceGrid":
        """Dense ``(node, day, hour)`` arrays; missing node-hours are NaN."""
        if not len(self):
            return PriceGrid(self.nodes, np.array([], dtype="datetime64[D]"),
                             np.zeros((len(self.nodes), 0, 24)), np.zeros((len(self.nodes), 0, 24)))
        day = self.days
        d0, d1 = day.min(), day.max()
        days = np.arange(d0, d1 + 1)
        dl = np.full((len(self.nodes), len(days), 24), np.nan)
        rt = np.full_like(dl, np.nan)
        di = (day - d0).astype(np.int64)
        dl[self.node_idx, di, self.hours] = self.dlmp
        rt[self.node_idx, di, self.hours] = self.rtlmp
        return PriceGrid(self.nodes, days, dl, rt)


@dataclass
class PriceGrid:
    """Dense price cube indexed ``[node, day, hour]``."""

    nodes: tuple
    days: np.ndarray
    dlmp: np.ndarray
    rtlmp: np.ndarray

    def node_index(self, node_id: str) -> int:
        return self.nodes.index(node_id)


def load_price_csv(path) -> PriceTable:
    """Read ``timestamp,node_id,dlmp,rtlmp`` rows into a sorted table."""
    nodes, stamps, dl, rt = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PRICE_HEADER:
            raise MarketDataError(f"{path}: header must be {','.join(PRICE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MarketDataError(f"{path}: row {lineno}: expected 4 fields, got {len(row)}")
            try:
                ts = parse_timestamp(row[0])
                d, r = float(row[2]), float(row[3])
            except (MarketDataError, ValueError) as exc:
                raise MarketDataError(f"{path}: row {lineno}: {exc}") from None
            if not (math.isfinite(d) and math.isfinite(r)):
                raise MarketDataError(f"{path}: row {lineno}: non-finite price")
            nodes.append(row[1].strip())
            stamps.append(ts)
            dl.append(d)
            rt.append(r)
    return PriceTable(nodes, np.array(stamps, dtype="datetime64[h]"), dl, rt)


def write_price_csv(prices: PriceTable, path) -> None:
    node_ids = prices.node_ids
    ts = np.datetime_as_string(prices.timestamps.astype("datetime64[m]"))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(PRICE_HEADER) + "\n")
        fh.writelines(
            f"{t}Z,{n},{_fmt_money(d)},{_fmt_money(r)}\n"
            for t, n, d, r in zip(ts, node_ids, prices.dlmp.tolist(), prices.rtlmp.tolist())
        )


# ---------------------------------------------------------------------------
# bids


@dataclass(frozen=True)
class PriceBidStep:
    quantity: float
    price: float


@dataclass(frozen=True)
class ConvergenceBid:
    """A step-wise virtual bid at one node-hour.

    Step quantities are cumulative and strictly increasing.  Supply step
    prices are non-decreasing and demand step prices non-increasing, so the
    in-the-money steps always form a prefix.
    """

    bid_id: str
    participant_id: str
    node_id: str
    date: date
    hour: int
    side: Side
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "steps", tuple(self.steps))
        steps = self.steps
        if not 1 <= len(steps) <= MAX_STEPS:
            raise MarketDataError(f"bid {self.bid_id}: {len(steps)} steps (allowed 1-{MAX_STEPS})")
        if not 0 <= self.hour <= 23:
            raise MarketDataError(f"bid {self.bid_id}: hour {self.hour} out of range")
        qty = [s.quantity for s in steps]
        prices = [s.price for s in steps]
        if not all(math.isfinite(v) for v in qty + prices):
            raise MarketDataError(f"bid {self.bid_id}: non-finite step")
        if qty[0] <= 0 or any(b <= a for a, b in zip(qty, qty[1:])):
            raise MarketDataError(f"bid {self.bid_id}: step quantities must be positive and strictly increasing")
        if self.side is Side.SUPPLY:
            ok = all(b >= a for a, b in zip(prices, prices[1:]))
        else:
            ok = all(b <= a for a, b in zip(prices, prices[1:]))
        if not ok:
            order = "non-decreasing" if self.side is Side.SUPPLY else "non-increasing"
            raise MarketDataError(f"bid {self.bid_id}: step prices must be {order}")

    @property
    def quantity(self) -> float:
        return self.steps[-1].quantity

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def prices(self) -> list:
        return [s.price for s in self.steps]

    @property
    def timestamp(self) -> np.datetime64:
        return np.datetime64(self.date, "h") + np.timedelta64(self.hour, "h")

    def mirrored(self) -> "ConvergenceBid":
        """Same steps on the opposite side, prices negated to keep ordering."""
        steps = tuple(PriceBidStep(s.quantity, -s.price) for s in self.steps)
        return ConvergenceBid(self.bid_id, self.participant_id, self.node_id,
                              self.date, self.hour, self.side.flipped, steps)


def parse_steps(text: str) -> tuple:
    steps = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        q, sep, p = chunk.partition("@")
        if not sep:
            raise MarketDataError(f"bad step {chunk!r} (expected qty@price)")
        try:
            steps.append(PriceBidStep(float(q), float(p)))
        except ValueError:
            raise MarketDataError(f"bad step {chunk!r}") from None
    return tuple(steps)


def format_steps(steps) -> str:
    return ";".join(f"{_fmt_num(s.quantity)}@{_fmt_money(s.price)}" for s in steps)


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else _fmt_money(x)


def load_bid_csv(path) -> list:
    bids = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != BID_HEADER:
            raise MarketDataError(f"{path}: header must be {','.join(BID_HEADER)}")
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(BID_HEADER):
                raise MarketDataError(f"{path}: row {lineno}: expected {len(BID_HEADER)} fields")
            try:
                bid = ConvergenceBid(
                    bid_id=row[0].strip(),
                    participant_id=row[1].strip(),
                    node_id=row[2].strip(),
                    date=date.fromisoformat(row[3].strip()),
                    hour=int(row[4]),
                    side=Side.parse(row[5]),
                    steps=parse_steps(row[6]),
                )
            except (MarketDataError, ValueError) as exc:
                raise MarketDataError(f"{path}: row {lineno}: {exc}") from None
            if bid.bid_id in seen:
                raise MarketDataError(f"{path}: row {lineno}: duplicate bid_id {bid.bid_id}")
            seen.add(bid.bid_id)
            bids.append(bid)
    return bids


def write_bid_csv(bids: Iterable[ConvergenceBid], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BID_HEADER)
        for b in bids:
            w.writerow([b.bid_id, b.participant_id, b.node_id, b.date.isoformat(),
                        b.hour, b.side.value, format_steps(b.steps)])


def load_registry_csv(path) -> dict:
    registry = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != REGISTRY_HEADER:
            raise MarketDataError(f"{path}: header must be {','.join(REGISTRY_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or row[1].strip() not in ("0", "1"):
                raise MarketDataError(f"{path}: row {lineno}: expected node_id,0|1")
            if row[0].strip() in registry:
                raise MarketDataError(f"{path}: row {lineno}: duplicate node {row[0].strip()}")
            registry[row[0].strip()] = row[1].strip() == "1"
    return registry


def write_registry_csv(registry: Mapping[str, bool], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(REGISTRY_HEADER) + "\n")
        for node in sorted(registry):
            fh.write(f"{node},{int(bool(registry[node]))}\n")


# ---------------------------------------------------------------------------
# dataset


@dataclass
class MarketDataset:
    """Prices, bids and the node registry (``node_id -> is_major``).

    ``ground_truth`` maps participant to its planted archetype mix and
    ``planted`` maps bid to its archetype; both are empty for real data.
    """

    prices: PriceTable
    bids: list
    node_registry: dict
    ground_truth: dict = field(default_factory=dict)
    planted: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = sorted({b.node_id for b in self.bids} - set(self.node_registry))
        if unknown:
            raise MarketDataError(f"bids at unregistered nodes: {', '.join(unknown[:5])}")

    def unsettleable(self) -> list:
        """Bids without a matching price record."""
        return [b for b in self.bids if self.prices.find(b.node_id, b.timestamp) is None]

    @property
    def major_nodes(self) -> set:
        return {n for n, major in self.node_registry.items() if major}


def save_dataset(dataset: MarketDataset, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "prices": out / "prices.csv",
        "bids": out / "bids.csv",
        "registry": out / "node_registry.csv",
    }
    write_price_csv(dataset.prices, paths["prices"])
    write_bid_csv(dataset.bids, paths["bids"])
    write_registry_csv(dataset.node_registry, paths["registry"])
    if dataset.ground_truth:
        paths["ground_truth"] = out / "ground_truth.csv"
        with open(paths["ground_truth"], "w", newline="") as fh:
            fh.write(",".join(GROUND_TRUTH_HEADER) + "\n")
            for pid in sorted(dataset.ground_truth):
                for arch, frac in sorted(dataset.ground_truth[pid].items()):
                    fh.write(f"{pid},{arch},{frac:.6f}\n")
    if dataset.planted:
        paths["planted"] = out / "planted.csv"
        with open(paths["planted"], "w", newline="") as fh:
            fh.write(",".join(PLANTED_HEADER) + "\n")
            for b in dataset.bids:
                fh.write(f"{b.bid_id},{dataset.planted[b.bid_id]}\n")
    return paths


def load_dataset(prices_path, bids_path, registry_path) -> MarketDataset:
    prices = load_price_csv(prices_path)
    bids = load_bid_csv(bids_path) if bids_path and Path(bids_path).exists() else []
    registry = load_registry_csv(registry_path)
    missing = sorted(set(prices.nodes) - set(registry))
    if missing:
        raise MarketDataError(f"price nodes missing from registry: {', '.join(missing[:5])}")
    ds = MarketDataset(prices, bids, registry)
    gt = Path(registry_path).with_name("ground_truth.csv")
    if gt.exists():
        with open(gt, newline="") as fh:
            for row in csv.DictReader(fh):
                ds.ground_truth.setdefault(row["participant_id"], {})[row["archetype"]] = float(row["fraction"])
    planted = Path(registry_path).with_name("planted.csv")
    if planted.exists():
        with open(planted, newline="") as fh:
            ds.planted = {row["bid_id"]: row["archetype"] for row in csv.DictReader(fh)}
    return ds


# ---------------------------------------------------------------------------
# hourly statistics


@dataclass(frozen=True)
class HourlyPriceStats:
    node_id: str
    hour: int
    avg_dlmp: float
    sample_count: int
    window: tuple


def compute_hourly_stats(prices: PriceTable, window: tuple) -> dict:
    """Mean D-LMP per ``(node_id, hour)`` over an inclusive date window.

    Returns a dict keyed by ``(node_id, hour)``; node-hours without samples
    in the window are absent.
    """
    start, end = _to_day(window[0]), _to_day(window[1])
    if end < start:
        raise ValueError("empty window")
    day = prices.days
    m = (day >= start) & (day <= end)
    key = prices.node_idx[m] * 24 + prices.hours[m]
    size = len(prices.nodes) * 24
    count = np.bincount(key, minlength=size)
    total = np.bincount(key, weights=prices.dlmp[m], minlength=size)
    win = (window[0], window[1])
    out = {}
    for k in np.flatnonzero(count):
        node = prices.nodes[k // 24]
        out[(node, int(k % 24))] = HourlyPriceStats(node, int(k % 24), float(total[k] / count[k]), int(count[k]), win)
    return out


def full_window(prices: PriceTable) -> tuple:
    d = prices.days
    return (d.min().item(), d.max().item())


# ---------------------------------------------------------------------------
# settlement


@dataclass(frozen=True)
class SettlementResult:
    bid_id: str
    cleared_quantity: float
    net_profit: float
    profit_part: float
    loss_part: float

    @property
    def cleared(self) -> bool:
        return self.cleared_quantity > 0


def cleared_quantity(side: Side, steps, dlmp: float) -> float:
    """Quantity at the deepest in-the-money step; clearing at equality counts."""
    q = 0.0
    for s in steps:
        if (s.price <= dlmp) if side is Side.SUPPLY else (s.price >= dlmp):
            q = s.quantity
        else:
            break
    return q


def _settlement(bid_id: str, side: Side, q: float, dlmp: float, rtlmp: float) -> SettlementResult:
    eta = q * (dlmp - rtlmp) if side is Side.SUPPLY else q * (rtlmp - dlmp)
    eta = eta + 0.0
    return SettlementResult(bid_id, q, eta, max(eta, 0.0), min(eta, 0.0))


def settle_bid(bid: ConvergenceBid, record: PriceRecord) -> SettlementResult:
    if record.node_id != bid.node_id or record.timestamp != bid.timestamp:
        raise MarketDataError(
            f"record ({record.node_id}, {format_timestamp(record.timestamp)}) does not match bid {bid.bid_id}"
        )
    q = cleared_quantity(bid.side, bid.steps, record.dlmp)
    return _settlement(bid.bid_id, bid.side, q, record.dlmp, record.rtlmp)


def settle_all(dataset: MarketDataset, strict: bool = True) -> list:
    """Settle every bid; unsettleable bids raise unless ``strict`` is false."""
    out = []
    for b in dataset.bids:
        rec = dataset.prices.find(b.node_id, b.timestamp)
        if rec is None:
            if strict:
                raise MarketDataError(f"bid {b.bid_id} has no price record")
            continue
        out.append(settle_bid(b, rec))
    return out


@dataclass
class MarketSummary:
    """Monthly cleared energy and net profit across all participants."""

    months: list
    cleared_mwh: dict
    net_profit: dict
    participant_count: int
    active_node_count: int

    def rows(self) -> list:
        return [(m, self.cleared_mwh[m], self.net_profit[m]) for m in self.months]


def summarize_dataset(dataset: MarketDataset, settlements=None) -> MarketSummary:
    if settlements is None:
        settlements = settle_all(dataset)
    months = []
    if len(dataset.prices):
        d = dataset.prices.days
        lo = d.min().astype("datetime64[M]")
        hi = d.max().astype("datetime64[M]")
        months = [str(m) for m in np.arange(lo, hi + 1)]
    by_id = {b.bid_id: b for b in dataset.bids}
    cleared = {m: 0.0 for m in months}
    profit = {m: 0.0 for m in months}
    for s in settlements:
        m = by_id[s.bid_id].date.isoformat()[:7]
        if m not in cleared:
            cleared[m] = profit[m] = 0.0
            months.append(m)
        cleared[m] += s.cleared_quantity
        profit[m] += s.net_profit
    months.sort()
    return MarketSummary(
        months,
        cleared,
        profit,
        len({b.participant_id for b in dataset.bids}),
        len({b.node_id for b in dataset.bids}),
    )


def write_summary_csv(summary: MarketSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("month,cleared_mwh,net_profit\n")
        for m, q, p in summary.rows():
            fh.write(f"{m},{_fmt_money(q)},{_fmt_money(p)}\n")


# ---------------------------------------------------------------------------
# synthetic markets


@dataclass(frozen=True)
class ParticipantSpec:
    """A scripted bidder: ``schedule`` maps archetype -> bids per day."""

    participant_id: str
    schedule: tuple
    n_nodes: int = 8

    def __post_init__(self):
        sched = self.schedule.items() if isinstance(self.schedule, Mapping) else self.schedule
        sched = tuple(sorted((str(a), int(n)) for a, n in sched))
        for a, n in sched:
            if a not in ARCHETYPES:
                raise ValueError(f"unknown archetype {a!r}")
            if n < 0:
                raise ValueError("bids per day must be >= 0")
        object.__setattr__(self, "schedule", sched)


@dataclass(frozen=True)
class GeneratorConfig:
    """Settings for :func:`generate_synthetic_market`.

    D-LMP is an hourly profile per node plus clipped Gaussian noise plus
    injected spikes.  A spike's size is ``spike_threshold * noise_scale``
    plus a Lomax draw scaled by ``spike_scale`` and capped at ``spike_cap``.
    ``spike_frequency`` is the mean per-hour spike probability at a regular
    node; per-node rates are log-normally spread by ``spike_dispersion`` and
    scaled by ``major_spike_factor`` at major nodes.
    """

    n_nodes: int = 20
    n_major: int = 3
    n_days: int = 60
    start: date = date(2019, 1, 1)
    participants: tuple = ()
    base_price: float = 40.0
    daily_amplitude: float = 12.0
    node_spread: float = 6.0
    noise_scale: float = 3.0
    noise_clip: float = 3.0
    rt_noise_scale: float = 4.0
    spike_frequency: float = 0.01
    spike_dispersion: float = 1.0
    major_spike_factor: float = 0.1
    spike_threshold: float = 4.0
    spike_scale: float = 40.0
    spike_tail: float = 2.5
    spike_cap: float = 1000.0
    spike_positive_fraction: float = 0.5
    rt_follow_prob: float = 0.3

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if not 0 <= self.n_major <= self.n_nodes:
            raise ValueError("n_major must be in [0, n_nodes]")
        if self.n_days < 1:
            raise ValueError("n_days must be >= 1")
        for name in ("noise_scale", "noise_clip", "rt_noise_scale", "spike_scale",
                     "spike_threshold", "spike_cap", "spike_dispersion", "major_spike_factor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.spike_frequency <= 1:
            raise ValueError("spike_frequency must be in [0, 1]")
        for name in ("spike_positive_fraction", "rt_follow_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.spike_tail <= 0:
            raise ValueError("spike_tail must be > 0")
        parts = tuple(p if isinstance(p, ParticipantSpec) else ParticipantSpec(**p) for p in self.participants)
        object.__setattr__(self, "participants", parts)

    @property
    def noise_bound(self) -> float:
        """Largest possible |D-LMP - sample hourly mean| without spikes (incl. cent rounding)."""
        return 2.0 * self.noise_clip * self.noise_scale + 0.01

    @property
    def spike_floor(self) -> float:
        return self.spike_threshold * self.noise_scale


def node_names(n_nodes: int, n_major: int) -> list:
    return [f"HUB{i:02d}" for i in range(n_major)] + [f"N{i:03d}" for i in range(n_major, n_nodes)]


def _hourly_profile(hours: np.ndarray) -> np.ndarray:
    # two-peak daily shape in [-1, 1]
    return 0.6 * np.sin(2 * np.pi * (hours - 7) / 24) + 0.4 * np.sin(4 * np.pi * (hours - 3) / 24)


def generate_prices(config: GeneratorConfig, rng: np.random.Generator):
    """Return ``(node names, days, dlmp, rtlmp, hourly mean)``; arrays are ``[node, day, hour]``."""
    c = config
    nodes = node_names(c.n_nodes, c.n_major)
    N, D = c.n_nodes, c.n_days
    days = np.arange(_to_day(c.start), _to_day(c.start) + D)
    level = c.base_price + c.node_spread * rng.standard_normal(N)
    amp = c.daily_amplitude * rng.uniform(0.7, 1.3, N)
    mean = level[:, None] + amp[:, None] * _hourly_profile(np.arange(24))[None, :]
    clip = c.noise_clip
    noise = np.clip(rng.standard_normal((N, D, 24)), -clip, clip) * c.noise_scale
    dlmp = mean[:, None, :] + noise
    rt_noise = np.clip(rng.standard_normal((N, D, 24)), -clip, clip) * c.rt_noise_scale
    rtlmp = mean[:, None, :] + rt_noise

    is_major = np.arange(N) < c.n_major
    rate = c.spike_frequency * np.exp(c.spike_dispersion * rng.standard_normal(N) - 0.5 * c.spike_dispersion ** 2)
    rate = np.where(is_major, rate * c.major_spike_factor, rate)
    rate = np.clip(rate, 0.0, 1.0)
    spike = rng.random((N, D, 24)) < rate[:, None, None]
    sign = np.where(rng.random((N, D, 24)) < c.spike_positive_fraction, 1.0, -1.0)
    size = np.minimum(c.spike_floor + c.spike_scale * rng.pareto(c.spike_tail, (N, D, 24)), c.spike_cap)
    follow = rng.random((N, D, 24)) < c.rt_follow_prob
    factor = rng.uniform(0.6, 1.4, (N, D, 24))
    jump = np.where(spike, sign * size, 0.0)
    dlmp = dlmp + jump
    rtlmp = rtlmp + np.where(spike & follow, jump * factor, 0.0)
    return nodes, days, np.round(dlmp, 2), np.round(rtlmp, 2), mean


def _make_steps(prices, q0, dq):
    return tuple(PriceBidStep(float(q0 + k * dq), float(round(p, 2))) for k, p in enumerate(prices))


def _archetype_bid(arch, rng, side_fixed, dl, rt, mu):
    """Side and step prices for one scripted bid at a node-hour."""
    if arch == PRICE_FORECASTING:
        f_dl = dl + rng.normal(0.0, 1.0)
        f_rt = rt + rng.normal(0.0, 1.0)
        side = Side.SUPPLY if f_dl > f_rt else Side.DEMAND
        k = int(rng.integers(1, 5))
        if k == 1:
            off = rng.uniform(0.0, 2.0)
            prices = [f_dl - off] if side is Side.SUPPLY else [f_dl + off]
        else:
            lo = f_dl - rng.uniform(2.0, 6.0)
            hi = f_dl + rng.uniform(2.0, 6.0)
            grid = np.linspace(lo, hi, k)
            prices = list(grid) if side is Side.SUPPLY else list(grid[::-1])
    elif arch == SELF_SCHEDULING:
        side = Side.SUPPLY if (dl - rt + rng.normal(0.0, 3.0)) > 0 else Side.DEMAND
        k = 1
        off = rng.uniform(100.0, 150.0)
        prices = [mu - off] if side is Side.SUPPLY else [mu + off]
    else:
        side = side_fixed
        k = int(rng.integers(1, 4))
        m = rng.uniform(40.0, 120.0)
        if side is Side.SUPPLY:
            prices = [mu + m + 5.0 * j for j in range(k)]
        else:
            prices = [mu - m - 5.0 * j for j in range(k)]
    return side, prices


def generate_synthetic_market(config: GeneratorConfig, seed: int) -> MarketDataset:
    """Deterministic synthetic two-settlement market for a ``(config, seed)`` pair.

    Each participant emits exactly ``n_days * bids_per_day`` bids per scripted
    archetype.  Price-forecasting bidders favour major nodes, opportunistic
    bidders use regular nodes with a fixed side per node, self-schedulers use
    any node.
    """
    rng = np.random.default_rng(seed)
    nodes, days, dlmp, rtlmp, mean = generate_prices(config, rng)
    grid = PriceGrid(tuple(nodes), days, dlmp, rtlmp)
    prices = PriceTable.from_grid(grid)
    registry = {n: i < config.n_major for i, n in enumerate(nodes)}
    major_idx = np.arange(config.n_major)
    regular_idx = np.arange(config.n_major, config.n_nodes)
    all_idx = np.arange(config.n_nodes)

    bids, planted, truth = [], {}, {}
    for p in config.participants:
        prng = np.random.default_rng([seed, zlib.crc32(p.participant_id.encode())])
        total = sum(n for _, n in p.schedule)
        truth[p.participant_id] = {a: (n / total if total else 0.0) for a, n in p.schedule}
        pools = {}
        for arch, _ in p.schedule:
            if arch == PRICE_FORECASTING:
                pool = major_idx if len(major_idx) else all_idx
            elif arch == OPPORTUNISTIC:
                pool = regular_idx if len(regular_idx) else all_idx
            else:
                pool = all_idx
            k = min(p.n_nodes, len(pool))
            pools[arch] = np.sort(prng.choice(pool, size=k, replace=False))
        opp_side = {int(n): (Side.SUPPLY if prng.random() < 0.5 else Side.DEMAND) for n in pools.get(OPPORTUNISTIC, [])}
        seq = 0
        for d in range(config.n_days):
            day = days[d].item()
            for arch, per_day in p.schedule:
                for _ in range(per_day):
                    n = int(prng.choice(pools[arch]))
                    h = int(prng.integers(0, 24))
                    side, step_prices = _archetype_bid(
                        arch, prng, opp_side.get(n), dlmp[n, d, h], rtlmp[n, d, h], mean[n, h]
                    )
                    q0 = float(prng.integers(5, 51))
                    dq = float(prng.integers(5, 26))
                    bid_id = f"{p.participant_id}-{seq:06d}"
                    seq += 1
                    bids.append(ConvergenceBid(bid_id, p.participant_id, nodes[n], day, h, side,
                                               _make_steps(step_prices, q0, dq)))
                    planted[bid_id] = arch
    return MarketDataset(prices, bids, registry, truth, planted)

"""Participant market shares and performance metrics.

CSR is the percentage of submitted bids that cleared; LPR is total loss over
total profit, in percent.  A bid counts as cleared when any quantity
cleared.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from virtualbid.market_data import MarketDataset, Side

SHARE_METRICS = ("share_submitted_count", "share_cleared_count", "share_submitted_mwh", "share_cleared_mwh")


@dataclass(frozen=True)
class ParticipantShare:
    participant_id: str
    share_submitted_count: float
    share_cleared_count: float
    share_submitted_mwh: float
    share_cleared_mwh: float


@dataclass(frozen=True)
class PerformanceReport:
    participant_id: str
    csr: float
    lpr: float
    net_profit: float
    total_profit: float
    total_loss: float


def _by_id(settlements):
    return {s.bid_id: s for s in settlements}


def compute_shares(dataset: MarketDataset, settlements) -> list:
    """Per-participant percentages of submitted/cleared counts and MWh."""
    sett = _by_id(settlements)
    missing = [b.bid_id for b in dataset.bids if b.bid_id not in sett]
    if missing:
        raise ValueError(f"settlements missing for {len(missing)} bids, e.g. {missing[0]}")
    acc = {}
    for b in dataset.bids:
        s = sett[b.bid_id]
        row = acc.setdefault(b.participant_id, [0.0, 0.0, 0.0, 0.0])
        row[0] += 1
        row[1] += s.cleared_quantity > 0
        row[2] += b.quantity
        row[3] += s.cleared_quantity
    totals = [sum(r[i] for r in acc.values()) for i in range(4)]
    out = []
    for pid in sorted(acc):
        vals = [100.0 * acc[pid][i] / totals[i] if totals[i] > 0 else 0.0 for i in range(4)]
        out.append(ParticipantShare(pid, *vals))
    return out


def _ranked(shares, metric):
    return sorted(shares, key=lambda s: (-getattr(s, metric), s.participant_id))


def select_most_present(shares, top_k: int) -> dict:
    """Union of the top-k participants under each share metric.

    Returns ``{participant_id: alias}``; aliases run 1..n in descending
    order of submitted-count share (ties by participant id).
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    chosen = set()
    for metric in SHARE_METRICS:
        chosen.update(s.participant_id for s in _ranked(shares, metric)[:top_k])
    ordered = [s.participant_id for s in _ranked(shares, SHARE_METRICS[0]) if s.participant_id in chosen]
    return {pid: i + 1 for i, pid in enumerate(ordered)}


def compute_csr(bids, settlements) -> float:
    bids = list(bids)
    if not bids:
        raise ValueError("CSR undefined for an empty bid set")
    sett = _by_id(settlements)
    cleared = sum(sett[b.bid_id].cleared_quantity > 0 for b in bids)
    return 100.0 * cleared / len(bids)


def profit_and_loss(settlements) -> tuple:
    """``(total profit >= 0, total loss >= 0)`` from net settlements."""
    profit = sum(s.net_profit for s in settlements if s.net_profit > 0)
    loss = -sum(s.net_profit for s in settlements if s.net_profit < 0)
    return float(profit), float(loss)


def lpr_from_totals(profit: float, loss: float) -> float:
    if profit > 0:
        return 100.0 * loss / profit
    return math.inf if loss > 0 else 0.0


def compute_lpr(settlements) -> float:
    """Loss-to-profit ratio in percent; ``inf`` when only losses occurred."""
    return lpr_from_totals(*profit_and_loss(settlements))


def performance_reports(dataset: MarketDataset, settlements) -> list:
    sett = _by_id(settlements)
    groups = {}
    for b in dataset.bids:
        groups.setdefault(b.participant_id, []).append(b)
    out = []
    for pid in sorted(groups):
        bids = groups[pid]
        ss = [sett[b.bid_id] for b in bids]
        profit, loss = profit_and_loss(ss)
        out.append(PerformanceReport(pid, compute_csr(bids, ss), lpr_from_totals(profit, loss),
                                     profit - loss, profit, loss))
    return out


@dataclass(frozen=True)
class BidCharacteristics:
    """Cleared-bid profile of one participant (locations, sides, steps, size)."""

    participant_id: str
    share_nodes: float
    share_supply: float
    avg_steps: float
    avg_quantity: float


def bid_characteristics(dataset: MarketDataset, settlements) -> list:
    sett = _by_id(settlements)
    market_nodes = {b.node_id for b in dataset.bids}
    groups = {}
    for b in dataset.bids:
        if sett[b.bid_id].cleared_quantity > 0:
            groups.setdefault(b.participant_id, []).append(b)
    out = []
    for pid in sorted({b.participant_id for b in dataset.bids}):
        cl = groups.get(pid, [])
        if not cl:
            out.append(BidCharacteristics(pid, 0.0, 0.0, 0.0, 0.0))
            continue
        out.append(BidCharacteristics(
            pid,
            100.0 * len({b.node_id for b in cl}) / len(market_nodes),
            100.0 * sum(b.side is Side.SUPPLY for b in cl) / len(cl),
            sum(b.n_steps for b in cl) / len(cl),
            sum(sett[b.bid_id].cleared_quantity for b in cl) / len(cl),
        ))
    return out


def yearly_csr(dataset: MarketDataset, settlements) -> dict:
    """``{participant: {year: CSR}}`` for years in which the participant bid."""
    sett = _by_id(settlements)
    groups = {}
    for b in dataset.bids:
        groups.setdefault((b.participant_id, b.date.year), []).append(b)
    out = {}
    for (pid, year), bids in sorted(groups.items()):
        out.setdefault(pid, {})[year] = compute_csr(bids, [sett[b.bid_id] for b in bids])
    return out


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.4f}"


def write_shares_table(shares, aliases: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant_id", "alias", *SHARE_METRICS])
        for s in _ranked(shares, SHARE_METRICS[0]):
            w.writerow([s.participant_id, aliases.get(s.participant_id, "")]
                       + [_fmt(getattr(s, m)) for m in SHARE_METRICS])


def write_performance_table(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant_id", "csr", "lpr", "net_profit", "total_profit", "total_loss"])
        for r in reports:
            w.writerow([r.participant_id, _fmt(r.csr), _fmt(r.lpr), _fmt(r.net_profit),
                        _fmt(r.total_profit), _fmt(r.total_loss)])


def write_characteristics_table(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant_id", "share_nodes", "share_supply", "avg_steps", "avg_quantity"])
        for r in rows:
            w.writerow([r.participant_id, _fmt(r.share_nodes), _fmt(r.share_supply),
                        _fmt(r.avg_steps), _fmt(r.avg_quantity)])


def write_yearly_csr_table(table: dict, path) -> None:
    years = sorted({y for row in table.values() for y in row})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant_id", *years])
        for pid, row in sorted(table.items()):
            w.writerow([pid] + [_fmt(row[y]) if y in row else "-" for y in years])

"""Composite bidding: node labeling, strategy selection, bids, backtest.

Every day and at every node the composite strategy picks one of three
bidding styles from forecast accuracy and the node's spike-capture label:

1. price forecasting, when both LMP forecasts are accurate;
2. self-scheduling, when only the sign of the day-ahead/real-time gap is;
3. spike capture, otherwise, at nodes labeled from their own history.

The backtester replays this over a price history with a synthetic
forecaster (truth plus noise, plus random sign flips of the forecast gap).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import date
from enum import Enum

import numpy as np

from virtualbid.market_data import (
    ConvergenceBid,
    MarketDataError,
    MarketDataset,
    PriceBidStep,
    PriceGrid,
    PriceTable,
    Side,
)
from virtualbid.metrics import lpr_from_totals
from virtualbid.spike import OptimizerConfig, SpikeInstance, best_m, solve_breakpoints


class Strategy(str, Enum):
    PRICE_FORECASTING = "strategy1_price_forecasting"
    SELF_SCHEDULING = "strategy2_self_scheduling"
    OPPORTUNISTIC = "strategy3_opportunistic"
    NO_BID = "no_bid"


STRATEGY_CODES = {s: i for i, s in enumerate(Strategy)}


@dataclass(frozen=True, eq=False)
class NodeLabel:
    """Spike-capture label of a node for the next day.

    Schedules are per hour of day; a side's schedule is NaN when that side
    had no feasible solution.
    """

    node_id: str
    demand_cb: bool
    supply_cb: bool
    demand_schedule: np.ndarray
    supply_schedule: np.ndarray
    objectives: dict
    m_star: dict
    feasible: dict

    @property
    def labeled(self) -> bool:
        return self.demand_cb or self.supply_cb


@dataclass(frozen=True)
class ForecastAccuracy:
    a_dlmp: float
    a_rtlmp: float
    a_sign: float


@dataclass(frozen=True)
class StrategyChoice:
    node_id: str
    hour: int
    choice: Strategy


@dataclass(frozen=True)
class BacktestConfig:
    """Backtest settings.

    ``forecast_noise`` is the standard deviation of the synthetic LMP
    forecast error at major nodes and ``forecast_noise_regular`` at regular
    nodes; ``sign_error_rate`` is the probability that the forecast gap's
    sign is flipped.
    """

    tau_dlmp: float = 0.8
    tau_rtlmp: float = 0.8
    tau_sign: float = 0.8
    strategy1_margin: float = 2.0
    strategy2_offset: float = 500.0
    quantity: float = 50.0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    history_window: int = 365
    accuracy_window: int = 30
    forecast_noise: float = 1.0
    forecast_noise_regular: float = 6.0
    sign_error_rate: float = 0.3
    forecast_seed: int = 0

    def __post_init__(self):
        for name in ("tau_dlmp", "tau_rtlmp", "tau_sign", "sign_error_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        for name in ("strategy1_margin", "strategy2_offset", "quantity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.accuracy_window < 7:
            raise ValueError("accuracy_window must be >= 7 days")
        if self.history_window < self.accuracy_window:
            raise ValueError("history_window must be >= accuracy_window")
        if self.forecast_noise < 0 or self.forecast_noise_regular < 0:
            raise ValueError("forecast noise must be >= 0")


# ---------------------------------------------------------------------------
# node labeling


def _label_from_window(node_id: str, dl: np.ndarray, rt: np.ndarray, avg: np.ndarray, config: OptimizerConfig) -> NodeLabel:
    """Label one node from ``(days, 24)`` windows and its hourly means."""
    ok = np.isfinite(dl) & np.isfinite(rt)
    hours = np.broadcast_to(np.arange(24), dl.shape)[ok]
    dl_t, rt_t, avg_t = dl[ok], rt[ok], avg[hours]
    flags, sched, objs, ms, feas = {}, {}, {}, {}, {}
    for side in (Side.DEMAND, Side.SUPPLY):
        if side is Side.DEMAND:
            u, eta = avg_t - dl_t, rt_t - dl_t
        else:
            u, eta = dl_t - avg_t, dl_t - rt_t
        m, feasible = best_m(u, eta, config)
        obj = float(np.where(u >= m, eta, 0.0).sum())
        objs[side], ms[side], feas[side] = obj, m, feasible
        flags[side] = feasible and obj > config.theta
        sched[side] = (avg - m if side is Side.DEMAND else avg + m) if feasible else np.full(24, np.nan)
    return NodeLabel(node_id, flags[Side.DEMAND], flags[Side.SUPPLY], sched[Side.DEMAND],
                     sched[Side.SUPPLY], objs, ms, feas)


def window_hourly_mean(dl: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        n = np.isfinite(dl).sum(axis=0)
        return np.where(n > 0, np.nansum(dl, axis=0) / np.maximum(n, 1), np.nan)


def label_nodes(prices, config: OptimizerConfig, as_of=None, window_days: int = 365) -> dict:
    """Label every node for day ``as_of`` from the preceding ``window_days``.

    ``prices`` is a :class:`PriceTable` or :class:`PriceGrid`; ``as_of``
    defaults to the day after the last price day.  Nodes without a full
    window of days are skipped.
    """
    grid = prices.to_grid() if isinstance(prices, PriceTable) else prices
    if len(grid.days) == 0:
        return {}
    end = (grid.days[-1] + 1) if as_of is None else np.datetime64(as_of, "D")
    start = end - window_days
    sel = (grid.days >= start) & (grid.days < end)
    out = {}
    if sel.sum() < window_days:
        return out
    for i, node in enumerate(grid.nodes):
        dl, rt = grid.dlmp[i, sel], grid.rtlmp[i, sel]
        if not (np.isfinite(dl).any(axis=1).sum() >= window_days):
            continue
        out[node] = _label_from_window(node, dl, rt, window_hourly_mean(dl), config)
    return out


def spike_instance(prices, node_id: str, side: Side, as_of, window_days: int = 365) -> SpikeInstance:
    """Training instance of a node: the window's hours with their hourly means."""
    grid = prices.to_grid() if isinstance(prices, PriceTable) else prices
    i = grid.node_index(node_id)
    end = np.datetime64(as_of, "D")
    sel = (grid.days >= end - window_days) & (grid.days < end)
    dl, rt = grid.dlmp[i, sel], grid.rtlmp[i, sel]
    avg = window_hourly_mean(dl)
    ok = np.isfinite(dl) & np.isfinite(rt)
    hours = np.broadcast_to(np.arange(24), dl.shape)[ok]
    return SpikeInstance(side, dl[ok], rt[ok], avg[hours])


# ---------------------------------------------------------------------------
# forecasts and accuracy


def _relative_accuracy(forecast, actual) -> float:
    mae = float(np.mean(np.abs(forecast - actual)))
    ref = float(np.mean(np.abs(actual - actual.mean())))
    if ref == 0.0:
        return 1.0 if mae == 0.0 else 0.0
    return max(0.0, 1.0 - mae / ref)


def assess_forecast_accuracy(f_dlmp, f_rtlmp, dlmp, rtlmp) -> ForecastAccuracy:
    """Accuracy of paired hourly forecasts over a trailing window (>= 7 days).

    LMP accuracy is ``1 - MAE / MAD`` clipped at 0, where MAD is the mean
    absolute deviation of the actuals from their own mean (the error of a
    flat forecast).  Sign accuracy is the share of hours where the forecast
    gap has the actual gap's sign; a zero gap on either side counts as a
    match.
    """
    arrs = [np.asarray(a, dtype=float).ravel() for a in (f_dlmp, f_rtlmp, dlmp, rtlmp)]
    if any(a.shape != arrs[0].shape for a in arrs):
        raise ValueError("forecast and actual arrays must have equal length")
    ok = np.all([np.isfinite(a) for a in arrs], axis=0)
    fd, fr, d, r = (a[ok] for a in arrs)
    if len(d) < 7 * 24:
        raise ValueError("need at least 7 days of paired forecast/actual history")
    sf, sa = np.sign(fd - fr), np.sign(d - r)
    match = (sf == sa) | (sf == 0) | (sa == 0)
    return ForecastAccuracy(_relative_accuracy(fd, d), _relative_accuracy(fr, r), float(match.mean()))


def synthetic_forecasts(grid: PriceGrid, major: np.ndarray, config: BacktestConfig) -> tuple:
    """Truth plus Gaussian noise; the forecast gap's sign is flipped with
    probability ``sign_error_rate`` by mirroring the pair about its midpoint.
    """
    rng = np.random.default_rng(config.forecast_seed)
    shape = grid.dlmp.shape
    sigma = np.where(np.asarray(major, dtype=bool), config.forecast_noise, config.forecast_noise_regular)[:, None, None]
    fd = grid.dlmp + sigma * rng.standard_normal(shape)
    fr = grid.rtlmp + sigma * rng.standard_normal(shape)
    flip = rng.random(shape) < config.sign_error_rate
    actual = np.sign(grid.dlmp - grid.rtlmp)
    flip &= (np.sign(fd - fr) == actual) & (actual != 0)
    mid = 0.5 * (fd + fr)
    half = 0.5 * (fd - fr)
    half = np.where(flip, -half, half)
    return mid + half, mid - half


# ---------------------------------------------------------------------------
# strategy selection and bids


def select_strategy(label: NodeLabel | None, acc: ForecastAccuracy, config: BacktestConfig, hour: int = 0) -> StrategyChoice:
    node_id = label.node_id if label is not None else ""
    if acc.a_dlmp >= config.tau_dlmp and acc.a_rtlmp >= config.tau_rtlmp:
        choice = Strategy.PRICE_FORECASTING
    elif acc.a_sign >= config.tau_sign:
        choice = Strategy.SELF_SCHEDULING
    elif label is not None and label.labeled:
        choice = Strategy.OPPORTUNISTIC
    else:
        choice = Strategy.NO_BID
    return StrategyChoice(node_id, hour, choice)


def _one_step(bid_id, node_id, day, hour, side, price, quantity, participant):
    return ConvergenceBid(bid_id, participant, node_id, day, hour, side,
                          (PriceBidStep(float(quantity), float(price)),))


def generate_bids(choice: StrategyChoice, forecast: tuple, avg_dlmp: float, label: NodeLabel | None,
                  config: BacktestConfig, day: date, participant: str = "composite") -> list:
    """Single-step bids for one node-hour.

    ``forecast`` is ``(dlmp_hat, rtlmp_hat)`` for the hour and ``avg_dlmp``
    the hour's historical mean.
    """
    f_dl, f_rt = forecast
    h, node = choice.hour, choice.node_id
    q = config.quantity
    tag = f"{node}-{day.isoformat()}-{h:02d}"
    if choice.choice is Strategy.PRICE_FORECASTING:
        if f_dl > f_rt:
            return [_one_step(f"{tag}-S1S", node, day, h, Side.SUPPLY, f_dl - config.strategy1_margin, q, participant)]
        if f_dl < f_rt:
            return [_one_step(f"{tag}-S1D", node, day, h, Side.DEMAND, f_dl + config.strategy1_margin, q, participant)]
        return []
    if choice.choice is Strategy.SELF_SCHEDULING:
        if f_dl > f_rt:
            return [_one_step(f"{tag}-S2S", node, day, h, Side.SUPPLY, avg_dlmp - config.strategy2_offset, q, participant)]
        if f_dl < f_rt:
            return [_one_step(f"{tag}-S2D", node, day, h, Side.DEMAND, avg_dlmp + config.strategy2_offset, q, participant)]
        return []
    if choice.choice is Strategy.OPPORTUNISTIC:
        if label is None or not label.labeled:
            raise ValueError(f"strategy 3 at {node} needs a labeled node")
        out = []
        if label.demand_cb:
            out.append(_one_step(f"{tag}-S3D", node, day, h, Side.DEMAND, label.demand_schedule[h], q, participant))
        if label.supply_cb:
            out.append(_one_step(f"{tag}-S3S", node, day, h, Side.SUPPLY, label.supply_schedule[h], q, participant))
        return out
    return []


# ---------------------------------------------------------------------------
# backtest


TRADE_DTYPE = np.dtype([
    ("day", "datetime64[D]"), ("node", np.int64), ("hour", np.int64), ("strategy", np.int64),
    ("side", "U1"), ("price", float), ("quantity", float), ("cleared_quantity", float), ("net_profit", float),
])
LABEL_DTYPE = np.dtype([
    ("day", "datetime64[D]"), ("node", np.int64), ("side", "U1"), ("m_star", float),
    ("objective", float), ("profit", float), ("loss", float),
])


@dataclass
class BacktestResult:
    config: BacktestConfig
    nodes: tuple
    days: np.ndarray
    choices: np.ndarray
    trades: np.ndarray
    label_log: np.ndarray
    accuracy: np.ndarray

    def strategy_trades(self, strategy: Strategy | None) -> np.ndarray:
        if strategy is None:
            return self.trades
        return self.trades[self.trades["strategy"] == STRATEGY_CODES[strategy]]

    def stats(self, strategy: Strategy | None = None) -> dict:
        tr = self.strategy_trades(strategy)
        cleared = tr[tr["cleared_quantity"] > 0]
        profit = float(tr["net_profit"][tr["net_profit"] > 0].sum())
        loss = float(-tr["net_profit"][tr["net_profit"] < 0].sum())
        return {
            "bids": int(len(tr)),
            "cleared": int(len(cleared)),
            "csr": 100.0 * len(cleared) / len(tr) if len(tr) else 0.0,
            "net_profit": profit - loss,
            "total_profit": profit,
            "total_loss": loss,
            "lpr": lpr_from_totals(profit, loss),
            "nodes": int(len(np.unique(cleared["node"]))),
            "days": int(len(np.unique(cleared["day"]))),
        }

    @property
    def labeled_nodes(self) -> int:
        return int(len(np.unique(self.label_log["node"])))

    def case_row(self) -> dict:
        """Spike-capture results in the layout of a hyperparameter case table."""
        s3 = self.stats(Strategy.OPPORTUNISTIC)
        opt = self.config.optimizer
        return {
            "epsilon": opt.epsilon,
            "theta": opt.theta,
            "labeled_nodes": self.labeled_nodes,
            "node": s3["nodes"],
            "day": s3["days"],
            "eta": s3["net_profit"],
            "lpr": s3["lpr"],
        }

    def summary(self) -> dict:
        counts = {s.value: int((self.choices == STRATEGY_CODES[s]).sum()) for s in Strategy}
        return {
            "evaluation_days": int(len(self.days)),
            "first_day": str(self.days[0]) if len(self.days) else None,
            "last_day": str(self.days[-1]) if len(self.days) else None,
            "nodes": len(self.nodes),
            "choice_counts": counts,
            "overall": self.stats(None),
            "by_strategy": {s.value: self.stats(s) for s in Strategy if s is not Strategy.NO_BID},
            "case": self.case_row(),
        }


def _settle_arrays(side_supply, price, dl, rt, q):
    clears = np.where(side_supply, price <= dl, price >= dl)
    cq = np.where(clears, q, 0.0)
    eta = np.where(side_supply, cq * (dl - rt), cq * (rt - dl)) + 0.0
    return cq, eta


def run_backtest(dataset: MarketDataset, config: BacktestConfig, forecasts: tuple | None = None) -> BacktestResult:
    """Replay the composite strategy day by day after the first history window.

    Each evaluation day: hourly means and node labels from the trailing
    ``history_window`` days, forecast accuracy from the trailing
    ``accuracy_window`` days, one strategy per node, single-step bids,
    settlement against that day's prices.  ``forecasts`` optionally supplies
    ``(dlmp_hat, rtlmp_hat)`` arrays shaped like the price grid.
    """
    grid = dataset.prices.to_grid()
    N, D, _ = grid.dlmp.shape
    W, A = config.history_window, config.accuracy_window
    if D <= W:
        raise MarketDataError(f"need more than {W} days of prices, got {D}")
    major = np.array([bool(dataset.node_registry.get(n, False)) for n in grid.nodes])
    fd, fr = forecasts if forecasts is not None else synthetic_forecasts(grid, major, config)
    if fd.shape != grid.dlmp.shape or fr.shape != grid.dlmp.shape:
        raise ValueError("forecast arrays must match the price grid")
    opt = config.optimizer
    q = config.quantity
    hours = np.arange(24)

    dl_all, rt_all = grid.dlmp, grid.rtlmp
    finite = np.isfinite(dl_all)
    csum = np.concatenate([np.zeros((N, 1, 24)), np.cumsum(np.where(finite, dl_all, 0.0), axis=1)], axis=1)
    ccnt = np.concatenate([np.zeros((N, 1, 24)), np.cumsum(finite, axis=1)], axis=1)
    day_has = finite.any(axis=2)
    cday = np.concatenate([np.zeros((N, 1)), np.cumsum(day_has, axis=1)], axis=1)

    eval_days = np.arange(W, D)
    choices = np.full((len(eval_days), N), STRATEGY_CODES[Strategy.NO_BID], dtype=np.int64)
    acc_log = np.zeros((len(eval_days), N, 3))
    trades, labels = [], []
    for k, d in enumerate(eval_days):
        day = grid.days[d].item()
        cnt = ccnt[:, d, :] - ccnt[:, d - W, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            avg = (csum[:, d, :] - csum[:, d - W, :]) / cnt
        full = (cday[:, d] - cday[:, d - W]) >= W
        for i in range(N):
            node = grid.nodes[i]
            label = None
            if full[i]:
                label = _label_from_window(node, dl_all[i, d - W:d], rt_all[i, d - W:d], avg[i], opt)
                if label.labeled:
                    _log_label(labels, grid.days[d], i, label, dl_all[i, d - W:d], rt_all[i, d - W:d], avg[i])
            try:
                acc = assess_forecast_accuracy(fd[i, d - A:d], fr[i, d - A:d], dl_all[i, d - A:d], rt_all[i, d - A:d])
            except ValueError:
                acc = ForecastAccuracy(0.0, 0.0, 0.0)
            acc_log[k, i] = (acc.a_dlmp, acc.a_rtlmp, acc.a_sign)
            choice = select_strategy(label, acc, config).choice
            choices[k, i] = STRATEGY_CODES[choice]
            dl, rt = dl_all[i, d], rt_all[i, d]
            ok = np.isfinite(dl) & np.isfinite(rt)
            if choice is Strategy.NO_BID or not ok.any():
                continue
            fdl, frt = fd[i, d], fr[i, d]
            sides, prices, hrs = [], [], []
            if choice is Strategy.PRICE_FORECASTING:
                sup = fdl > frt
                dem = fdl < frt
                prices.append(np.where(sup, fdl - config.strategy1_margin, fdl + config.strategy1_margin)[sup | dem])
                sides.append(sup[sup | dem])
                hrs.append(hours[sup | dem])
            elif choice is Strategy.SELF_SCHEDULING:
                sup = fdl > frt
                dem = fdl < frt
                prices.append(np.where(sup, avg[i] - config.strategy2_offset, avg[i] + config.strategy2_offset)[sup | dem])
                sides.append(sup[sup | dem])
                hrs.append(hours[sup | dem])
            else:
                if label.demand_cb:
                    prices.append(label.demand_schedule)
                    sides.append(np.zeros(24, dtype=bool))
                    hrs.append(hours)
                if label.supply_cb:
                    prices.append(label.supply_schedule)
                    sides.append(np.ones(24, dtype=bool))
                    hrs.append(hours)
            price, sup, h = np.concatenate(prices), np.concatenate(sides), np.concatenate(hrs)
            keep = ok[h] & np.isfinite(price)
            price, sup, h = price[keep], sup[keep], h[keep]
            if not len(h):
                continue
            cq, eta = _settle_arrays(sup, price, dl[h], rt[h], q)
            rec = np.empty(len(h), dtype=TRADE_DTYPE)
            rec["day"] = grid.days[d]
            rec["node"] = i
            rec["hour"] = h
            rec["strategy"] = STRATEGY_CODES[choice]
            rec["side"] = np.where(sup, "S", "D")
            rec["price"] = price
            rec["quantity"] = q
            rec["cleared_quantity"] = cq
            rec["net_profit"] = eta
            order = np.lexsort((rec["side"], rec["hour"]))
            trades.append(rec[order])
    trade_arr = np.concatenate(trades) if trades else np.empty(0, dtype=TRADE_DTYPE)
    label_arr = np.array(labels, dtype=LABEL_DTYPE) if labels else np.empty(0, dtype=LABEL_DTYPE)
    return BacktestResult(config, grid.nodes, grid.days[eval_days], choices, trade_arr, label_arr, acc_log)


def _log_label(out, day, i, label, dl, rt, avg):
    ok = np.isfinite(dl) & np.isfinite(rt)
    h = np.broadcast_to(np.arange(24), dl.shape)[ok]
    for side, flag in ((Side.DEMAND, label.demand_cb), (Side.SUPPLY, label.supply_cb)):
        if not flag:
            continue
        m = label.m_star[side]
        if side is Side.DEMAND:
            u, eta = avg[h] - dl[ok], rt[ok] - dl[ok]
        else:
            u, eta = dl[ok] - avg[h], dl[ok] - rt[ok]
        e = np.where(u >= m, eta, 0.0)
        out.append((day, i, side.value, m, label.objectives[side],
                    float(np.maximum(e, 0).sum()), float(np.minimum(e, 0).sum())))


def run_cases(dataset: MarketDataset, config: BacktestConfig, cases) -> list:
    """Backtest once per ``(epsilon, theta)`` pair; returns the results."""
    out = []
    for eps, theta in cases:
        cfg = replace(config, optimizer=replace(config.optimizer, epsilon=eps, theta=theta))
        out.append(run_backtest(dataset, cfg))
    return out


def _json_safe(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_json_safe(v) for v in x]
    if isinstance(x, float):
        return round(x, 6) + 0.0
    return x


def backtest_report(results, path=None, main: BacktestResult | None = None) -> dict:
    """Aggregate metrics of ``main`` (default: the first result) plus one
    case row per result."""
    results = list(results)
    first = main if main is not None else results[0]
    report = {
        "config": asdict(first.config),
        "aggregate": first.summary(),
        "cases": [r.case_row() for r in results],
    }
    report = _json_safe(report)
    if path is not None:
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


TRADES_HEADER = ["day", "node_id", "hour", "strategy", "side", "price", "quantity", "cleared_quantity", "net_profit"]


def write_trades_csv(result: BacktestResult, path) -> None:
    strategies = list(Strategy)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRADES_HEADER)
        for r in result.trades:
            w.writerow([str(r["day"]), result.nodes[r["node"]], int(r["hour"]), strategies[r["strategy"]].value,
                        r["side"], f"{r['price']:.4f}", f"{r['quantity']:.4f}",
                        f"{r['cleared_quantity']:.4f}", f"{r['net_profit'] + 0.0:.4f}"])


LABELS_HEADER = ["node_id", "demand_cb", "supply_cb", "demand_m", "supply_m", "demand_objective", "supply_objective"]


def write_labels_csv(labels: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABELS_HEADER)
        for node in sorted(labels):
            lb = labels[node]
            w.writerow([node, int(lb.demand_cb), int(lb.supply_cb),
                        f"{lb.m_star[Side.DEMAND]:.4f}", f"{lb.m_star[Side.SUPPLY]:.4f}",
                        f"{lb.objectives[Side.DEMAND]:.4f}", f"{lb.objectives[Side.SUPPLY]:.4f}"])


SOLUTIONS_HEADER = ["node_id", "side", "feasible", "m_star", "objective", "n_cleared"]


def solve_nodes(prices, config: OptimizerConfig, as_of=None, window_days: int = 365) -> list:
    """Both-side spike solutions per node; rows for ``solutions.csv``."""
    grid = prices.to_grid() if isinstance(prices, PriceTable) else prices
    end = (grid.days[-1] + 1) if as_of is None else np.datetime64(as_of, "D")
    rows = []
    for node in grid.nodes:
        for side in (Side.DEMAND, Side.SUPPLY):
            try:
                inst = spike_instance(grid, node, side, end, window_days)
            except ValueError:
                continue
            sol = solve_breakpoints(inst, config)
            rows.append((node, side, sol))
    return rows


def write_solutions_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SOLUTIONS_HEADER)
        for node, side, sol in rows:
            w.writerow([node, side.value, int(sol.feasible), f"{sol.m_star:.4f}",
                        f"{sol.objective:.4f}", sol.n_cleared])

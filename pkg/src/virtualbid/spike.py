"""Price-spike capture: choose the distance ``m`` from the hourly mean D-LMP.

A demand bid priced at ``avg_dlmp - m`` clears in every interval with
``dlmp <= avg_dlmp - m`` and earns ``rtlmp - dlmp`` there; a supply bid at
``avg_dlmp + m`` clears when ``dlmp >= avg_dlmp + m`` and earns
``dlmp - rtlmp``.  Write ``u_t`` for the clearing threshold of interval t
(``avg - dlmp`` for demand, ``dlmp - avg`` for supply): interval t clears iff
``m <= u_t``.  The cleared set, and with it the objective and the loss
constraint, is therefore piecewise constant in ``m`` and only changes at the
``u_t``.  Enumerating those breakpoints inside ``[m_min, m_max]`` solves the
problem exactly.

The big-M mixed-integer form of the same problem is kept as a checkable
contract: :func:`encode_milp_witness` turns a solution into binary
variables and :func:`verify_milp_constraints` checks every linear
constraint.  :func:`milp_lp_text` writes the model for an external solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from virtualbid.market_data import Side

TOL = 1e-9


@dataclass(frozen=True)
class OptimizerConfig:
    epsilon: float = 0.01
    m_min: float = 30.0
    m_max: float = 200.0
    big_m: float = 3000.0
    theta: float = 100.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if not (np.isfinite(self.m_min) and np.isfinite(self.m_max)):
            raise ValueError("m bounds must be finite")
        if self.m_min > self.m_max:
            raise ValueError("m_min must be <= m_max")
        if not self.big_m > 0:
            raise ValueError("big_m must be > 0")

    def big_m_ok(self, instance: "SpikeInstance") -> bool:
        """Whether ``big_m`` dominates every price magnitude plus ``m_max``."""
        peak = max(np.abs(instance.dlmp).max(), np.abs(instance.rtlmp).max(), np.abs(instance.avg_dlmp).max())
        return self.big_m >= peak + abs(self.m_max)


@dataclass(frozen=True, eq=False)
class SpikeInstance:
    side: Side
    dlmp: np.ndarray
    rtlmp: np.ndarray
    avg_dlmp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        arrs = [np.asarray(a, dtype=float) for a in (self.dlmp, self.rtlmp, self.avg_dlmp)]
        if arrs[0].ndim != 1 or len(arrs[0]) < 1 or any(a.shape != arrs[0].shape for a in arrs):
            raise ValueError("dlmp, rtlmp and avg_dlmp must be 1-D arrays of equal length >= 1")
        if not all(np.isfinite(a).all() for a in arrs):
            raise ValueError("non-finite instance values")
        for name, a in zip(("dlmp", "rtlmp", "avg_dlmp"), arrs):
            object.__setattr__(self, name, a)

    @property
    def horizon(self) -> int:
        return len(self.dlmp)

    @property
    def thresholds(self) -> np.ndarray:
        """Interval t clears iff ``m <= thresholds[t]``."""
        if self.side is Side.DEMAND:
            return self.avg_dlmp - self.dlmp
        return self.dlmp - self.avg_dlmp

    @property
    def unit_profit(self) -> np.ndarray:
        """Per-interval settlement of a cleared unit bid."""
        if self.side is Side.DEMAND:
            return self.rtlmp - self.dlmp
        return self.dlmp - self.rtlmp

    def mirrored(self) -> "SpikeInstance":
        return SpikeInstance(self.side.flipped, -self.dlmp, -self.rtlmp, -self.avg_dlmp)


@dataclass(frozen=True, eq=False)
class SpikeSolution:
    side: Side
    feasible: bool
    m_star: float
    objective: float
    cleared: np.ndarray
    profit: np.ndarray
    loss: np.ndarray
    bid_schedule: np.ndarray

    @property
    def n_cleared(self) -> int:
        return int(self.cleared.sum())

    @property
    def total_profit(self) -> float:
        return float(self.profit.sum())

    @property
    def total_loss(self) -> float:
        return float(self.loss.sum())


class Evaluation(NamedTuple):
    objective: float
    profit: float
    loss: float
    cleared: np.ndarray


def evaluate_m(instance: SpikeInstance, m: float) -> Evaluation:
    """Objective, total profit, total loss (<= 0) and cleared mask at ``m``."""
    cleared = instance.thresholds >= m
    eta = np.where(cleared, instance.unit_profit, 0.0)
    return Evaluation(
        float(eta.sum()),
        float(np.maximum(eta, 0.0).sum()),
        float(np.minimum(eta, 0.0).sum()),
        cleared,
    )


def _tolerance(instance: SpikeInstance) -> float:
    return TOL * (1.0 + float(np.abs(instance.unit_profit).sum()))


def _select(cands, obj, prof, loss, epsilon, tol):
    """Index of the chosen candidate and whether any candidate is feasible.

    Feasible means ``-loss <= epsilon * profit``.  Among feasible candidates
    the best objective wins, objectives within ``tol`` count as tied and ties
    go to the largest ``m``.
    """
    feas = -loss <= epsilon * prof + tol
    if not feas.any():
        return len(cands) - 1, False
    best = obj[feas].max()
    ok = np.flatnonzero(feas & (obj >= best - tol))
    return int(ok[np.argmax(cands[ok])]), True


def _solution(instance: SpikeInstance, m: float, feasible: bool) -> SpikeSolution:
    ev = evaluate_m(instance, m)
    eta = np.where(ev.cleared, instance.unit_profit, 0.0)
    sched = instance.avg_dlmp - m if instance.side is Side.DEMAND else instance.avg_dlmp + m
    return SpikeSolution(
        instance.side, feasible, float(m), ev.objective, ev.cleared,
        np.maximum(eta, 0.0), np.minimum(eta, 0.0), sched,
    )


def best_m(thresholds: np.ndarray, unit_profit: np.ndarray, config: OptimizerConfig) -> tuple:
    """``(m_star, feasible)`` by breakpoint enumeration on raw arrays.

    Only thresholds inside ``[m_min, m_max]`` are sorted; intervals above
    ``m_max`` clear for every admissible ``m`` and enter as a constant.
    """
    lo, hi = config.m_min, config.m_max
    u, eta = thresholds, unit_profit
    above = u > hi
    base_p = float(np.maximum(eta[above], 0.0).sum())
    base_l = float(np.minimum(eta[above], 0.0).sum())
    inside = (u >= lo) & ~above
    ui, ei = u[inside], eta[inside]
    order = np.argsort(-ui, kind="stable")
    ui, ei = ui[order], ei[order]
    cum_p = np.concatenate([[0.0], np.cumsum(np.maximum(ei, 0.0))])
    cum_l = np.concatenate([[0.0], np.cumsum(np.minimum(ei, 0.0))])
    cands = np.unique(np.concatenate([ui, [lo, hi]]))
    k = np.searchsorted(-ui, -cands, side="right")
    prof = base_p + cum_p[k]
    loss = base_l + cum_l[k]
    tol = TOL * (1.0 + float(np.abs(eta).sum()))
    i, feasible = _select(cands, prof + loss, prof, loss, config.epsilon, tol)
    return float(cands[i]), feasible


def solve_breakpoints(instance: SpikeInstance, config: OptimizerConfig) -> SpikeSolution:
    """Exact optimum over the breakpoints inside ``[m_min, m_max]``.

    Candidates are the thresholds within the bounds plus both bounds; each
    represents the interval of ``m`` ending at it.  If no candidate meets
    the loss bound the result is infeasible and reports the ``m_max``
    evaluation.
    """
    if not isinstance(config, OptimizerConfig):
        raise TypeError("config must be an OptimizerConfig")
    m, feasible = best_m(instance.thresholds, instance.unit_profit, config)
    return _solution(instance, m, feasible)


def oracle_grid(config: OptimizerConfig, step: float) -> np.ndarray:
    """Regular grid ``m_min, m_min + step, ...`` up to and including ``m_max``."""
    if not (step > 0 and np.isfinite(step)):
        raise ValueError("step must be a positive finite number")
    n = int(np.floor((config.m_max - config.m_min) / step + 1e-9))
    grid = config.m_min + step * np.arange(n + 1)
    return np.unique(np.concatenate([grid[grid <= config.m_max], [config.m_min, config.m_max]]))


def solve_grid_oracle(instance: SpikeInstance, config: OptimizerConfig, step: float, chunk: int = 4096) -> SpikeSolution:
    """Brute-force scan of ``m`` over a dense grid plus every in-range breakpoint.

    Each candidate's cleared set is recomputed from scratch; no sorting or
    prefix sums are shared with :func:`solve_breakpoints`.
    """
    u = instance.thresholds
    eta = instance.unit_profit
    bps = u[(u >= config.m_min) & (u <= config.m_max)]
    cands = np.unique(np.concatenate([oracle_grid(config, step), bps]))
    parts = np.column_stack([np.maximum(eta, 0.0), np.minimum(eta, 0.0)])
    totals = np.empty((len(cands), 2))
    for s in range(0, len(cands), chunk):
        mask = u[None, :] >= cands[s:s + chunk, None]
        totals[s:s + chunk] = mask @ parts
    prof, loss = totals[:, 0], totals[:, 1]
    obj = prof + loss
    i, feasible = _select(cands, obj, prof, loss, config.epsilon, _tolerance(instance))
    return _solution(instance, float(cands[i]), feasible)


def breakpoint_interval(instance: SpikeInstance, m: float) -> int:
    """Index of the half-open interval ``(u_(k-1), u_(k)]`` of sorted thresholds holding ``m``."""
    return int(np.searchsorted(np.unique(instance.thresholds), m, side="left"))


# ---------------------------------------------------------------------------
# MILP witness


@dataclass(frozen=True, eq=False)
class MILPWitness:
    b1: np.ndarray
    b2: np.ndarray
    z: np.ndarray
    m: float
    objective: float


CONSTRAINTS = (
    "objective", "clear_on", "clear_off", "sign_loss", "sign_profit", "loss_bound",
    "m_bounds", "z_le_b1", "z_le_b2", "z_ge_b1_b2", "z_range", "binary",
)


class Violation(NamedTuple):
    constraint: str
    t: int | None
    detail: str


def encode_milp_witness(instance: SpikeInstance, solution: SpikeSolution) -> MILPWitness:
    """Binary clearing (b1), sign (b2) and product (z) variables for a solution.

    ``b2`` is free where nothing clears; it is set to 1 there.
    """
    cleared = np.asarray(solution.cleared, dtype=bool)
    if cleared.shape != (instance.horizon,):
        raise ValueError("solution length does not match instance")
    if not np.array_equal(cleared, instance.thresholds >= solution.m_star):
        raise ValueError("cleared mask is inconsistent with m_star")
    b1 = cleared.astype(float)
    b2 = (b1 * instance.unit_profit >= 0).astype(float)
    return MILPWitness(b1, b2, b1 * b2, float(solution.m_star), float(solution.objective))


def verify_milp_constraints(instance: SpikeInstance, witness: MILPWitness, config: OptimizerConfig):
    """Check the linearized model numerically; returns ``(ok, violations)``.

    Violations are labeled by the names in :data:`CONSTRAINTS`:
    "clear_on"/"clear_off" big-M clearing, "sign_loss"/"sign_profit" the
    profit sign, "loss_bound", "m_bounds", the linearization of z = b1*b2
    ("z_le_b1", "z_le_b2", "z_ge_b1_b2", "z_range"), "objective" for a
    wrong claimed objective and "binary" for non-integral b1/b2.
    """
    T = instance.horizon
    b1, b2, z = (np.asarray(a, dtype=float) for a in (witness.b1, witness.b2, witness.z))
    if not (b1.shape == b2.shape == z.shape == (T,)):
        raise ValueError("witness arrays must match the instance horizon")
    M = config.big_m
    lam = instance.dlmp
    g = instance.unit_profit
    m = witness.m
    out = []

    def flag(label, mask, detail):
        for t in np.flatnonzero(mask):
            out.append(Violation(label, int(t), detail))

    flag("binary", ~np.isin(b1, (0.0, 1.0)) | ~np.isin(b2, (0.0, 1.0)), "b1/b2 must be 0 or 1")
    if instance.side is Side.DEMAND:
        x = instance.avg_dlmp - m
        flag("clear_on", x < lam - M * (1 - b1) - TOL, "x >= dlmp - M(1-b1)")
        flag("clear_off", x > lam + M * b1 + TOL, "x <= dlmp + M b1")
    else:
        x = instance.avg_dlmp + m
        flag("clear_on", x > lam + M * (1 - b1) + TOL, "x <= dlmp + M(1-b1)")
        flag("clear_off", x < lam - M * b1 - TOL, "x >= dlmp - M b1")
    eta = b1 * g
    flag("sign_loss", eta < -M * (1 - b2) - TOL, "eta >= -M(1-b2)")
    flag("sign_profit", eta > M * b2 + TOL, "eta <= M b2")
    scale = TOL * (1.0 + float(np.abs(g).sum()))
    lhs = float(((z - b1) * g).sum())
    rhs = config.epsilon * float((z * g).sum())
    if lhs > rhs + scale:
        out.append(Violation("loss_bound", None, f"loss {lhs:.6g} > epsilon * profit {rhs:.6g}"))
    if not (config.m_min - TOL <= m <= config.m_max + TOL):
        out.append(Violation("m_bounds", None, f"m={m} outside [{config.m_min}, {config.m_max}]"))
    flag("z_le_b1", z > b1 + TOL, "z <= b1")
    flag("z_le_b2", z > b2 + TOL, "z <= b2")
    flag("z_ge_b1_b2", z < b1 + b2 - 1 - TOL, "z >= b1 + b2 - 1")
    flag("z_range", (z < -TOL) | (z > 1 + TOL), "0 <= z <= 1")
    obj = float(eta.sum())
    if abs(obj - witness.objective) > scale:
        out.append(Violation("objective", None, f"objective {obj:.6g} != claimed {witness.objective:.6g}"))
    return not out, out


def milp_lp_text(instance: SpikeInstance, config: OptimizerConfig, witness: MILPWitness | None = None) -> str:
    """CPLEX-LP style text of the linearized model, optionally with a witness."""
    T = instance.horizon
    g = instance.unit_profit
    lam = instance.dlmp
    avg = instance.avg_dlmp
    M = config.big_m
    eps = config.epsilon
    sgn = -1.0 if instance.side is Side.DEMAND else 1.0  # x = avg + sgn * m
    lines = [f"\\ spike capture, side={instance.side.value}, T={T}", "Maximize"]
    lines.append(" obj: " + " ".join(f"{g[t]:+.6f} b1_{t}" for t in range(T)))
    lines.append("Subject To")
    for t in range(T):
        # demand: avg - m >= lam - M + M b1  ->  -m - M b1 >= lam - M - avg
        if sgn < 0:
            lines.append(f" clear_on_{t}: -1 m - {M} b1_{t} >= {lam[t] - M - avg[t]:.6f}")
            lines.append(f" clear_off_{t}: -1 m - {M} b1_{t} <= {lam[t] - avg[t]:.6f}")
        else:
            lines.append(f" clear_on_{t}: 1 m + {M} b1_{t} <= {lam[t] + M - avg[t]:.6f}")
            lines.append(f" clear_off_{t}: 1 m + {M} b1_{t} >= {lam[t] - avg[t]:.6f}")
        lines.append(f" sign_loss_{t}: {g[t]:.6f} b1_{t} - {M} b2_{t} >= -{M}")
        lines.append(f" sign_profit_{t}: {g[t]:.6f} b1_{t} - {M} b2_{t} <= 0")
        lines.append(f" z_le_b1_{t}: z_{t} - b1_{t} <= 0")
        lines.append(f" z_le_b2_{t}: z_{t} - b2_{t} <= 0")
        lines.append(f" z_ge_b1_b2_{t}: z_{t} - b1_{t} - b2_{t} >= -1")
    terms = " ".join(f"{(1 - eps) * g[t]:+.6f} z_{t} {-g[t]:+.6f} b1_{t}" for t in range(T))
    lines.append(f" loss_bound: {terms} <= 0")
    lines.append("Bounds")
    lines.append(f" {config.m_min} <= m <= {config.m_max}")
    lines.extend(f" 0 <= z_{t} <= 1" for t in range(T))
    lines.append("Binary")
    lines.append(" " + " ".join(f"b1_{t} b2_{t}" for t in range(T)))
    lines.append("End")
    if witness is not None:
        lines.append(f"\\ witness m={witness.m:.6f} objective={witness.objective:.6f}")
        for t in range(T):
            lines.append(f"\\ t={t} b1={int(witness.b1[t])} b2={int(witness.b2[t])} z={witness.z[t]:g}")
    return "\n".join(lines) + "\n"

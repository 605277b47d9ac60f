"""Independent reference implementations used as test oracles.

These are written from the definitions with plain loops and share no code
with the package beyond its data classes.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# ---------------------------------------------------------------------------
# settlement and features


def settle_loop(side: str, steps, dlmp: float, rtlmp: float):
    """Cleared quantity and net profit by walking the steps one by one."""
    cleared = 0.0
    for qty, price in steps:
        in_money = price <= dlmp if side == "S" else price >= dlmp
        if in_money:
            cleared = qty  # cumulative curve: deepest in-the-money step
    gap = dlmp - rtlmp
    return cleared, cleared * gap if side == "S" else cleared * -gap


def delta_loop(side: str, prices, avg: float) -> float:
    lo, hi = min(prices), max(prices)
    if lo <= avg <= hi:
        return 0.0
    raw = lo - avg if lo > avg else hi - avg
    return raw if side == "S" else -raw


def consistency_loop(side: str, day_ordinal: int, history) -> float:
    """``history`` holds (side, day_ordinal) of the same participant and node."""
    window = [s for s, d in history if day_ordinal - 365 <= d < day_ordinal]
    if not window:
        return 0.5
    return sum(s == side for s in window) / len(window)


# ---------------------------------------------------------------------------
# spike problem


def spike_brute(side: str, dlmp, rtlmp, avg, epsilon, m_min, m_max):
    """Optimum by evaluating every distinct cleared set reachable in bounds.

    Returns ``(feasible, objective, cleared_mask)``; among equal objectives
    the smallest cleared set (largest m) wins.
    """
    T = len(dlmp)
    u = [avg[t] - dlmp[t] if side == "D" else dlmp[t] - avg[t] for t in range(T)]
    g = [rtlmp[t] - dlmp[t] if side == "D" else dlmp[t] - rtlmp[t] for t in range(T)]
    cands = sorted({m_min, m_max} | {x for x in u if m_min <= x <= m_max})
    tol = 1e-9 * (1 + sum(abs(x) for x in g))
    best = None
    for m in cands:
        mask = [u[t] >= m for t in range(T)]
        prof = sum(g[t] for t in range(T) if mask[t] and g[t] > 0)
        loss = sum(g[t] for t in range(T) if mask[t] and g[t] < 0)
        if -loss > epsilon * prof + tol:
            continue
        obj = sum(g[t] for t in range(T) if mask[t])
        if best is None or obj > best[0] + tol or (abs(obj - best[0]) <= tol and m > best[1]):
            best = (obj, m, mask)
    if best is None:
        mask = [u[t] >= m_max for t in range(T)]
        return False, sum(g[t] for t in range(T) if mask[t]), np.array(mask)
    return True, best[0], np.array(best[2])


def milp_optimum(instance, config):
    """Solve the linearized big-M model with SciPy's HiGHS MILP solver.

    Variables are ``[m, b1_0..b1_T-1, b2_0.., z_0..]``; returns the optimal
    objective or ``None`` when the model is infeasible.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    T = instance.horizon
    lam, avg, g = instance.dlmp, instance.avg_dlmp, instance.unit_profit
    M, eps = config.big_m, config.epsilon
    n = 1 + 3 * T
    im, ib1, ib2, iz = 0, 1, 1 + T, 1 + 2 * T
    rows, lo, hi = [], [], []

    def row(coefs, lb, ub):
        r = np.zeros(n)
        for j, v in coefs:
            r[j] += v
        rows.append(r)
        lo.append(lb)
        hi.append(ub)

    sgn = -1.0 if instance.side.value == "D" else 1.0
    for t in range(T):
        # bid price x = avg + sgn*m; clears iff (demand) lam <= x, (supply) lam >= x
        if sgn < 0:
            row([(im, -1.0), (ib1 + t, -M)], lam[t] - avg[t] - M, math.inf)
            row([(im, -1.0), (ib1 + t, -M)], -math.inf, lam[t] - avg[t])
        else:
            row([(im, 1.0), (ib1 + t, M)], -math.inf, lam[t] - avg[t] + M)
            row([(im, 1.0), (ib1 + t, M)], lam[t] - avg[t], math.inf)
        row([(ib1 + t, g[t]), (ib2 + t, -M)], -M, math.inf)
        row([(ib1 + t, g[t]), (ib2 + t, -M)], -math.inf, 0.0)
        row([(iz + t, 1.0), (ib1 + t, -1.0)], -math.inf, 0.0)
        row([(iz + t, 1.0), (ib2 + t, -1.0)], -math.inf, 0.0)
        row([(iz + t, 1.0), (ib1 + t, -1.0), (ib2 + t, -1.0)], -1.0, math.inf)
    row([(iz + t, (1 - eps) * g[t]) for t in range(T)] + [(ib1 + t, -g[t]) for t in range(T)], -math.inf, 0.0)
    c = np.zeros(n)
    c[ib1:ib1 + T] = -g
    integrality = np.r_[0, np.ones(2 * T), np.zeros(T)]
    lb = np.r_[config.m_min, np.zeros(3 * T)]
    ub = np.r_[config.m_max, np.ones(3 * T)]
    res = milp(c, constraints=LinearConstraint(np.array(rows), lo, hi), integrality=integrality,
               bounds=Bounds(lb, ub), options={"mip_rel_gap": 0.0})
    if res.status != 0:
        return None
    return -res.fun


# ---------------------------------------------------------------------------
# clustering


def mutual_reachability_matrix(X, min_samples):
    n = len(X)
    d = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    core = np.sort(d, axis=1)[:, min(min_samples, n) - 1]
    return np.maximum(d, np.maximum(core[:, None], core[None, :]))


def prufer_trees(n):
    """Every labelled spanning tree of K_n as an edge list (Cayley: n^(n-2))."""
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for s in seq:
            degree[s] += 1
        edges = []
        seq = list(seq)
        for s in seq:
            leaf = min(i for i in range(n) if degree[i] == 1)
            edges.append((leaf, s))
            degree[leaf] -= 1
            degree[s] -= 1
        u, v = [i for i in range(n) if degree[i] == 1]
        edges.append((u, v))
        yield edges


def brute_min_spanning_weight(W):
    return min(sum(W[a, b] for a, b in tree) for tree in prufer_trees(len(W)))


def adjusted_rand(a, b) -> float:
    """Adjusted Rand index from the contingency table."""
    a, b = np.asarray(a), np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return (x * (x - 1) / 2).sum()

    s = comb2(table)
    sa, sb = comb2(table.sum(1)), comb2(table.sum(0))
    expected = sa * sb / comb2(np.array([len(a)]))
    top = 0.5 * (sa + sb)
    return 1.0 if top == expected else float((s - expected) / (top - expected))


# ---------------------------------------------------------------------------
# instance generators


def spike_instance_arrays(rng, T=168, side="D", spike_rate=0.08, lattice=0.01):
    """Random week of hourly prices with planted spikes of both signs.

    Prices sit on a ``lattice`` so breakpoints are well separated or equal.
    """
    hours = np.arange(T) % 24
    profile = 40 + 10 * np.sin(2 * np.pi * hours / 24)
    dl = profile + rng.normal(0, 4, T)
    spikes = rng.random(T) < spike_rate
    dl[spikes] += rng.choice([-1, 1], spikes.sum()) * rng.uniform(30, 250, spikes.sum())
    rt = dl + rng.normal(0, 6, T)
    follow = spikes & (rng.random(T) < 0.3)
    rt[follow] = dl[follow] + rng.normal(0, 3, follow.sum())
    rt[spikes & ~follow] = profile[spikes & ~follow] + rng.normal(0, 6, (spikes & ~follow).sum())
    dl, rt = np.round(dl / lattice) * lattice, np.round(rt / lattice) * lattice
    avg = np.array([dl[hours == h].mean() for h in hours])
    avg = np.round(avg / lattice) * lattice
    return dl, rt, avg


# ---------------------------------------------------------------------------
# witness mutations


def mutate_witness(rng, instance, witness, config):
    """Perturb one value of a valid witness.

    Returns ``(mutated, expected)`` where ``expected`` is the constraint the
    change must break, or ``None`` when the drawn mutation has no valid
    target in this witness.
    """
    from virtualbid.market_data import Side
    from virtualbid.spike import MILPWitness

    b1, b2, z = witness.b1.copy(), witness.b2.copy(), witness.z.copy()
    m = witness.m
    g = instance.unit_profit
    x = instance.avg_dlmp - m if instance.side is Side.DEMAND else instance.avg_dlmp + m
    lam = instance.dlmp
    # out_money: cannot clear at x; strict_in: clears with a margin well above the verifier tolerance
    gap = lam - x if instance.side is Side.DEMAND else x - lam
    out_money, strict_in = gap > 1e-6, gap < -1e-6
    kinds = ["clear_on", "clear_off", "sign_profit", "sign_loss", "z_le_b1", "z_le_b2", "z_ge_b1_b2", "z_range",
             "m_bounds"]
    kind = kinds[rng.integers(len(kinds))]

    def pick(mask):
        idx = np.flatnonzero(mask)
        return None if len(idx) == 0 else int(idx[rng.integers(len(idx))])

    if kind == "clear_on":
        t = pick((b1 == 0) & out_money)
        if t is None:
            return None
        b1[t] = 1.0
    elif kind == "clear_off":
        t = pick((b1 == 1) & strict_in)
        if t is None:
            return None
        b1[t] = 0.0
    elif kind == "sign_profit":
        t = pick((b1 == 1) & (g > 0))
        if t is None:
            return None
        b2[t] = 0.0
    elif kind == "sign_loss":
        t = pick((b1 == 1) & (g < 0))
        if t is None:
            return None
        b2[t] = 1.0
    elif kind == "z_le_b1":
        t = pick((b1 == 0) & (b2 == 1))
        if t is None:
            return None
        z[t] = 1.0
    elif kind == "z_le_b2":
        t = pick(z == 1)
        if t is None:
            return None
        b2[t] = 0.0
    elif kind == "z_ge_b1_b2":
        t = pick((b1 == 1) & (b2 == 1))
        if t is None:
            return None
        z[t] = 0.0
    elif kind == "z_range":
        t = int(rng.integers(len(z)))
        z[t] = -0.5 if rng.random() < 0.5 else 1.5
    else:
        m = config.m_max + 1.0 + rng.random() * 10 if rng.random() < 0.5 else config.m_min - 1.0 - rng.random() * 10
    return MILPWitness(b1, b2, z, m, witness.objective), kind

"""Brute-force references for the frontier solvers and the test theory.

The lattice enumerator evaluates constraints and objectives with its own
direct tensor code (not the solver's evaluators), so solver and oracle only
share the validated probability primitives.  The Neyman-Pearson oracle is
exact at finite n via type-class enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import BudgetExceeded
from .probcore import HypothesisPair, JointPmf, conditional, marginalize

MAX_NP_ALPHABET = 4
MAX_NP_N = 40


@dataclass(frozen=True)
class GridSpec:
    """Simplex lattice spacing and per-auxiliary cardinality caps."""

    step: float
    cards: tuple[int, ...]
    budget: int = 8_000_000

    def __post_init__(self):
        if not (0 < self.step <= 0.5):
            raise ValueError(f"step must lie in (0, 0.5], got {self.step}")
        if any(c < 1 for c in self.cards):
            raise ValueError("cardinality caps must be >= 1")
        if any(c > 3 for c in self.cards):
            raise BudgetExceeded("auxiliary caps above 3 are not lattice-enumerable")


def _entropy_cols(arr: np.ndarray) -> np.ndarray:
    """Entropy in bits along all axes but the first (batch axis)."""
    flat = arr.reshape(arr.shape[0], -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(flat > 0, flat * np.log2(np.where(flat > 0, flat, 1.0)), 0.0)
    return -t.sum(axis=1)


def _simplex_lattice(dim: int, step: float) -> np.ndarray:
    """All points of the probability simplex with coordinates k*step."""
    m = int(round(1.0 / step))
    if abs(m * step - 1.0) > 1e-9:
        raise ValueError(f"1/step must be an integer, got step={step}")
    pts = []
    for comp in itertools.combinations(range(m + dim - 1), dim - 1):
        prev = -1
        ks = []
        for c in comp:
            ks.append(c - prev - 1)
            prev = c
        ks.append(m + dim - 2 - prev)
        pts.append(ks)
    return np.asarray(pts, dtype=np.float64) / m


def _channel_lattice(nx: int, dim: int, step: float, budget: int) -> np.ndarray:
    """All conditionals P(u|x) with every row on the lattice: (N, nx, dim)."""
    rows = _simplex_lattice(dim, step)
    total = len(rows) ** nx
    if total > budget:
        raise BudgetExceeded(f"lattice has {total} channels > budget {budget}")
    idx = np.indices((len(rows),) * nx).reshape(nx, -1).T
    return rows[idx]


def _pareto_mask(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """Mask of points not dominated by any other (>= both, > one)."""
    order = np.lexsort((-t2, -t1))  # theta1 desc, then theta2 desc
    best_t2 = -np.inf
    keep = np.zeros(t1.size, dtype=bool)
    i = 0
    n = t1.size
    while i < n:
        j = i
        # group ties in theta1
        while j < n and t1[order[j]] == t1[order[i]]:
            j += 1
        grp = order[i:j]
        g2 = t2[grp]
        m = g2.max()
        if m > best_t2:
            keep[grp[g2 == m]] = True
            best_t2 = m
        i = j
    return keep


def brute_force_frontier(h: HypothesisPair, rates, grid: GridSpec):
    """Exact lattice Pareto set for the gw or hb region on tiny instances.

    Enumerates the joint conditional of all auxiliaries given X on a simplex
    lattice of the given spacing, keeps rate-feasible points, and returns the
    lattice Pareto set of (theta1, theta2) with its witness channels.
    """
    from .regions import (AuxiliaryWitness, FrontierPoint, RatePoint,
                          RegionFrontier, _witness_channel)

    if not isinstance(rates, RatePoint):
        rates = RatePoint(*rates)
    h0 = h.h0
    nx = h0.axis("X").size
    if nx > 3:
        raise BudgetExceeded("brute force is limited to |X| <= 3")

    if h.structure_tag == "against-independence":
        cards = tuple(grid.cards) + (1,) * (3 - len(grid.cards))
        n0, n1, n2 = cards[:3]
        px = marginalize(h0, "X").mass
        py1 = conditional(h0, "Y1", "X")
        py2 = conditional(h0, "Y2", "X")
        ws = _channel_lattice(nx, n0 * n1 * n2, grid.step, grid.budget)
        N = ws.shape[0]
        w = ws.reshape(N, nx, n0, n1, n2)
        jx = w * px[None, :, None, None, None]          # (N,x,a,b,c)
        t_ab = jx.sum(axis=4)                            # (N,x,a,b)
        t_ac = jx.sum(axis=3)                            # (N,x,a,c)
        hx = _entropy_cols(px[None, :])[0]
        p_xa = t_ab.sum(axis=3)                          # (N,x,a)
        i_u0x = hx + _entropy_cols(p_xa.sum(axis=1)) - _entropy_cols(p_xa)
        i_u1x = (_entropy_cols(p_xa) + _entropy_cols(t_ab.sum(axis=1))
                 - _entropy_cols(p_xa.sum(axis=1)) - _entropy_cols(t_ab))
        i_u2x = (_entropy_cols(p_xa) + _entropy_cols(t_ac.sum(axis=1))
                 - _entropy_cols(p_xa.sum(axis=1)) - _entropy_cols(t_ac))
        a1 = np.einsum("nxab,xy->naby", t_ab, py1)
        a2 = np.einsum("nxac,xy->nacy", t_ac, py2)
        th1 = (_entropy_cols(a1.sum(axis=3)) + _entropy_cols(a1.sum(axis=(1, 2)))
               - _entropy_cols(a1))
        th2 = (_entropy_cols(a2.sum(axis=3)) + _entropy_cols(a2.sum(axis=(1, 2)))
               - _entropy_cols(a2))
        feas = ((i_u0x <= rates.r0 + 1e-9) & (i_u1x <= rates.r1 + 1e-9)
                & (i_u2x <= rates.r2 + 1e-9))
        slack_names = ("r0", "r1", "r2")
        slacks = np.stack([rates.r0 - i_u0x, rates.r1 - i_u1x, rates.r2 - i_u2x], axis=1)
        card_map = {"U0": n0, "U1": n1, "U2": n2}
    elif h.structure_tag == "against-conditional-independence":
        cards = tuple(grid.cards) + (1,) * (2 - len(grid.cards))
        n0, n1 = cards[:2]
        pxz = marginalize(h0, ("X", "Z1"))
        arr_xz = np.transpose(pxz.mass, [pxz.axis_index("X"), pxz.axis_index("Z1")])
        py1_xz = conditional(h0, "Y1", ("X", "Z1"))      # (x,z,y1)
        px = arr_xz.sum(axis=1)
        py2 = conditional(h0, "Y2", "X")
        ws = _channel_lattice(nx, n0 * n1, grid.step, grid.budget)
        N = ws.shape[0]
        w = ws.reshape(N, nx, n0, n1)
        jxz = np.einsum("nxab,xz->nxzab", w, arr_xz)     # (N,x,z,a,b)
        # rate: I(U0;X) + I(U1;X|U0,Z1)
        p_xa = jxz.sum(axis=(2, 4))
        i_u0x = (_entropy_cols(p_xa.sum(axis=1)) + _entropy_cols(p_xa.sum(axis=2))
                 - _entropy_cols(p_xa))
        p_xza = jxz.sum(axis=4)
        i_u1 = (_entropy_cols(p_xza) + _entropy_cols(jxz.sum(axis=1))
                - _entropy_cols(p_xza.sum(axis=1)) - _entropy_cols(jxz))
        rate_need = i_u0x + i_u1
        # theta1 = I(U0,U1;Y1|Z1)
        b1 = np.einsum("nxzab,xzy->nzaby", jxz, py1_xz)
        th1 = (_entropy_cols(b1.sum(axis=4)) + _entropy_cols(b1.sum(axis=(2, 3)))
               - _entropy_cols(b1.sum(axis=(2, 3, 4))) - _entropy_cols(b1))
        # theta2 = I(U0;Y2)
        c2 = np.einsum("nxa,xy->nay", p_xa, py2)
        th2 = (_entropy_cols(c2.sum(axis=2)) + _entropy_cols(c2.sum(axis=1))
               - _entropy_cols(c2))
        feas = rate_need <= rates.r0 + 1e-9
        slack_names = ("r",)
        slacks = (rates.r0 - rate_need)[:, None]
        card_map = {"U0": n0, "U1": n1}
    else:
        raise ValueError(f"unsupported structure {h.structure_tag!r}")

    th1 = np.maximum(th1, 0.0)
    th2 = np.maximum(th2, 0.0)
    t1f, t2f = th1[feas], th2[feas]
    wf = ws[feas]
    sf = slacks[feas]
    keep = _pareto_mask(t1f, t2f)
    order = np.lexsort((-t2f[keep], t1f[keep]))
    points = []
    kidx = np.flatnonzero(keep)[order]
    seen = set()
    kidx = [i for i in kidx
            if (t1f[i], t2f[i]) not in seen and not seen.add((t1f[i], t2f[i]))]
    for i in kidx:
        wit = AuxiliaryWitness(
            channel=_witness_channel(nx, card_map, wf[i]),
            cardinalities=dict(card_map))
        points.append(FrontierPoint(
            lam=float("nan"), theta1=float(t1f[i]), theta2=float(t2f[i]),
            witness=wit, slacks=dict(zip(slack_names, (float(s) for s in sf[i])))))
    return RegionFrontier(points=points, meta={
        "label": "oracle-lattice", "step": grid.step,
        "channels": int(N), "feasible": int(feas.sum())})


def exact_np_beta(p: JointPmf, q: JointPmf, n: int, epsilon: float) -> float:
    """Exact minimal type-II error at blocklength n with type-I <= epsilon.

    Enumerates type classes of the single shared alphabet, sorts them by
    likelihood ratio, and builds the randomized Neyman-Pearson acceptance
    region so the type-I constraint binds exactly.
    """
    if len(p.axes) != 1 or len(q.axes) != 1:
        raise ValueError("exact_np_beta expects single-axis pmfs")
    if p.axes[0].size != q.axes[0].size:
        raise ValueError("alphabet size mismatch")
    if not (0 < epsilon < 1):
        raise ValueError("epsilon must lie in (0,1)")
    a = p.axes[0].size
    if a > MAX_NP_ALPHABET or n > MAX_NP_N or n < 1:
        raise BudgetExceeded(
            f"type enumeration limited to |alphabet|<={MAX_NP_ALPHABET}, n<={MAX_NP_N}")
    pm = p.mass
    qm = q.mass

    types = np.asarray(list(_compositions(n, a)), dtype=np.int64)
    logc = gammaln(n + 1) - gammaln(types + 1).sum(axis=1)  # natural log
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(pm > 0, np.log(np.where(pm > 0, pm, 1.0)), -np.inf)
        logq = np.where(qm > 0, np.log(np.where(qm > 0, qm, 1.0)), -np.inf)
    lp = logc + _dot_allow_zero(types, logp)
    lq = logc + _dot_allow_zero(types, logq)
    pmass = np.exp(lp)
    qmass = np.exp(lq)
    pmass[np.isneginf(lp)] = 0.0
    qmass[np.isneginf(lq)] = 0.0
    with np.errstate(invalid="ignore"):
        llr = lp - lq  # +inf where q=0<p; -inf where p=0<q; nan where both 0
    llr = np.where(np.isnan(llr), -np.inf, llr)

    order = np.argsort(-llr, kind="stable")
    target = 1.0 - epsilon
    acc = 0.0
    beta = 0.0
    for i in order:
        pi = pmass[i]
        qi = qmass[i]
        if acc + pi <= target or pi == 0.0:
            acc += pi
            beta += qi
            if acc >= target:
                break
        else:
            beta += qi * (target - acc) / pi  # randomized boundary split
            acc = target
            break
    return float(beta)


def _compositions(n: int, parts: int):
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def _dot_allow_zero(types: np.ndarray, logv: np.ndarray) -> np.ndarray:
    """Sum k_a * log v_a with the convention 0 * (-inf) = 0."""
    contrib = types * logv[None, :]
    contrib = np.where(types == 0, 0.0, contrib)
    return contrib.sum(axis=1)


def frontier_support_gap(points_a, points_b, lambdas: int = 201) -> float:
    """Hausdorff distance between the convex, dominated closures of two
    frontiers, computed as the largest support-function gap over the
    nonnegative directions (exact for convex bodies).

    Each argument is an iterable of (theta1, theta2) pairs; the origin is
    always included (both regions contain it).
    """
    a = _closure_points(points_a)
    b = _closure_points(points_b)
    gaps = []
    for i in range(lambdas):
        lam = i / (lambdas - 1)
        d = np.array([lam, 1.0 - lam])
        d /= np.linalg.norm(d)
        ha = float(np.max(a @ d))
        hb = float(np.max(b @ d))
        gaps.append(abs(ha - hb))
    return max(gaps)


def _closure_points(points) -> np.ndarray:
    pts = [(0.0, 0.0)]
    for t1, t2 in points:
        pts.append((float(t1), float(t2)))
        pts.append((float(t1), 0.0))  # dominated closure touches the axes
        pts.append((0.0, float(t2)))
    return np.asarray(pts)

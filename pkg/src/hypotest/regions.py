"""Achievable exponent frontiers by optimization over auxiliary channels.

Each frontier operation sweeps a scalarization weight lambda over [0, 1] and,
for every weight, maximizes lambda*theta1 + (1-lambda)*theta2 over the joint
conditional law of the auxiliaries given X (a product of simplices), subject
to the setting's rate/decodability constraints.  The Markov structure
"auxiliaries -- X -- observations" is enforced by construction: auxiliaries
are generated from X only.

The solver is a multi-restart projected-ascent / random-search hybrid with
finite-difference gradients and simplex projection by sorting; it is
deterministic given a seed, and restarts and lambda-grid cells are
independent work items merged by index order.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegradednessUnverifiable, NoFeasiblePoint, StructureError
from .probcore import (Alphabet, Channel, HypothesisPair, JointPmf,
                       conditional, extend, marginalize, mutual_information)
from .rng import substream

FEAS_TOL = 1e-12        # constraint slack treated as feasible during repair
LESS_NOISY_TOL = 1e-6   # verdict threshold of the less-noisy minimization


@dataclass(frozen=True)
class RatePoint:
    """Nonnegative rates in bits per source symbol."""

    r0: float = 0.0
    r1: float = 0.0
    r2: float = 0.0
    r1_prime: float | None = None

    def __post_init__(self):
        vals = [self.r0, self.r1, self.r2]
        if self.r1_prime is not None:
            vals.append(self.r1_prime)
        for v in vals:
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"rates must be finite and >= 0, got {self!r}")


@dataclass(frozen=True)
class SolverOptions:
    """Settings of the lambda sweep and the ascent kernel."""

    lambda_grid: int = 33
    restarts: int = 64
    max_iters: int = 300
    fd_step: float = 1e-5
    init_step: float = 0.1
    penalty: float = 64.0
    seed: int = 0
    cards: dict | None = None          # downward overrides per auxiliary name
    hybrid_exhaustive_limit: int = 1 << 20
    hybrid_random_functions: int = 256
    hybrid_rounds: int = 2

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.lambda_grid < 1:
            raise ValueError("lambda_grid must be >= 1")


@dataclass(frozen=True)
class AuxiliaryWitness:
    """The auxiliary channel (and hybrid map) certifying a frontier point."""

    channel: Channel
    cardinalities: dict
    hybrid_function: np.ndarray | None = None


@dataclass(frozen=True)
class FrontierPoint:
    lam: float
    theta1: float
    theta2: float
    witness: AuxiliaryWitness
    slacks: dict


@dataclass
class RegionFrontier:
    """Pareto-sorted supported points plus solver metadata."""

    points: list
    meta: dict = field(default_factory=dict)

    def pairs(self) -> list:
        return [(p.theta1, p.theta2) for p in self.points]


@dataclass(frozen=True)
class LessNoisyVerdict:
    holds: bool
    min_gap: float
    argmin_witness: Channel


# ---------------------------------------------------------------------------
# cardinality bounds
# ---------------------------------------------------------------------------

def default_cards(scheme: str, nx: int) -> dict:
    """Sufficient auxiliary alphabet sizes for each region."""
    if scheme == "gw":
        u0 = nx + 4
        return {"U0": u0, "U1": nx * u0 + 1, "U2": nx * u0 + 1}
    if scheme == "hb":
        u0 = nx + 2
        return {"U0": u0, "U1": nx * u0 + 1}
    if scheme == "general":
        u0 = nx + 4
        return {"U0": u0, "U1": nx * u0 + 2, "U2": nx * u0 + 2}
    if scheme == "noisy":
        u0 = nx + 4
        return {"U0": u0, "U1": nx * u0 + 2}
    if scheme == "less-noisy":
        return {"U": nx + 1}
    raise ValueError(f"unknown scheme {scheme!r}")


def _resolve_cards(scheme: str, nx: int, opts: SolverOptions) -> dict:
    cards = default_cards(scheme, nx)
    if opts.cards:
        for name, size in opts.cards.items():
            if name not in cards:
                continue
            if size < 1:
                raise ValueError(f"cardinality for {name} must be >= 1")
            if size > cards[name]:
                raise ValueError(
                    f"cardinality {size} for {name} exceeds the sufficient bound "
                    f"{cards[name]}")
            cards[name] = size
    return cards


# ---------------------------------------------------------------------------
# batched tensor helpers (raw arrays; witness evaluators go through probcore)
# ---------------------------------------------------------------------------

def _bh(arr: np.ndarray) -> np.ndarray:
    """Entropy in bits along all axes but the first (batch) axis."""
    flat = arr.reshape(arr.shape[0], -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = flat * np.log2(flat)
    return -np.nansum(t, axis=1)


def _normalize_rows(w: np.ndarray) -> np.ndarray:
    s = w.sum(axis=-1, keepdims=True)
    return w / np.where(s > 0, s, 1.0)


def _project_simplex_rows(w: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row onto the probability simplex."""
    n, d = w.shape
    u = -np.sort(-w, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ks = np.arange(1, d + 1)
    cond = u - css / ks > 0
    rho = d - np.argmax(cond[:, ::-1], axis=1) - 1
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(w - theta[:, None], 0.0)


def _witness_channel(nx: int, card_map: dict, wflat: np.ndarray) -> Channel:
    sizes = tuple(card_map.values())
    kernel = _normalize_rows(np.asarray(wflat, dtype=np.float64).reshape(nx, -1))
    kernel = kernel.reshape((nx,) + sizes)
    to_axes = tuple(Alphabet(name, size) for name, size in card_map.items())
    return Channel((Alphabet("X", nx),), to_axes, kernel)


# ---------------------------------------------------------------------------
# per-scheme evaluation programs (batched over a leading axis)
# ---------------------------------------------------------------------------

class _Program:
    """Batched evaluator of (theta1, theta2, constraints g<=0).

    eval_batch takes (N, nx, dim) row-simplex channels (rows are normalized
    defensively) and returns (th1 (N,), th2 (N,), gs (N, n_constraints)).
    """

    def __init__(self, nx, card_map, eval_batch, slack_names, px=None):
        self.nx = nx
        self.card_map = dict(card_map)
        self.sizes = tuple(card_map.values())
        self.dim = int(np.prod(self.sizes))
        self.eval_batch = eval_batch
        self.slack_names = tuple(slack_names)
        self.px = np.full(nx, 1.0 / nx) if px is None else np.asarray(px, float)

    def eval_all(self, wflat: np.ndarray):
        t1, t2, gs = self.eval_batch(np.asarray(wflat)[None])
        return float(t1[0]), float(t2[0]), tuple(float(g) for g in gs[0])

    def structured_inits(self):
        """Deterministic starting points: constants, copies of X, mixtures."""
        nx = self.nx
        outs = []
        for pat in itertools.product((0, 1), repeat=len(self.sizes)):
            rows = []
            for x in range(nx):
                factors = []
                for on, size in zip(pat, self.sizes):
                    e = np.zeros(size)
                    e[x % size if on else 0] = 1.0
                    factors.append(e)
                joint = factors[0]
                for f in factors[1:]:
                    joint = np.multiply.outer(joint, f)
                rows.append(joint.reshape(-1))
            outs.append(np.asarray(rows))
        outs.append(np.full((nx, self.dim), 1.0 / self.dim))
        return outs

    def snap_candidates(self, wflat: np.ndarray):
        """Exactly-structured variants of w used by the feasibility repair.

        Snapping a satellite subset S replaces the joint conditional by
        P(U0, U_rest | x) * prod_{i in S} P(U_i | U0) with the satellite
        factor averaged over x, which makes every satellite in S exactly
        conditionally independent of X given U0.
        """
        w = _normalize_rows(np.asarray(wflat, float)).reshape((self.nx,) + self.sizes)
        n_sat = len(self.sizes) - 1
        cands = [w.reshape(self.nx, self.dim)]
        if n_sat < 1:
            return cands
        joint = self.px.reshape((-1,) + (1,) * len(self.sizes)) * w
        p_u0 = joint.sum(axis=tuple(range(2, joint.ndim))).sum(axis=0)  # (n0,)
        sat_factors = []
        for i in range(n_sat):
            ax = 2 + i
            other = tuple(a for a in range(2, joint.ndim) if a != ax)
            m = joint.sum(axis=other).sum(axis=0)                        # (n0, ni)
            denom = np.where(p_u0 > 0, p_u0, 1.0)[:, None]
            f = m / denom
            f[p_u0 == 0] = 1.0 / self.sizes[1 + i]
            sat_factors.append(f)
        subsets = [frozenset([i]) for i in range(n_sat)]
        if n_sat > 1:
            subsets.append(frozenset(range(n_sat)))
        for S in subsets:
            keep_axes = tuple(2 + i for i in range(n_sat) if i in S)
            ws = w.sum(axis=keep_axes, keepdims=True)
            for i in S:
                shape = [1] * w.ndim
                shape[1] = self.sizes[0]
                shape[2 + i] = self.sizes[1 + i]
                ws = ws * sat_factors[i].reshape(shape)
            cands.append(ws.reshape(self.nx, self.dim))
        return cands


def _gw_program(h: HypothesisPair, cards: dict, rates: RatePoint) -> _Program:
    h0 = h.h0
    px = marginalize(h0, "X").mass
    py1 = conditional(h0, "Y1", "X")
    py2 = conditional(h0, "Y2", "X")
    nx = px.size
    n0, n1, n2 = cards["U0"], cards["U1"], cards["U2"]
    hx = float(_bh(px[None])[0])

    def eval_batch(wflat):
        w = _normalize_rows(wflat).reshape(-1, nx, n0, n1, n2)
        jx = px[None, :, None, None, None] * w
        t_ab = jx.sum(axis=4)
        t_ac = jx.sum(axis=3)
        p_xa = t_ab.sum(axis=3)
        p_a = p_xa.sum(axis=1)
        h_xa = _bh(p_xa)
        h_a = _bh(p_a)
        i0 = hx + h_a - h_xa
        i1 = h_xa + _bh(t_ab.sum(axis=1)) - h_a - _bh(t_ab)
        i2 = h_xa + _bh(t_ac.sum(axis=1)) - h_a - _bh(t_ac)
        a1 = np.einsum("nxab,xy->naby", t_ab, py1)
        th1 = _bh(a1.sum(axis=3)) + _bh(a1.sum(axis=(1, 2))) - _bh(a1)
        a2 = np.einsum("nxac,xy->nacy", t_ac, py2)
        th2 = _bh(a2.sum(axis=3)) + _bh(a2.sum(axis=(1, 2))) - _bh(a2)
        gs = np.stack([i0 - rates.r0, i1 - rates.r1, i2 - rates.r2], axis=1)
        return np.maximum(th1, 0.0), np.maximum(th2, 0.0), gs

    return _Program(nx, {"U0": n0, "U1": n1, "U2": n2}, eval_batch, ("r0", "r1", "r2"),
                    px=px)


def _hb_arrays(h0: JointPmf):
    pxz_j = marginalize(h0, ("X", "Z1"))
    pxz = np.transpose(pxz_j.mass, [pxz_j.axis_index("X"), pxz_j.axis_index("Z1")])
    py1_xz = conditional(h0, "Y1", ("X", "Z1"))
    py2 = conditional(h0, "Y2", "X")
    return pxz, py1_xz, py2


def _hb_program(h: HypothesisPair, cards: dict, r: float) -> _Program:
    pxz, py1_xz, py2 = _hb_arrays(h.h0)
    nx = pxz.shape[0]
    n0, n1 = cards["U0"], cards["U1"]

    def eval_batch(wflat):
        w = _normalize_rows(wflat).reshape(-1, nx, n0, n1)
        jxz = np.einsum("nxab,xz->nxzab", w, pxz)
        p_xa = jxz.sum(axis=(2, 4))
        p_xza = jxz.sum(axis=4)
        p_zab = jxz.sum(axis=1)
        i0 = _bh(p_xa.sum(axis=1)) + _bh(p_xa.sum(axis=2)) - _bh(p_xa)
        i1c = _bh(p_xza) + _bh(p_zab) - _bh(p_xza.sum(axis=1)) - _bh(jxz)
        b1 = np.einsum("nxzab,xzy->nzaby", jxz, py1_xz)
        th1 = (_bh(b1.sum(axis=4)) + _bh(b1.sum(axis=(2, 3)))
               - _bh(b1.sum(axis=(2, 3, 4))) - _bh(b1))
        c2 = np.einsum("nxa,xy->nay", p_xa, py2)
        th2 = _bh(c2.sum(axis=2)) + _bh(c2.sum(axis=1)) - _bh(c2)
        gs = (i0 + i1c - r)[:, None]
        return np.maximum(th1, 0.0), np.maximum(th2, 0.0), gs

    return _Program(nx, {"U0": n0, "U1": n1}, eval_batch, ("r",), px=pxz.sum(axis=1))


def _general_program(h: HypothesisPair, cards: dict, rates: RatePoint) -> _Program:
    pxz, py1_xz, py2 = _hb_arrays(h.h0)
    nx = pxz.shape[0]
    n0, n1, n2 = cards["U0"], cards["U1"], cards["U2"]

    def eval_batch(wflat):
        w = _normalize_rows(wflat).reshape(-1, nx, n0, n1, n2)
        jxz = np.einsum("nxabc,xz->nxzabc", w, pxz)
        t4 = jxz.sum(axis=5)                        # (n,x,z,a,b)
        p_xa = t4.sum(axis=(2, 4))
        p_a = p_xa.sum(axis=1)
        i0 = _bh(p_xa.sum(axis=2)) + _bh(p_a) - _bh(p_xa)
        i1c = (_bh(t4.sum(axis=4)) + _bh(t4.sum(axis=1))
               - _bh(t4.sum(axis=(1, 4))) - _bh(t4))
        t_xac = jxz.sum(axis=(2, 4))                # (n,x,a,c)
        i2 = _bh(t_xac.sum(axis=3)) + _bh(t_xac.sum(axis=1)) - _bh(p_a) - _bh(t_xac)
        b1 = np.einsum("nxzab,xzy->nzaby", t4, py1_xz)
        th1 = (_bh(b1.sum(axis=4)) + _bh(b1.sum(axis=(2, 3)))
               - _bh(b1.sum(axis=(2, 3, 4))) - _bh(b1))
        a2 = np.einsum("nxac,xy->nacy", t_xac, py2)
        th2 = _bh(a2.sum(axis=3)) + _bh(a2.sum(axis=(1, 2))) - _bh(a2)
        gs = np.stack([i0 - rates.r0, i1c - rates.r1, i2 - rates.r2], axis=1)
        return np.maximum(th1, 0.0), np.maximum(th2, 0.0), gs

    return _Program(nx, {"U0": n0, "U1": n1, "U2": n2}, eval_batch, ("r0", "r1", "r2"),
                    px=pxz.sum(axis=1))


def _check_degraded_pair(bc) -> tuple[Channel, Channel]:
    try:
        ch1, ch2 = bc
    except (TypeError, ValueError):
        raise DegradednessUnverifiable(
            "bc must be the factorized pair (P_V1_given_W, P_V2_given_V1)")
    for ch in (ch1, ch2):
        if not isinstance(ch, Channel) or len(ch.from_axes) != 1 or len(ch.to_axes) != 1:
            raise DegradednessUnverifiable("bc components must be single-axis channels")
    if (ch1.from_axes[0].name, ch1.to_axes[0].name) != ("W", "V1"):
        raise DegradednessUnverifiable("first component must map W -> V1")
    if (ch2.from_axes[0].name, ch2.to_axes[0].name) != ("V1", "V2"):
        raise DegradednessUnverifiable("second component must map V1 -> V2")
    if ch1.to_axes[0].size != ch2.from_axes[0].size:
        raise DegradednessUnverifiable("V1 alphabet mismatch between components")
    return ch1, ch2


def _noisy_program(h: HypothesisPair, cards: dict, bc):
    """Program for the hybrid-coding region; the current map f lives in
    `state` and the returned `gs_for_fs` scores a batch of maps at fixed w."""
    ch1, ch2 = _check_degraded_pair(bc)
    pv1gw = ch1.kernel
    pv2gv1 = ch2.kernel
    nw = pv1gw.shape[0]
    pxz, py1_xz, py2 = _hb_arrays(h.h0)
    pzgx = conditional(h.h0, "Z1", "X")
    px = pxz.sum(axis=1)
    nx = pxz.shape[0]
    n0, n1 = cards["U0"], cards["U1"]
    state = {"f": None}

    def thetas(wflat):
        w = _normalize_rows(wflat).reshape(-1, nx, n0, n1)
        jxz = np.einsum("nxab,xz->nxzab", w, pxz)
        b1 = np.einsum("nxzab,xzy->nzaby", jxz, py1_xz)
        th1 = (_bh(b1.sum(axis=4)) + _bh(b1.sum(axis=(2, 3)))
               - _bh(b1.sum(axis=(2, 3, 4))) - _bh(b1))
        p_xa = jxz.sum(axis=(2, 4))
        c2 = np.einsum("nxa,xy->nay", p_xa, py2)
        th2 = _bh(c2.sum(axis=2)) + _bh(c2.sum(axis=1)) - _bh(c2)
        return np.maximum(th1, 0.0), np.maximum(th2, 0.0)

    def gs_for_fs(wflat, fs):
        """Constraint values (M, 2) for M hybrid maps at a single channel."""
        w = _normalize_rows(np.asarray(wflat).reshape(nx, n0 * n1)).reshape(nx, n0, n1)
        p_xab = px[:, None, None] * w
        p_xa = p_xab.sum(axis=2)
        p_a = p_xa.sum(axis=0)
        h_ab = _bh(p_xab.sum(axis=0)[None])[0]
        i_u0x = float(_bh(p_xa.sum(axis=1)[None])[0] + _bh(p_a[None])[0]
                      - _bh(p_xa[None])[0])
        i_u1x_u0 = float(_bh(p_xa[None])[0] + h_ab - _bh(p_a[None])[0]
                         - _bh(p_xab[None])[0])
        fv1 = pv1gw[fs]                      # (M, n0, n1, nx, nv1)
        e = np.einsum("xab,mabxv,xz->mabvz", p_xab, fv1, pzgx)
        i_u1_v1z = (_bh(e.sum(axis=2)) + h_ab
                    - _bh(e.sum(axis=(2, 3, 4))) - _bh(e))
        p_av2 = np.einsum("xab,mabxv,vu->mau", p_xab, fv1, pv2gv1)
        i_u0v2 = _bh(p_av2.sum(axis=2)) + _bh(p_av2.sum(axis=1)) - _bh(p_av2)
        return np.stack([i_u1x_u0 - i_u1_v1z, i_u0x - i_u0v2], axis=1)

    def eval_batch(wflat):
        th1, th2 = thetas(wflat)
        w = _normalize_rows(wflat).reshape(-1, nx, n0, n1)
        N = w.shape[0]
        f = state["f"][None]
        gs = np.empty((N, 2))
        for i in range(N):                   # per-channel constraint pass
            gs[i] = gs_for_fs(w[i], f)[0]
        return th1, th2, gs

    prog = _Program(nx, {"U0": n0, "U1": n1}, eval_batch, ("decode1", "decode2"),
                    px=px)
    return prog, {"state": state, "nw": nw, "nx": nx, "n0": n0, "n1": n1,
                  "gs_for_fs": gs_for_fs, "thetas": thetas}


# ---------------------------------------------------------------------------
# ascent kernel
# ---------------------------------------------------------------------------

def _aug_batch(prog: _Program, lam: float, penalty: float, W: np.ndarray) -> np.ndarray:
    th1, th2, gs = prog.eval_batch(W)
    pen = np.square(np.maximum(gs, 0.0)).sum(axis=1)
    return lam * th1 + (1.0 - lam) * th2 - penalty * pen


def _ascend(prog: _Program, lam: float, opts: SolverOptions, w0: np.ndarray) -> np.ndarray:
    w = _project_simplex_rows(np.asarray(w0, dtype=np.float64).reshape(prog.nx, prog.dim))
    f = float(_aug_batch(prog, lam, opts.penalty, w[None])[0])
    step = opts.init_step
    h = opts.fd_step
    n, d = w.shape
    flat_idx = np.arange(n * d)
    stall = 0
    for _ in range(opts.max_iters):
        bumps = np.repeat(w.reshape(1, n * d), n * d, axis=0)
        bumps[flat_idx, flat_idx] += h
        vals = _aug_batch(prog, lam, opts.penalty, bumps.reshape(n * d, n, d))
        grad = (vals - f).reshape(n, d) / h
        gmax = np.abs(grad).max()
        if gmax < 1e-10:
            break
        scales = step * np.power(0.5, np.arange(12))
        cands = np.stack([_project_simplex_rows(w + s * grad / gmax) for s in scales])
        cvals = _aug_batch(prog, lam, opts.penalty, cands)
        took = None
        for ci in range(len(scales)):
            if cvals[ci] > f + 1e-12:
                took = ci
                break
        if took is None:
            break
        gain = float(cvals[took]) - f
        w, f = cands[took], float(cvals[took])
        step = min(scales[took] * 1.5, 0.5)
        stall = stall + 1 if gain < 1e-9 else 0
        if stall >= 3:
            break
    return w


def _repair(prog: _Program, lam: float, w: np.ndarray) -> np.ndarray | None:
    """Pull w back into the feasible set, losing as little objective as
    possible.

    For every structural snap of w (exact satellite factorizations), blend
    toward its x-average until the remaining constraints hold; any x-constant
    channel makes all auxiliaries independent of X, so it satisfies every
    rate and decodability constraint.  The best feasible candidate under the
    current scalarized objective wins.
    """
    def feasible(ww):
        _, _, gs = prog.eval_all(ww)
        return all(g <= FEAS_TOL for g in gs)

    def value(ww):
        t1, t2, _ = prog.eval_all(ww)
        return lam * t1 + (1.0 - lam) * t2

    best, best_val = None, -np.inf
    for ws in prog.snap_candidates(w):
        if feasible(ws):
            cand = ws
        else:
            anchor = np.broadcast_to(
                prog.px @ ws, (prog.nx, ws.shape[1])).copy()   # x-average
            if not feasible(anchor):
                anchor = np.full_like(ws, 1.0 / ws.shape[1])
                if not feasible(anchor):
                    continue
            lo, hi = 0.0, 1.0
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                if feasible((1.0 - mid) * anchor + mid * ws):
                    lo = mid
                else:
                    hi = mid
            cand = (1.0 - lo) * anchor + lo * ws
        v = value(cand)
        if v > best_val:
            best, best_val = cand, v
    return best


def _solve_lambda(prog: _Program, lam: float, opts: SolverOptions, seed_tags,
                  extra_inits=()) -> tuple[float, np.ndarray]:
    """Best feasible channel for one scalarization weight."""
    inits = list(prog.structured_inits()) + [np.asarray(e) for e in extra_inits]
    best_val, best_w = -np.inf, None
    for r in range(opts.restarts + len(inits)):
        if r < len(inits):
            w0 = inits[r]
        else:
            rng = substream(opts.seed, *seed_tags, "restart", r - len(inits))
            w0 = rng.dirichlet(np.ones(prog.dim), size=prog.nx)
        w = _ascend(prog, lam, opts, w0)
        w = _repair(prog, lam, w)
        if w is None:
            continue
        th1, th2, _ = prog.eval_all(w)
        val = lam * th1 + (1.0 - lam) * th2
        if val > best_val + 1e-15:
            best_val, best_w = val, w
    if best_w is None:
        raise NoFeasiblePoint("no feasible witness found (unreachable for rate-type "
                              "constraints: the constant auxiliary is always feasible)")
    return best_val, _normalize_rows(best_w)


def _pareto_envelope(points: list) -> list:
    """Dedupe, drop dominated points, and keep the upper-concave envelope."""
    uniq = []
    for p in points:
        if not any(abs(p.theta1 - q.theta1) <= 1e-6 and abs(p.theta2 - q.theta2) <= 1e-6
                   for q in uniq):
            uniq.append(p)
    uniq.sort(key=lambda p: (-p.theta1, -p.theta2))
    pareto = []
    best_t2 = -np.inf
    for p in uniq:
        if p.theta2 > best_t2 + 1e-9:
            pareto.append(p)
            best_t2 = p.theta2
    pareto.reverse()                    # theta1 ascending, theta2 descending
    if len(pareto) <= 2:
        return pareto
    hull = []
    for p in pareto:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = ((p.theta1 - a.theta1) * (b.theta2 - a.theta2)
                     - (p.theta2 - a.theta2) * (b.theta1 - a.theta1))
            if cross < -1e-12:          # b strictly below chord a--p
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def _sweep(prog: _Program, opts: SolverOptions, scheme: str) -> list:
    lams = (np.linspace(0.0, 1.0, opts.lambda_grid) if opts.lambda_grid > 1
            else np.array([0.5]))
    supported = []
    for li, lam in enumerate(lams):
        _, w = _solve_lambda(prog, float(lam), opts, (scheme, li))
        th1, th2, gs = prog.eval_all(w)
        witness = AuxiliaryWitness(
            channel=_witness_channel(prog.nx, prog.card_map, w),
            cardinalities=dict(prog.card_map))
        supported.append(FrontierPoint(
            lam=float(lam), theta1=th1, theta2=th2, witness=witness,
            slacks={n: -g for n, g in zip(prog.slack_names, gs)}))
    return supported


def _finish(supported, opts, label, t0, extra_meta=None) -> RegionFrontier:
    meta = {
        "label": label,
        "lambda_grid": opts.lambda_grid,
        "restarts": opts.restarts,
        "max_iters": opts.max_iters,
        "seed": opts.seed,
        "runtime_s": time.perf_counter() - t0,
        "supported_count": len(supported),
    }
    if extra_meta:
        meta.update(extra_meta)
    return RegionFrontier(points=_pareto_envelope(supported), meta=meta)


# ---------------------------------------------------------------------------
# public frontier operations
# ---------------------------------------------------------------------------

def _require_structure(h: HypothesisPair, tag: str):
    if h.structure_tag != tag:
        raise StructureError(f"expected {tag!r} structure, got {h.structure_tag!r}")
    if not np.all(np.isfinite(h.h0.mass)):
        raise ValueError("non-finite pmf")


def gw_frontier(h: HypothesisPair, rates: RatePoint,
                opts: SolverOptions = SolverOptions()) -> RegionFrontier:
    """Exponent frontier with one common and two individual bit pipes.

    theta1 <= I(U0,U1;Y1), theta2 <= I(U0,U2;Y2) subject to R0 >= I(U0;X),
    R1 >= I(U1;X|U0), R2 >= I(U2;X|U0).  This characterization is tight, so
    the result carries label "exact".
    """
    _require_structure(h, "against-independence")
    t0 = time.perf_counter()
    cards = _resolve_cards("gw", h.h0.axis("X").size, opts)
    prog = _gw_program(h, cards, rates)
    return _finish(_sweep(prog, opts, "gw"), opts, "exact", t0,
                   {"rates": (rates.r0, rates.r1, rates.r2)})


def hb_frontier(h: HypothesisPair, r: RatePoint,
                opts: SolverOptions = SolverOptions()) -> RegionFrontier:
    """Exponent frontier with a single common pipe of rate r.r0 and side
    information Z1 at receiver 1.

    theta1 <= I(U0,U1;Y1|Z1), theta2 <= I(U0;Y2) subject to
    R >= I(U0;X) + I(U1;X|U0,Z1).  The result is labeled "exact" when the
    (numerical) less-noisy check holds and "inner-bound" otherwise.
    """
    _require_structure(h, "against-conditional-independence")
    t0 = time.perf_counter()
    cards = _resolve_cards("hb", h.h0.axis("X").size, opts)
    prog = _hb_program(h, cards, r.r0)
    supported = _sweep(prog, opts, "hb")
    verdict = less_noisy_check(marginalize(h.h0, ("X", "Z1", "Y2")), opts)
    label = "exact" if verdict.holds else "inner-bound"
    return _finish(supported, opts, label, t0,
                   {"rate": r.r0, "less_noisy_holds": verdict.holds,
                    "less_noisy_min_gap": verdict.min_gap})


def general_frontier(h: HypothesisPair, rates: RatePoint,
                     opts: SolverOptions = SolverOptions()) -> RegionFrontier:
    """Inner bound with three pipes and side information Z1 at receiver 1."""
    _require_structure(h, "against-conditional-independence")
    t0 = time.perf_counter()
    cards = _resolve_cards("general", h.h0.axis("X").size, opts)
    prog = _general_program(h, cards, rates)
    return _finish(_sweep(prog, opts, "general"), opts, "inner-bound", t0,
                   {"rates": (rates.r0, rates.r1, rates.r2)})


def _best_hybrid(info, lam, penalty, opts, w, thw, rng) -> None:
    """Set state['f'] to the map maximizing the penalized objective at w."""
    entries = info["n0"] * info["n1"] * info["nx"]
    shape = (info["n0"], info["n1"], info["nx"])
    nw = info["nw"]
    count = float(nw) ** entries
    obj = lam * thw[0] + (1.0 - lam) * thw[1]

    def score(fs):
        gs = info["gs_for_fs"](w, fs)
        return obj - penalty * np.square(np.maximum(gs, 0.0)).sum(axis=1)

    if count <= opts.hybrid_exhaustive_limit:
        fs = np.array(list(itertools.product(range(nw), repeat=entries)), dtype=np.int64)
        vals = np.concatenate([score(fs[i:i + 4096].reshape(-1, *shape))
                               for i in range(0, len(fs), 4096)])
        best = fs[int(np.argmax(vals))]
    else:
        fs = rng.integers(0, nw, size=(opts.hybrid_random_functions, entries))
        vals = score(fs.reshape(-1, *shape))
        best = fs[int(np.argmax(vals))].copy()
        best_v = float(vals.max())
        improved = True
        while improved:                  # local single-entry flips
            improved = False
            for pos in range(entries):
                for sym in range(nw):
                    if best[pos] == sym:
                        continue
                    trial = best.copy()
                    trial[pos] = sym
                    v = float(score(trial.reshape(1, *shape))[0])
                    if v > best_v + 1e-12:
                        best, best_v = trial, v
                        improved = True
    info["state"]["f"] = best.reshape(shape)


def noisy_frontier(h: HypothesisPair, bc,
                   opts: SolverOptions = SolverOptions()) -> RegionFrontier:
    """Inner bound for a degraded broadcast channel via hybrid coding.

    theta1 <= I(U0,U1;Y1|Z1), theta2 <= I(U0;Y2) subject to the decodability
    constraints I(U1;X|U0) <= I(U1;V1,Z1|U0) and I(U0;X) <= I(U0;V2), with
    channel input W = f(U0,U1,X) ranging over deterministic maps (exhaustive
    when the function space is small, randomized search with single-entry
    flips otherwise).
    """
    _require_structure(h, "against-conditional-independence")
    t0 = time.perf_counter()
    cards = _resolve_cards("noisy", h.h0.axis("X").size, opts)
    prog, info = _noisy_program(h, cards, bc)
    state = info["state"]
    lams = (np.linspace(0.0, 1.0, opts.lambda_grid) if opts.lambda_grid > 1
            else np.array([0.5]))
    supported = []
    for li, lam in enumerate(lams):
        lam = float(lam)
        inits = prog.structured_inits()
        best = None
        for r in range(opts.restarts + len(inits)):
            rng = substream(opts.seed, "noisy", li, "restart", r)
            if r < len(inits):
                w = inits[r].copy()
            else:
                w = rng.dirichlet(np.ones(prog.dim), size=prog.nx)
            thw = tuple(float(t[0]) for t in info["thetas"](w[None]))[:2]
            _best_hybrid(info, lam, opts.penalty, opts, w, thw, rng)
            for _ in range(opts.hybrid_rounds):
                w = _ascend(prog, lam, opts, w)
                thw = tuple(float(t[0]) for t in info["thetas"](w[None]))[:2]
                _best_hybrid(info, lam, opts.penalty, opts, w, thw, rng)
            w2 = _repair(prog, lam, w)
            if w2 is None:
                continue
            th1, th2, gs = prog.eval_all(w2)
            val = lam * th1 + (1.0 - lam) * th2
            if best is None or val > best[0] + 1e-15:
                best = (val, w2, state["f"].copy(), th1, th2, gs)
        if best is None:
            raise NoFeasiblePoint("noisy frontier: no feasible witness")
        _, w2, fbest, th1, th2, gs = best
        witness = AuxiliaryWitness(
            channel=_witness_channel(prog.nx, prog.card_map, w2),
            cardinalities=dict(prog.card_map),
            hybrid_function=fbest)
        supported.append(FrontierPoint(
            lam=lam, theta1=th1, theta2=th2, witness=witness,
            slacks={n: -g for n, g in zip(prog.slack_names, gs)}))
    return _finish(supported, opts, "inner-bound", t0, {"nw": info["nw"]})


def less_noisy_check(p: JointPmf, opts: SolverOptions = SolverOptions()) -> LessNoisyVerdict:
    """Minimize I(U;Z1) - I(U;Y2) over P_{U|X} with |U| = |X| + 1.

    The verdict is numerical: `holds` means the minimized gap is >= -1e-6.
    The cardinality |X|+1 is the standard support-lemma size for one scalar
    inequality; no tighter bound is assumed.
    """
    for name in ("X", "Z1", "Y2"):
        p.axis_index(name)
    h0 = marginalize(p, ("X", "Z1", "Y2"))
    pzgx = conditional(h0, "Z1", "X")
    pygx = conditional(h0, "Y2", "X")
    px = marginalize(h0, "X").mass
    nx = px.size
    cards = _resolve_cards("less-noisy", nx, opts)
    nu = cards["U"]

    def eval_batch(wflat):
        w = _normalize_rows(wflat).reshape(-1, nx, nu)
        p_xu = px[None, :, None] * w
        p_u = p_xu.sum(axis=1)
        h_u = _bh(p_u)
        juz = np.einsum("nxu,xz->nuz", p_xu, pzgx)
        juy = np.einsum("nxu,xy->nuy", p_xu, pygx)
        i_uz = h_u + _bh(juz.sum(axis=1)) - _bh(juz)
        i_uy = h_u + _bh(juy.sum(axis=1)) - _bh(juy)
        gap = i_uz - i_uy
        return -gap, -gap, np.zeros((w.shape[0], 0))

    prog = _Program(nx, {"U": nu}, eval_batch, (), px=px)
    best_val, best_w = _solve_lambda(prog, 1.0, opts, ("less-noisy",))
    min_gap = -best_val
    return LessNoisyVerdict(
        holds=bool(min_gap >= -LESS_NOISY_TOL),
        min_gap=float(min_gap),
        argmin_witness=_witness_channel(nx, {"U": nu}, best_w))


def maximize_weighted_exponents(objective, constraints, nx: int, cards: dict,
                                opts: SolverOptions = SolverOptions(),
                                ) -> tuple[float, AuxiliaryWitness]:
    """Shared constrained-maximization kernel, exposed directly.

    `objective(kernel)` and each `constraints[i](kernel)` receive one channel
    kernel of shape (nx, *cards values) with rows normalized; constraint
    values must be <= 0 when satisfied.  Returns the best feasible value and
    its witness; deterministic given opts.seed.
    """
    sizes = tuple(cards.values())

    def eval_batch(wflat):
        w = _normalize_rows(wflat).reshape((-1, nx) + sizes)
        vals = np.array([float(objective(wi)) for wi in w])
        gs = np.array([[float(g(wi)) for g in constraints] for wi in w]
                      ).reshape(w.shape[0], len(constraints))
        return vals, vals, gs

    prog = _Program(nx, dict(cards), eval_batch,
                    tuple(f"c{i}" for i in range(len(constraints))))
    val, w = _solve_lambda(prog, 1.0, opts, ("mwe",))
    witness = AuxiliaryWitness(channel=_witness_channel(nx, dict(cards), w),
                               cardinalities=dict(cards))
    return val, witness


# ---------------------------------------------------------------------------
# witness re-evaluation through probcore (independent of the solver path)
# ---------------------------------------------------------------------------

def evaluate_gw_witness(h: HypothesisPair, witness: AuxiliaryWitness,
                        rates: RatePoint) -> dict:
    joint = extend(h.h0, witness.channel)
    th1 = mutual_information(joint, ("U0", "U1"), "Y1")
    th2 = mutual_information(joint, ("U0", "U2"), "Y2")
    slacks = {
        "r0": rates.r0 - mutual_information(joint, "U0", "X"),
        "r1": rates.r1 - mutual_information(joint, "U1", "X", "U0"),
        "r2": rates.r2 - mutual_information(joint, "U2", "X", "U0"),
    }
    return {"theta1": th1, "theta2": th2, "slacks": slacks,
            "feasible": all(s >= -1e-9 for s in slacks.values())}


def evaluate_hb_witness(h: HypothesisPair, witness: AuxiliaryWitness,
                        r: RatePoint) -> dict:
    joint = extend(h.h0, witness.channel)
    th1 = mutual_information(joint, ("U0", "U1"), "Y1", "Z1")
    th2 = mutual_information(joint, "U0", "Y2")
    need = (mutual_information(joint, "U0", "X")
            + mutual_information(joint, "U1", "X", ("U0", "Z1")))
    slacks = {"r": r.r0 - need}
    return {"theta1": th1, "theta2": th2, "slacks": slacks,
            "feasible": slacks["r"] >= -1e-9}


def evaluate_general_witness(h: HypothesisPair, witness: AuxiliaryWitness,
                             rates: RatePoint) -> dict:
    joint = extend(h.h0, witness.channel)
    th1 = mutual_information(joint, ("U0", "U1"), "Y1", "Z1")
    th2 = mutual_information(joint, ("U0", "U2"), "Y2")
    slacks = {
        "r0": rates.r0 - mutual_information(joint, "U0", "X"),
        "r1": rates.r1 - mutual_information(joint, "U1", "X", ("U0", "Z1")),
        "r2": rates.r2 - mutual_information(joint, "U2", "X", "U0"),
    }
    return {"theta1": th1, "theta2": th2, "slacks": slacks,
            "feasible": all(s >= -1e-9 for s in slacks.values())}


def hybrid_channel(witness: AuxiliaryWitness, nw: int | None = None) -> Channel:
    """Deterministic channel (U0,U1,X) -> W realized by the witness's map."""
    f = witness.hybrid_function
    if f is None:
        raise ValueError("witness has no hybrid function")
    n0, n1, nx = f.shape
    if nw is None:
        nw = int(f.max()) + 1
    kernel = np.zeros((n0, n1, nx, nw))
    it = np.nditer(f, flags=["multi_index"])
    for w in it:
        kernel[it.multi_index + (int(w),)] = 1.0
    u0, u1 = witness.channel.to_axes
    return Channel((u0, u1, Alphabet("X", nx)), (Alphabet("W", nw),), kernel)


def evaluate_noisy_witness(h: HypothesisPair, witness: AuxiliaryWitness, bc) -> dict:
    ch1, ch2 = _check_degraded_pair(bc)
    nw = ch1.from_axes[0].size
    f = witness.hybrid_function
    if f is not None and int(f.max()) + 1 > nw:
        raise ValueError("hybrid function range exceeds |W|")
    joint = extend(h.h0, witness.channel)
    joint = extend(joint, hybrid_channel(witness, nw))
    joint = extend(joint, ch1)
    joint = extend(joint, ch2)
    th1 = mutual_information(joint, ("U0", "U1"), "Y1", "Z1")
    th2 = mutual_information(joint, "U0", "Y2")
    slacks = {
        "decode1": (mutual_information(joint, "U1", ("V1", "Z1"), "U0")
                    - mutual_information(joint, "U1", "X", "U0")),
        "decode2": (mutual_information(joint, "U0", "V2")
                    - mutual_information(joint, "U0", "X")),
    }
    return {"theta1": th1, "theta2": th2, "slacks": slacks,
            "feasible": all(s >= -1e-9 for s in slacks.values())}

"""Monte Carlo execution of the three random-coding schemes.

Each trial draws fresh codebooks (so the reported error rates estimate the
codebook-averaged quantities), samples source blocks under the requested
hypothesis, runs the scheme's encoder and per-receiver decision pipeline, and
accumulates type-I/type-II error counts.

Decision pipelines
------------------
The common-pipe scheme without blocks ("gw") uses the joint-typicality
accept/reject rule directly.  The block schemes ("hb", "noisy") decode the
intended codewords per block and then decide via a Neyman-Pearson test over
the i.i.d. blocks: the default per-block statistic is the plug-in
log-likelihood ratio of the local observations given the decoded codewords,
summed over blocks and compared to a threshold calibrated on held-out
null-hypothesis trials to meet the type-I budget.  A binary per-block
typicality statistic (count of passing blocks against a calibrated fraction)
is available as `statistic="typicality"`.  Codeword decoding is maximum
likelihood by default; unique-in-candidate-set typicality decoding is
available as `decode_rule="typicality"` (failing blocks count toward the
alternative hypothesis).
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CodebookBudgetError, SchemeParamError
from .probcore import (Alphabet, Channel, HypothesisPair, JointPmf,
                       conditional, extend, is_typical, marginalize)
from .regions import RatePoint
from .rng import RNG_ALGORITHM, substream

SENTINEL = 0          # in-band encoder-failure message; real indices are 1-based
_NEG = -1.0e9         # finite stand-in for log(0) in score/llr tables
_FAIL_STAT = -1.0e6   # per-block statistic for a failed decode


@dataclass(frozen=True)
class SchemeParams:
    """Validated configuration of one simulated scheme instance.

    Rates must satisfy the scheme's strict feasibility inequalities with
    slack `slack_delta`; codebook sizes are the rounded-down powers
    2^floor(k*R) and must fit the memory budget.
    """

    scheme: str
    h: HypothesisPair
    aux_channel: Channel
    rates: RatePoint
    epsilon: float
    n: int
    k: int | None = None
    B: int | None = None
    mu: float | None = None
    bc: tuple | None = None
    hybrid_f: np.ndarray | None = None
    decode_rule: str = "ml"
    statistic: str = "llr"
    selection_rule: str = "uniform"
    mu_decode: float | None = None
    slack_delta: float = 1e-6
    codebook_budget: int = 1 << 26
    calibration_trials: int = 2000

    def __post_init__(self):
        if self.scheme not in ("gw", "hb", "noisy"):
            raise SchemeParamError(f"unknown scheme {self.scheme!r}")
        if not (0 < self.epsilon < 1):
            raise SchemeParamError("epsilon must lie in (0,1)")
        if self.decode_rule not in ("ml", "typicality"):
            raise SchemeParamError(f"unknown decode_rule {self.decode_rule!r}")
        if self.statistic not in ("llr", "typicality"):
            raise SchemeParamError(f"unknown statistic {self.statistic!r}")
        if self.selection_rule not in ("uniform", "min-divergence"):
            raise SchemeParamError(f"unknown selection_rule {self.selection_rule!r}")
        if self.scheme == "gw":
            if self.h.structure_tag != "against-independence":
                raise SchemeParamError("gw needs against-independence structure")
            object.__setattr__(self, "k", self.n)
            object.__setattr__(self, "B", 1)
        else:
            if self.h.structure_tag != "against-conditional-independence":
                raise SchemeParamError(
                    f"{self.scheme} needs against-conditional-independence structure")
            if self.k is None or self.B is None or self.k * self.B != self.n:
                raise SchemeParamError("hb/noisy require n = k*B")
        if self.mu is None:
            object.__setattr__(self, "mu", 0.15 if self.n <= 200 else 0.1)
        if self.mu <= 0:
            raise SchemeParamError("mu must be positive")
        if self.mu_decode is None:
            object.__setattr__(self, "mu_decode", self.mu)
        info = self._witness_informations()
        self._check_rates(info)
        sizes = message_sizes(self)
        total = codebook_cells(self, sizes)
        if total > self.codebook_budget:
            raise CodebookBudgetError(
                f"codebooks need {total} codeword symbols > budget {self.codebook_budget}")

    def _witness_informations(self) -> dict:
        from .probcore import mutual_information as mi
        joint = extend(self.h.h0, self.aux_channel)
        info = {"I(U0;X)": mi(joint, "U0", "X"),
                "I(U1;X|U0)": mi(joint, "U1", "X", "U0")}
        if self.scheme == "gw":
            info["I(U2;X|U0)"] = mi(joint, "U2", "X", "U0")
            info["theta1"] = mi(joint, ("U0", "U1"), "Y1")
            info["theta2"] = mi(joint, ("U0", "U2"), "Y2")
        else:
            info["I(U1;Z1|U0)"] = mi(joint, "U1", "Z1", "U0")
            info["theta1"] = mi(joint, ("U0", "U1"), "Y1", "Z1")
            info["theta2"] = mi(joint, "U0", "Y2")
        if self.scheme == "noisy":
            from .regions import _check_degraded_pair
            ch1, ch2 = _check_degraded_pair(self.bc)
            if self.hybrid_f is None:
                raise SchemeParamError("noisy scheme requires hybrid_f")
            jn = extend(joint, _onehot_channel(self.hybrid_f, self.aux_channel,
                                               ch1.from_axes[0].size))
            jn = extend(jn, ch1)
            jn = extend(jn, ch2)
            info["I(U1;V1,Z1|U0)"] = mi(jn, "U1", ("V1", "Z1"), "U0")
            info["I(U0;V2)"] = mi(jn, "U0", "V2")
        object.__setattr__(self, "theory", info)
        return info

    def _check_rates(self, info: dict):
        d = self.slack_delta
        r = self.rates
        if self.scheme == "gw":
            checks = [("R0 > I(U0;X)", r.r0, info["I(U0;X)"] + d),
                      ("R1 > I(U1;X|U0)", r.r1, info["I(U1;X|U0)"] + d),
                      ("R2 > I(U2;X|U0)", r.r2, info["I(U2;X|U0)"] + d)]
            for name, lhs, rhs in checks:
                if not lhs >= rhs:
                    raise SchemeParamError(f"rate slack violated: {name} "
                                           f"needs {lhs} >= {rhs}")
        elif self.scheme == "hb":
            r1p = r.r1_prime
            if r1p is None:
                raise SchemeParamError("hb requires rates.r1_prime")
            if not r.r0 >= info["I(U0;X)"] + d:
                raise SchemeParamError(
                    f"rate slack violated: R0 > I(U0;X) needs "
                    f"{r.r0} >= {info['I(U0;X)'] + d}")
            if not r.r1 + r1p >= info["I(U1;X|U0)"] + d:
                raise SchemeParamError("rate slack violated: R1+R1' > I(U1;X|U0)")
            if not r1p <= info["I(U1;Z1|U0)"] - d:
                raise SchemeParamError("rate slack violated: R1' < I(U1;Z1|U0)")
        else:
            if not r.r1 <= info["I(U1;V1,Z1|U0)"] - d:
                raise SchemeParamError("rate slack violated: R1 <= I(U1;V1,Z1|U0)-d")
            if not r.r0 <= info["I(U0;V2)"] - d:
                raise SchemeParamError("rate slack violated: R0 <= I(U0;V2)-d")
            if not r.r0 >= info["I(U0;X)"] + d:
                raise SchemeParamError("rate slack violated: R0 > I(U0;X)")
            if not r.r1 >= info["I(U1;X|U0)"] + d:
                raise SchemeParamError("rate slack violated: R1 > I(U1;X|U0)")


def _onehot_channel(f: np.ndarray, aux: Channel, nw: int) -> Channel:
    """Deterministic (U0,U1,X) -> W channel from an index map."""
    n0, n1, nx = f.shape
    kernel = np.zeros((n0, n1, nx, nw))
    it = np.nditer(f, flags=["multi_index"])
    for w in it:
        kernel[it.multi_index + (int(w),)] = 1.0
    u0, u1 = aux.to_axes[:2]
    return Channel((u0, u1, Alphabet("X", nx)), (Alphabet("W", nw),), kernel)


def message_sizes(params: SchemeParams) -> dict:
    """Codeword counts 2^floor(k*R) per codebook, and bin counts."""
    k = params.k
    r = params.rates
    sizes = {"M0": 1 << max(0, math.floor(k * r.r0 + 1e-12))}
    if params.scheme == "gw":
        sizes["M1"] = 1 << max(0, math.floor(k * r.r1 + 1e-12))
        sizes["M2"] = 1 << max(0, math.floor(k * r.r2 + 1e-12))
    elif params.scheme == "hb":
        sizes["S1"] = 1 << max(0, math.floor(k * (r.r1 + r.r1_prime) + 1e-12))
        sizes["M1"] = 1 << max(0, math.floor(k * r.r1 + 1e-12))
    else:
        sizes["M1"] = 1 << max(0, math.floor(k * r.r1 + 1e-12))
    return sizes


def codebook_cells(params: SchemeParams, sizes: dict | None = None) -> int:
    sizes = sizes or message_sizes(params)
    k, B = params.k, params.B
    cells = B * sizes["M0"] * k
    if params.scheme == "gw":
        cells += B * sizes["M0"] * (sizes["M1"] + sizes["M2"]) * k
    else:
        sat = sizes.get("S1", sizes["M1"])
        cells += B * sizes["M0"] * sat * k
    return cells


@dataclass
class CodebookSet:
    """Realized random codebooks for one scheme instance (1-based messages)."""

    scheme: str
    k: int
    B: int
    u0: np.ndarray                      # (B, M0, k)
    u1: np.ndarray                      # (B, M0, S, k); S = satellites per cloud
    u2: np.ndarray | None               # (B, M0, M2, k), gw only
    bin_map: np.ndarray | None          # (S1,) -> 0..M1-1, hb only
    hybrid_f: np.ndarray | None
    seed: int
    sizes: dict


def _cdf(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return c


def _is_uniform_cdf(cdf: np.ndarray) -> bool:
    s = cdf.shape[-1]
    return bool(np.allclose(cdf, np.arange(1, s + 1) / s, atol=1e-15))


def _sample_from_cdf(rng, cdf: np.ndarray, shape) -> np.ndarray:
    if _is_uniform_cdf(cdf):
        return rng.integers(0, cdf.shape[-1], size=shape, dtype=np.int64)
    u = rng.random(shape)
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def _sample_conditional(rng, cond_cdf: np.ndarray, given: np.ndarray) -> np.ndarray:
    """Sample one symbol per entry of `given` from cond_cdf[given]."""
    if cond_cdf.shape[-1] == 1:       # degenerate alphabet: no draws needed
        return np.zeros(given.shape, dtype=np.int64)
    if _is_uniform_cdf(cond_cdf):     # rows identical and uniform
        return rng.integers(0, cond_cdf.shape[-1], size=given.shape, dtype=np.int64)
    u = rng.random(given.shape + (1,))
    return (u > cond_cdf[given]).sum(axis=-1).astype(np.int64)


def build_codebooks(params: SchemeParams, seed: int) -> CodebookSet:
    """Draw all codebooks i.i.d. per the design law; deterministic given seed.

    Cloud codewords are i.i.d. from P_U0; satellite codewords are drawn
    symbolwise from P_{U1|U0} (and P_{U2|U0}) conditioned on the cloud
    codeword.  Per-block substreams are disjoint.
    """
    sizes = message_sizes(params)
    if codebook_cells(params, sizes) > params.codebook_budget:
        raise CodebookBudgetError("codebooks exceed the memory budget")
    t = get_tables(params)
    k, B = params.k, params.B
    M0 = sizes["M0"]
    sat = sizes["S1"] if params.scheme == "hb" else sizes["M1"]
    u0 = np.empty((B, M0, k), dtype=np.int64)
    u1 = np.empty((B, M0, sat, k), dtype=np.int64)
    u2 = (np.empty((B, M0, sizes["M2"], k), dtype=np.int64)
          if params.scheme == "gw" else None)
    for b in range(B):
        r0 = substream(seed, "cb-u0", b)
        u0[b] = _sample_from_cdf(r0, t.cdf_u0, (M0, k))
        r1 = substream(seed, "cb-u1", b)
        u1[b] = _sample_conditional(r1, t.cdf_u1_u0, np.broadcast_to(
            u0[b][:, None, :], (M0, sat, k)))
        if u2 is not None:
            r2 = substream(seed, "cb-u2", b)
            u2[b] = _sample_conditional(r2, t.cdf_u2_u0, np.broadcast_to(
                u0[b][:, None, :], (M0, sizes["M2"], k)))
    bin_map = None
    if params.scheme == "hb":
        nbins = sizes["M1"]
        rb = substream(seed, "bins")
        # a permuted prefix guarantees the map is onto every bin
        head = rb.permutation(nbins)
        tail = rb.integers(0, nbins, size=sizes["S1"] - nbins)
        bin_map = np.concatenate([head, tail])
    return CodebookSet(scheme=params.scheme, k=k, B=B, u0=u0, u1=u1, u2=u2,
                       bin_map=bin_map, hybrid_f=params.hybrid_f, seed=seed,
                       sizes=sizes)


# ---------------------------------------------------------------------------
# precomputed tables
# ---------------------------------------------------------------------------

class _Tables:
    """Design-law tensors, sampling CDFs, typicality targets, score tables."""

    def __init__(self, params: SchemeParams):
        h0 = params.h.h0
        h1 = params.h.h1
        aux = params.aux_channel
        self.axis_names = h0.names
        self.src_shape = h0.mass.shape
        self.cdf_h0 = _cdf(h0.mass.reshape(-1))
        h1m = h1.mass
        if h1.names != h0.names:
            h1m = np.transpose(h1m, [h1.axis_index(n) for n in h0.names])
        self.cdf_h1 = _cdf(h1m.reshape(-1))

        joint = extend(h0, aux)
        self.nx = h0.axis("X").size
        self.n0 = aux.to_axes[0].size
        self.n1 = aux.to_axes[1].size
        px = marginalize(h0, "X").mass
        pu0 = np.einsum("x,x...->...", px, aux.kernel)
        axes_sum = tuple(range(1, pu0.ndim))
        self.p_u0 = pu0.sum(axis=axes_sum) if axes_sum else pu0
        self.cdf_u0 = _cdf(self.p_u0)
        self.cdf_u1_u0 = _cdf(conditional(joint, "U1", "U0"))
        if params.scheme == "gw":
            self.n2 = aux.to_axes[2].size
            self.cdf_u2_u0 = _cdf(conditional(joint, "U2", "U0"))
            # encoder target P_{X U0 U1 U2}; receiver targets P_{Y_i U0 U_i}
            enc = marginalize(joint, ("X", "U0", "U1", "U2"))
            self.enc_target = _ordered(enc, ("X", "U0", "U1", "U2"))
            self.enc_pmf = enc
            r1 = marginalize(joint, ("Y1", "U0", "U1"))
            self.dec1_target = _ordered(r1, ("Y1", "U0", "U1"))
            self.dec1_pmf = r1
            r2 = marginalize(joint, ("Y2", "U0", "U2"))
            self.dec2_target = _ordered(r2, ("Y2", "U0", "U2"))
            self.dec2_pmf = r2
        else:
            enc = marginalize(joint, ("X", "U0", "U1"))
            self.enc_target = _ordered(enc, ("X", "U0", "U1"))
            self.enc_pmf = enc
            # receiver-1 statistic: llr of y1 given (u0,u1,z1) vs y1 given z1
            p0 = conditional(joint, "Y1", ("U0", "U1", "Z1"))
            p1 = conditional(h0, "Y1", "Z1")             # same under H=1
            self.llr1 = _safe_llr(p0, p1[None, None, :, :])
            p0y2 = conditional(joint, "Y2", "U0")
            py2 = marginalize(h0, "Y2").mass
            self.llr2 = _safe_llr(p0y2, py2[None, :])
            self.stat1_pmf = marginalize(joint, ("U0", "U1", "Y1", "Z1"))
            self.stat1_target = _ordered(self.stat1_pmf, ("U0", "U1", "Y1", "Z1"))
            self.stat2_pmf = marginalize(joint, ("U0", "Y2"))
            self.stat2_target = _ordered(self.stat2_pmf, ("U0", "Y2"))
        if params.scheme == "hb":
            self.dec_score = _safe_log(conditional(joint, "Z1", ("U0", "U1")))
            self.dec_pmf = marginalize(joint, ("U0", "U1", "Z1"))
            self.dec_target = _ordered(self.dec_pmf, ("U0", "U1", "Z1"))
        if params.scheme == "noisy":
            from .regions import _check_degraded_pair
            ch1, ch2 = _check_degraded_pair(params.bc)
            self.nw = ch1.from_axes[0].size
            self.cdf_v1_w = _cdf(ch1.kernel)
            self.cdf_v2_v1 = _cdf(ch2.kernel)
            jn = extend(joint, _onehot_channel(params.hybrid_f, aux, self.nw))
            jn = extend(jn, ch1)
            jn = extend(jn, ch2)
            self.dec1_score = _safe_log(conditional(jn, ("V1", "Z1"), ("U0", "U1")))
            self.dec1_pmf = marginalize(jn, ("U0", "U1", "V1", "Z1"))
            self.dec1_target = _ordered(self.dec1_pmf, ("U0", "U1", "V1", "Z1"))
            self.dec2_score = _safe_log(conditional(jn, "V2", "U0"))
            self.dec2_pmf = marginalize(jn, ("U0", "V2"))
            self.dec2_target = _ordered(self.dec2_pmf, ("U0", "V2"))


def _ordered(p: JointPmf, names) -> np.ndarray:
    return np.transpose(p.mass, [p.axis_index(n) for n in names])


def _safe_log(p: np.ndarray) -> np.ndarray:
    return np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), _NEG)


def _safe_llr(p0: np.ndarray, p1) -> np.ndarray:
    p1b = np.broadcast_to(p1, p0.shape)
    out = np.full(p0.shape, _NEG / 1e3)
    ok = p0 > 0
    out[ok] = np.log2(p0[ok]) - np.log2(p1b[ok])
    return out


_TABLE_CACHE: dict = {}


def get_tables(params: SchemeParams) -> _Tables:
    key = id(params)
    hit = _TABLE_CACHE.get(key)
    if hit is not None and hit[0] is params:
        return hit[1]
    tables = _Tables(params)
    if len(_TABLE_CACHE) > 8:
        _TABLE_CACHE.clear()
    _TABLE_CACHE[key] = (params, tables)   # strong ref pins the id
    return tables


# ---------------------------------------------------------------------------
# typicality search / checks (vectorized over candidate codewords)
# ---------------------------------------------------------------------------

def _typ_ok(counts: np.ndarray, target_flat: np.ndarray, n: int, mu: float):
    """Vectorized robust-typicality check: counts (..., ncells)."""
    freq = counts / n
    return np.all(np.abs(freq - target_flat) <= mu * target_flat + 1e-12, axis=-1)


def _pair_counts(cand_cells: np.ndarray, ncells: int) -> np.ndarray:
    """Joint-type counts for many candidates: cand_cells (..., k) -> (..., ncells)."""
    lead = cand_cells.shape[:-1]
    m = int(np.prod(lead)) if lead else 1
    k = cand_cells.shape[-1]
    flat = cand_cells.reshape(m, k)
    idx = (np.arange(m)[:, None] * ncells + flat).reshape(-1)
    counts = np.bincount(idx, minlength=m * ncells).reshape(m, ncells)
    return counts.reshape(lead + (ncells,))


def _select_hit(counts_ok: np.ndarray, target_flat: np.ndarray, n: int,
                params: SchemeParams, rng) -> int:
    """Choose one passing candidate per the selection rule.

    "uniform": uniformly at random among passing tuples.  "min-divergence":
    the tuple whose empirical joint type is closest (in KL divergence) to the
    design law; at small blocklengths the uniform pick concentrates on the
    weakest-correlation corner of the typicality box, so this variant recenters
    the selected codeword law on the design law.  Exact ties break uniformly.
    """
    m = counts_ok.shape[0]
    if params.selection_rule == "uniform" or m == 1:
        return int(rng.integers(m))
    freq = counts_ok / n
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = freq * (np.log2(freq) - np.log2(target_flat[None, :]))
    terms = np.where(freq > 0, terms, 0.0)
    div = terms.sum(axis=1)
    best = div.min()
    tied = np.flatnonzero(div <= best + 1e-12)
    return int(tied[rng.integers(tied.size)])


# ---------------------------------------------------------------------------
# gw scheme
# ---------------------------------------------------------------------------

def gw_encode(x_seq: np.ndarray, cb: CodebookSet, params: SchemeParams, rng):
    """Find all index tuples jointly (mu/2)-typical with x and pick one
    uniformly at random; returns (m0, m1, m2) 1-based or (0, 0, 0)."""
    t = get_tables(params)
    n = x_seq.size
    M0, M1, M2 = cb.sizes["M0"], cb.sizes["M1"], cb.sizes["M2"]
    target = t.enc_target.reshape(-1)
    ncells = target.size
    n1, n2 = t.n1, t.n2
    hits = []
    hit_counts = []
    chunk = max(1, (1 << 22) // max(1, M1 * M2 * n))
    for c0 in range(0, M0, chunk):
        hi = min(M0, c0 + chunk)
        base = (x_seq[None, None, None, :] * t.n0
                + cb.u0[0, c0:hi][:, None, None, :])
        cells = ((base * n1 + cb.u1[0, c0:hi][:, :, None, :]) * n2
                 + cb.u2[0, c0:hi][:, None, :, :])     # (chunk, M1, M2, k)
        counts = _pair_counts(cells, ncells)
        ok = _typ_ok(counts, target, n, params.mu / 2.0)
        for m0, m1, m2 in np.argwhere(ok):
            hits.append((c0 + m0 + 1, m1 + 1, m2 + 1))
            hit_counts.append(counts[m0, m1, m2])
    if not hits:
        return (SENTINEL, SENTINEL, SENTINEL)
    pick = hits[_select_hit(np.asarray(hit_counts), target, n, params, rng)]
    u0 = cb.u0[0, pick[0] - 1]
    u1 = cb.u1[0, pick[0] - 1, pick[1] - 1]
    u2 = cb.u2[0, pick[0] - 1, pick[2] - 1]
    assert is_typical({"X": x_seq, "U0": u0, "U1": u1, "U2": u2},
                      t.enc_pmf, params.mu / 2.0), "encoder self-check failed"
    return pick


def gw_decide(receiver_id: int, y_seq: np.ndarray, m0: int, mi: int,
              cb: CodebookSet, params: SchemeParams) -> int:
    """Paper rule: declare 1 on the failure sentinel, else accept iff the
    received codewords are jointly mu-typical with the local observation."""
    if m0 == SENTINEL:
        return 1
    t = get_tables(params)
    if receiver_id == 1:
        target, books = t.dec1_target, cb.u1
    else:
        target, books = t.dec2_target, cb.u2
    if not (1 <= m0 <= cb.sizes["M0"]) or not (1 <= mi <= books.shape[2]):
        raise SchemeParamError("message index out of codebook range")
    u0 = cb.u0[0, m0 - 1]
    ui = books[0, m0 - 1, mi - 1]
    sizes = target.shape
    cells = (y_seq * sizes[1] + u0) * sizes[2] + ui
    counts = _pair_counts(cells, target.size)
    return 0 if bool(_typ_ok(counts, target.reshape(-1), y_seq.size, params.mu)) else 1


# ---------------------------------------------------------------------------
# block schemes: encoding, decoding, per-block statistics
# ---------------------------------------------------------------------------

def _encode_block(x_blk: np.ndarray, u0b: np.ndarray, u1b: np.ndarray,
                  params: SchemeParams, t: _Tables, rng):
    """Joint typicality search over (m0, s) pairs; returns 0-based (m0, s)
    or None."""
    k = x_blk.size
    M0, S = u0b.shape[0], u1b.shape[1]
    target = t.enc_target.reshape(-1)
    cells = ((x_blk[None, None, :] * t.n0 + u0b[:, None, :]) * t.n1
             + u1b)                                    # (M0, S, k)
    counts = _pair_counts(cells, target.size)
    ok = _typ_ok(counts, target, k, params.mu / 2.0)
    hits = np.argwhere(ok)
    if hits.shape[0] == 0:
        return None
    m0, s = hits[_select_hit(counts[ok], target, k, params, rng)]
    assert is_typical({"X": x_blk, "U0": u0b[m0], "U1": u1b[m0, s]},
                      t.enc_pmf, params.mu / 2.0), "encoder self-check failed"
    return int(m0), int(s)


def _stat_block_r1(u0: np.ndarray, u1: np.ndarray, y1: np.ndarray,
                   z1: np.ndarray, params: SchemeParams, t: _Tables) -> float:
    if params.statistic == "llr":
        return float(t.llr1[u0, u1, z1, y1].sum())
    counts = _pair_counts(
        ((u0 * t.n1 + u1) * t.stat1_target.shape[2] + y1)
        * t.stat1_target.shape[3] + z1, t.stat1_target.size)
    return float(_typ_ok(counts, t.stat1_target.reshape(-1), u0.size, params.mu))


def _stat_block_r2(u0: np.ndarray, y2: np.ndarray, params: SchemeParams,
                   t: _Tables) -> float:
    if params.statistic == "llr":
        return float(t.llr2[u0, y2].sum())
    counts = _pair_counts(u0 * t.stat2_target.shape[1] + y2, t.stat2_target.size)
    return float(_typ_ok(counts, t.stat2_target.reshape(-1), u0.size, params.mu))


@dataclass
class RoundResult:
    """Decisions plus diagnostics for one trial of a block scheme."""

    h1: int
    h2: int
    sentinel: bool = False
    stat1: float = float("-inf")
    stat2: float = float("-inf")
    decode_fail_blocks: int = 0
    decode_wrong_blocks: int = 0
    encoder_fallback_blocks: int = 0

    def __iter__(self):
        return iter((self.h1, self.h2))


def hb_round(x_blocks, y1_blocks, z1_blocks, y2_blocks, cb: CodebookSet,
             params: SchemeParams, rng, thresholds=(0.0, 0.0)) -> RoundResult:
    """One trial of the single-pipe binned scheme.

    Transmitter: per-block typicality search for (m0, s1); any failure sends
    the all-blocks sentinel and both receivers declare 1.  Receiver 1
    recovers s1 inside the indicated bin from its side information, then both
    receivers aggregate per-block statistics and compare to their calibrated
    thresholds.
    """
    t = get_tables(params)
    B, k = x_blocks.shape
    enc = []
    for b in range(B):
        got = _encode_block(x_blocks[b], cb.u0[b], cb.u1[b], params, t, rng)
        if got is None:
            return RoundResult(h1=1, h2=1, sentinel=True)
        enc.append(got)
    stat1 = 0.0
    stat2 = 0.0
    fails = 0
    wrongs = 0
    for b, (m0, s_true) in enumerate(enc):
        m1 = int(cb.bin_map[s_true])
        cand = np.flatnonzero(cb.bin_map == m1)
        u0 = cb.u0[b, m0]
        z1 = z1_blocks[b]
        s_hat, failed = _decode_in_set(
            cb.u1[b, m0], cand, u0, z1, params, t, kind="hb")
        if failed:
            fails += 1
            stat1 += _FAIL_STAT
        else:
            if s_hat != s_true:
                wrongs += 1
            stat1 += _stat_block_r1(u0, cb.u1[b, m0, s_hat], y1_blocks[b],
                                    z1, params, t)
        stat2 += _stat_block_r2(u0, y2_blocks[b], params, t)
    h1 = 0 if stat1 >= thresholds[0] else 1
    h2 = 0 if stat2 >= thresholds[1] else 1
    return RoundResult(h1=h1, h2=h2, stat1=stat1, stat2=stat2,
                       decode_fail_blocks=fails, decode_wrong_blocks=wrongs)


def _decode_in_set(u1_book, cand, u0, z1, params: SchemeParams, t: _Tables,
                   kind: str, v1=None):
    """Recover the satellite index within `cand` (0-based positions).

    "ml": argmax of the conditional log-likelihood of the observations.
    "typicality": the unique candidate jointly mu-typical with (u0, obs),
    failing when none or several pass.
    Returns (index, failed).
    """
    codes = u1_book[cand]                                # (C, k)
    if params.decode_rule == "ml":
        if kind == "hb":
            scores = t.dec_score[u0[None, :], codes, z1[None, :]].sum(axis=1)
        else:
            scores = t.dec1_score[u0[None, :], codes, v1[None, :],
                                  z1[None, :]].sum(axis=1)
        return int(cand[int(np.argmax(scores))]), False
    if kind == "hb":
        target = t.dec_target
        cells = ((u0[None, :] * t.n1 + codes) * target.shape[2] + z1[None, :])
    else:
        target = t.dec1_target
        cells = (((u0[None, :] * t.n1 + codes) * target.shape[2] + v1[None, :])
                 * target.shape[3] + z1[None, :])
    counts = _pair_counts(cells, target.size)
    ok = _typ_ok(counts, target.reshape(-1), u0.size, params.mu_decode)
    hits = np.flatnonzero(ok)
    if hits.size != 1:
        return -1, True
    return int(cand[hits[0]]), False


def bc_channel_sample(w_seq: np.ndarray, bc, rng) -> tuple[np.ndarray, np.ndarray]:
    """Memoryless pass through the degraded pair: V1 ~ P(.|w), V2 ~ P(.|v1)."""
    from .regions import _check_degraded_pair
    ch1, ch2 = _check_degraded_pair(bc)
    v1 = _sample_conditional(rng, _cdf(ch1.kernel), w_seq)
    v2 = _sample_conditional(rng, _cdf(ch2.kernel), v1)
    return v1, v2


def noisy_round(x_blocks, y1_blocks, z1_blocks, y2_blocks, cb: CodebookSet,
                bc, params: SchemeParams, rng,
                thresholds=(0.0, 0.0)) -> RoundResult:
    """One trial of the hybrid scheme over the degraded broadcast channel.

    Per-block encoding falls back to a uniformly random index pair (there is
    no sentinel); channel inputs are w = f(u0, u1, x) symbolwise.  Receiver 1
    decodes (m0, m1) from (v1, z1), receiver 2 decodes m0 from v2, and both
    aggregate per-block statistics exactly as in hb_round.
    """
    t = get_tables(params)
    B, k = x_blocks.shape
    M0 = cb.sizes["M0"]
    M1 = cb.sizes["M1"]
    f = cb.hybrid_f
    stat1 = 0.0
    stat2 = 0.0
    fails = 0
    wrongs = 0
    fallbacks = 0
    for b in range(B):
        got = _encode_block(x_blocks[b], cb.u0[b], cb.u1[b], params, t, rng)
        if got is None:
            m0 = int(rng.integers(M0))
            m1 = int(rng.integers(M1))
            fallbacks += 1
        else:
            m0, m1 = got
        u0_true = cb.u0[b, m0]
        u1_true = cb.u1[b, m0, m1]
        w_seq = f[u0_true, u1_true, x_blocks[b]]
        v1, v2 = bc_channel_sample(w_seq, bc, rng)
        z1 = z1_blocks[b]
        # receiver 1: decode the pair
        if params.decode_rule == "ml":
            best = (-np.inf, 0, 0)
            for c0 in range(M0):
                scores = t.dec1_score[cb.u0[b, c0][None, :], cb.u1[b, c0],
                                      v1[None, :], z1[None, :]].sum(axis=1)
                c1 = int(np.argmax(scores))
                if scores[c1] > best[0]:
                    best = (float(scores[c1]), c0, c1)
            m0_hat, m1_hat = best[1], best[2]
            failed = False
        else:
            pairs = []
            for c0 in range(M0):
                s_hat, fl = _decode_in_set(cb.u1[b, c0], np.arange(M1),
                                           cb.u0[b, c0], z1, params, t,
                                           kind="noisy", v1=v1)
                if not fl:
                    pairs.append((c0, s_hat))
            failed = len(pairs) != 1
            m0_hat, m1_hat = pairs[0] if len(pairs) == 1 else (0, 0)
        if failed:
            fails += 1
            stat1 += _FAIL_STAT
        else:
            if (m0_hat, m1_hat) != (m0, m1):
                wrongs += 1
            stat1 += _stat_block_r1(cb.u0[b, m0_hat], cb.u1[b, m0_hat, m1_hat],
                                    y1_blocks[b], z1, params, t)
        # receiver 2: decode the cloud index from v2
        if params.decode_rule == "ml":
            sc2 = t.dec2_score[cb.u0[b], v2[None, :]].sum(axis=1)
            m0_hat2 = int(np.argmax(sc2))
            failed2 = False
        else:
            target = t.dec2_target
            cells = cb.u0[b] * target.shape[1] + v2[None, :]
            ok = _typ_ok(_pair_counts(cells, target.size),
                         target.reshape(-1), k, params.mu_decode)
            hits = np.flatnonzero(ok)
            failed2 = hits.size != 1
            m0_hat2 = int(hits[0]) if hits.size == 1 else 0
        if failed2:
            stat2 += _FAIL_STAT
        else:
            stat2 += _stat_block_r2(cb.u0[b, m0_hat2], y2_blocks[b], params, t)
    h1 = 0 if stat1 >= thresholds[0] else 1
    h2 = 0 if stat2 >= thresholds[1] else 1
    return RoundResult(h1=h1, h2=h2, stat1=stat1, stat2=stat2,
                       decode_fail_blocks=fails, decode_wrong_blocks=wrongs,
                       encoder_fallback_blocks=fallbacks)


# ---------------------------------------------------------------------------
# trial driver
# ---------------------------------------------------------------------------

def _sample_sources(params: SchemeParams, t: _Tables, hyp: int, rng):
    cdf = t.cdf_h0 if hyp == 0 else t.cdf_h1
    flat = _sample_from_cdf(rng, cdf, params.n)
    seqs = {}
    rem = flat
    for name, size in zip(reversed(t.axis_names),
                          reversed(t.src_shape)):
        seqs[name] = rem % size
        rem = rem // size
    return seqs


def _one_trial(params: SchemeParams, hyp: int, idx: int, seed: int,
               thresholds) -> RoundResult:
    t = get_tables(params)
    cb = build_codebooks(params, substream(seed, "cbseed", hyp, idx).integers(1 << 62))
    src = _sample_sources(params, t, hyp, substream(seed, "src", hyp, idx))
    rng = substream(seed, "enc", hyp, idx)
    B, k = params.B, params.k
    x = src["X"].reshape(B, k)
    y1 = src["Y1"].reshape(B, k)
    y2 = src["Y2"].reshape(B, k)
    if params.scheme == "gw":
        m0, m1, m2 = gw_encode(src["X"], cb, params, rng)
        h1 = gw_decide(1, src["Y1"], m0, m1, cb, params)
        h2 = gw_decide(2, src["Y2"], m0, m2, cb, params)
        res = RoundResult(h1=h1, h2=h2, sentinel=(m0 == SENTINEL))
    elif params.scheme == "hb":
        z1 = src["Z1"].reshape(B, k)
        res = hb_round(x, y1, z1, y2, cb, params, rng, thresholds)
    else:
        z1 = src["Z1"].reshape(B, k)
        res = noisy_round(x, y1, z1, y2, cb, params.bc, params, rng, thresholds)
    if res.sentinel:
        assert (res.h1, res.h2) == (1, 1), "sentinel must force both to declare 1"
    return res


def calibrate_thresholds(params: SchemeParams, seed: int) -> tuple[float, float]:
    """Per-receiver thresholds: the epsilon-quantile of the aggregate
    statistic over held-out null-hypothesis trials (sentinel trials enter as
    -inf, so the whole type-I budget is calibrated at once)."""
    if params.scheme == "gw":
        return (0.0, 0.0)
    ncal = params.calibration_trials
    cal_seed = int(substream(seed, "calib").integers(1 << 62))
    s1 = np.empty(ncal)
    s2 = np.empty(ncal)
    for i in range(ncal):
        res = _one_trial(params, 0, i, cal_seed, (np.inf, np.inf))
        s1[i] = res.stat1 if not res.sentinel else -np.inf
        s2[i] = res.stat2 if not res.sentinel else -np.inf
    kq = max(0, math.floor(params.epsilon * ncal) - 1)
    t1 = float(np.sort(s1)[kq])
    t2 = float(np.sort(s2)[kq])
    return (t1, t2)


@dataclass
class SimResult:
    """Empirical error rates, Wilson intervals, and exponent estimates."""

    scheme: str
    n: int
    trials_h0: int
    trials_h1: int
    alpha_hat: tuple
    alpha_ci: tuple
    beta_hat: tuple
    beta_ci: tuple
    type2_counts: tuple
    exponent_hat: tuple            # value or None when censored
    censored: tuple
    thresholds: tuple
    sentinel_rate_h0: float
    sentinel_rate_h1: float
    decode_fail_rate_h0: float
    decode_wrong_rate_h0: float
    encoder_fallback_rate_h0: float
    seed: int
    config_hash: str
    rng_algorithm: str = RNG_ALGORITHM
    theory: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["theory"] = {k: float(v) for k, v in self.theory.items()}
        return d


def wilson_interval(count: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = count / n
    den = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, center - half), min(1.0, center + half))


def config_hash(params: SchemeParams, trials_h0: int, trials_h1: int,
                seed: int) -> str:
    desc = {
        "scheme": params.scheme,
        "h0": params.h.h0.mass.tolist(),
        "axes": [(a.name, a.size) for a in params.h.h0.axes],
        "structure": params.h.structure_tag,
        "aux": params.aux_channel.kernel.tolist(),
        "rates": (params.rates.r0, params.rates.r1, params.rates.r2,
                  params.rates.r1_prime),
        "mu": params.mu, "mu_decode": params.mu_decode,
        "epsilon": params.epsilon,
        "n": params.n, "k": params.k, "B": params.B,
        "decode_rule": params.decode_rule, "statistic": params.statistic,
        "selection_rule": params.selection_rule,
        "calibration_trials": params.calibration_trials,
        "bc": None if params.bc is None else [c.kernel.tolist() for c in params.bc],
        "hybrid_f": None if params.hybrid_f is None else params.hybrid_f.tolist(),
        "trials": (trials_h0, trials_h1),
        "seed": seed,
    }
    blob = json.dumps(desc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _run_range(params: SchemeParams, hyp: int, lo: int, hi: int, seed: int,
               thresholds) -> dict:
    acc = {"sentinel": 0, "decode_fail": 0, "decode_wrong": 0,
           "fallback_blocks": 0, "blocks": 0, "count": 0}
    for i in range(lo, hi):
        res = _one_trial(params, hyp, i, seed, thresholds)
        acc["count"] += 1
        acc["blocks"] += params.B
        acc["sentinel"] += int(res.sentinel)
        acc["decode_fail"] += res.decode_fail_blocks
        acc["decode_wrong"] += res.decode_wrong_blocks
        acc["fallback_blocks"] += res.encoder_fallback_blocks
        key1 = "err1" if (res.h1 == 1) == (hyp == 0) else "ok1"
        acc[key1] = acc.get(key1, 0) + 1
        key2 = "err2" if (res.h2 == 1) == (hyp == 0) else "ok2"
        acc[key2] = acc.get(key2, 0) + 1
    return acc


def run_trials(params: SchemeParams, trials_h0: int, trials_h1: int,
               seed: int, threads: int = 1) -> SimResult:
    """Estimate codebook-averaged error rates with fresh codebooks per trial.

    Deterministic given (params, trials, seed) regardless of `threads`;
    thresholds for the block schemes are calibrated first on held-out
    null-hypothesis trials.
    """
    if trials_h0 < 1 or trials_h1 < 1:
        raise SchemeParamError("trial counts must be positive")
    thresholds = calibrate_thresholds(params, seed)
    totals = {0: None, 1: None}
    for hyp, trials in ((0, trials_h0), (1, trials_h1)):
        chunks = []
        if threads > 1:
            bounds = np.linspace(0, trials, threads + 1, dtype=int)
            with ProcessPoolExecutor(max_workers=threads) as ex:
                futs = [ex.submit(_run_range, params, hyp, int(a), int(b),
                                  seed, thresholds)
                        for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
                chunks = [f.result() for f in futs]
        else:
            chunks = [_run_range(params, hyp, 0, trials, seed, thresholds)]
        merged = {}
        for c in chunks:
            for k, v in c.items():
                merged[k] = merged.get(k, 0) + v
        totals[hyp] = merged
    t0, t1 = totals[0], totals[1]
    a1, a2 = t0.get("err1", 0), t0.get("err2", 0)      # declared 1 under H0
    b1, b2 = t1.get("err1", 0), t1.get("err2", 0)      # declared 0 under H1
    alpha = (a1 / trials_h0, a2 / trials_h0)
    beta = (b1 / trials_h1, b2 / trials_h1)
    exps = []
    cens = []
    for cnt, bhat in ((b1, beta[0]), (b2, beta[1])):
        if cnt >= 20:
            exps.append(-math.log2(bhat) / params.n)
            cens.append(False)
        else:
            exps.append(None)
            cens.append(True)
    return SimResult(
        scheme=params.scheme, n=params.n,
        trials_h0=trials_h0, trials_h1=trials_h1,
        alpha_hat=alpha,
        alpha_ci=(wilson_interval(a1, trials_h0), wilson_interval(a2, trials_h0)),
        beta_hat=beta,
        beta_ci=(wilson_interval(b1, trials_h1), wilson_interval(b2, trials_h1)),
        type2_counts=(b1, b2),
        exponent_hat=tuple(exps), censored=tuple(cens),
        thresholds=thresholds,
        sentinel_rate_h0=t0["sentinel"] / trials_h0,
        sentinel_rate_h1=t1["sentinel"] / trials_h1,
        decode_fail_rate_h0=t0["decode_fail"] / t0["blocks"],
        decode_wrong_rate_h0=(t0["decode_fail"] + t0["decode_wrong"]) / t0["blocks"],
        encoder_fallback_rate_h0=t0["fallback_blocks"] / t0["blocks"],
        seed=seed, config_hash=config_hash(params, trials_h0, trials_h1, seed),
        theory=dict(params.theory),
    )

"""Finite-alphabet probability objects, information measures, and typicality.

All information quantities are in bits (base-2 logarithms) and 0*log(0) is
treated as 0.  Objects are immutable after construction and every operation
is pure, so unrestricted parallel use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AbsoluteContinuityViolated,
    AxisError,
    NormalizationError,
    StructureError,
)

SUM_TOL = 1e-12       # unit-sum tolerance at construction
IDENTITY_TOL = 1e-10  # tolerance for factorization / identity checks


@dataclass(frozen=True)
class Alphabet:
    """A named finite axis."""

    name: str
    size: int

    def __post_init__(self):
        if not self.name:
            raise AxisError("alphabet name must be nonempty")
        if self.size < 1:
            raise AxisError(f"alphabet {self.name!r} must have size >= 1, got {self.size}")


def _as_axis_names(spec) -> tuple[str, ...]:
    if isinstance(spec, str):
        return (spec,)
    return tuple(spec)


class JointPmf:
    """Dense probability tensor over an ordered tuple of named alphabets.

    The axis order given at construction is the canonical order and is
    preserved by every operation that returns a JointPmf.
    """

    __slots__ = ("axes", "mass")

    def __init__(self, axes: Sequence[Alphabet], mass: np.ndarray):
        axes = tuple(axes)
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise AxisError(f"duplicate axis names: {names}")
        mass = np.array(mass, dtype=np.float64)  # private copy; frozen below
        if mass.shape != tuple(a.size for a in axes):
            raise AxisError(
                f"mass shape {mass.shape} does not match axes "
                f"{[(a.name, a.size) for a in axes]}"
            )
        if np.any(mass < 0):
            raise NormalizationError(f"negative mass entry: min={mass.min()}")
        total = float(mass.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise NormalizationError(f"mass sums to {total!r}, expected 1 within {SUM_TOL}")
        mass.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "mass", mass)

    def __setattr__(self, name, value):
        raise AttributeError("JointPmf is immutable")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def axis(self, name: str) -> Alphabet:
        for a in self.axes:
            if a.name == name:
                return a
        raise AxisError(f"unknown axis {name!r}; have {self.names}")

    def axis_index(self, name: str) -> int:
        for i, a in enumerate(self.axes):
            if a.name == name:
                return i
        raise AxisError(f"unknown axis {name!r}; have {self.names}")

    def _indices(self, names: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.axis_index(n) for n in names)

    def __repr__(self):
        return f"JointPmf({'x'.join(f'{a.name}[{a.size}]' for a in self.axes)})"


class Channel:
    """A row-stochastic kernel from one tuple of axes to another.

    kernel has shape from_sizes + to_sizes and every conditional slice
    (fixed input symbols) sums to 1 within SUM_TOL.
    """

    __slots__ = ("from_axes", "to_axes", "kernel")

    def __init__(self, from_axes: Sequence[Alphabet], to_axes: Sequence[Alphabet],
                 kernel: np.ndarray):
        from_axes = tuple(from_axes)
        to_axes = tuple(to_axes)
        names = [a.name for a in from_axes + to_axes]
        if len(set(names)) != len(names):
            raise AxisError(f"duplicate axis names in channel: {names}")
        kernel = np.asarray(kernel, dtype=np.float64)
        want = tuple(a.size for a in from_axes) + tuple(a.size for a in to_axes)
        if kernel.shape != want:
            raise AxisError(f"kernel shape {kernel.shape}, expected {want}")
        if np.any(kernel < 0):
            raise NormalizationError("negative kernel entry")
        sums = kernel.sum(axis=tuple(range(len(from_axes), kernel.ndim)))
        if np.any(np.abs(sums - 1.0) > SUM_TOL):
            raise NormalizationError("conditional slices must sum to 1 within 1e-12")
        object.__setattr__(self, "from_axes", from_axes)
        object.__setattr__(self, "to_axes", to_axes)
        object.__setattr__(self, "kernel", kernel)

    @staticmethod
    def bsc(name_in: str, name_out: str, p: float) -> "Channel":
        """Binary symmetric channel with crossover probability p."""
        k = np.array([[1 - p, p], [p, 1 - p]])
        return Channel((Alphabet(name_in, 2),), (Alphabet(name_out, 2),), k)

    @staticmethod
    def identity(name_in: str, name_out: str, size: int) -> "Channel":
        return Channel((Alphabet(name_in, size),), (Alphabet(name_out, size),),
                       np.eye(size))

    def __repr__(self):
        f = ",".join(a.name for a in self.from_axes)
        t = ",".join(a.name for a in self.to_axes)
        return f"Channel({f} -> {t})"


def _plog2p(arr: np.ndarray) -> np.ndarray:
    out = np.zeros_like(arr)
    pos = arr > 0
    out[pos] = arr[pos] * np.log2(arr[pos])
    return out


def _tensor_entropy(arr: np.ndarray) -> float:
    return float(-_plog2p(arr).sum())


def marginalize(p: JointPmf, keep) -> JointPmf:
    """Sum out every axis not in `keep`; canonical axis order is preserved."""
    keep = _as_axis_names(keep)
    if not keep:
        raise AxisError("marginalize requires a nonempty keep set")
    keep_set = set(keep)
    for n in keep_set:
        p.axis_index(n)
    drop = tuple(i for i, a in enumerate(p.axes) if a.name not in keep_set)
    mass = p.mass.sum(axis=drop) if drop else p.mass
    axes = tuple(a for a in p.axes if a.name in keep_set)
    return JointPmf(axes, mass)


def entropy(p: JointPmf, targets, given=()) -> float:
    """Conditional entropy H(targets | given) in bits."""
    t = _as_axis_names(targets)
    g = _as_axis_names(given)
    if set(t) & set(g):
        raise AxisError(f"targets and given overlap: {set(t) & set(g)}")
    if not t:
        raise AxisError("entropy requires a nonempty target set")
    joint = marginalize(p, t + g)
    h_tg = _tensor_entropy(joint.mass)
    if not g:
        return max(h_tg, 0.0)
    h_g = _tensor_entropy(marginalize(joint, g).mass)
    return max(h_tg - h_g, 0.0)


def mutual_information(p: JointPmf, a, b, given=()) -> float:
    """Conditional mutual information I(a; b | given) in bits.

    Guaranteed >= 0 up to 1e-12 of rounding; tiny negatives are clamped.
    """
    aa = _as_axis_names(a)
    bb = _as_axis_names(b)
    gg = _as_axis_names(given)
    for s1, s2 in ((aa, bb), (aa, gg), (bb, gg)):
        if set(s1) & set(s2):
            raise AxisError(f"axis sets overlap: {set(s1) & set(s2)}")
    val = entropy(p, aa, gg) - entropy(p, aa, bb + gg)
    return max(val, 0.0)


def kl_divergence(p: JointPmf, q: JointPmf) -> float:
    """D(p || q) in bits; requires support(p) within support(q)."""
    if set(p.names) != set(q.names):
        raise AxisError(f"pmfs have different axes: {p.names} vs {q.names}")
    qm = q.mass
    if p.names != q.names:
        qm = np.transpose(qm, axes=[q.axis_index(n) for n in p.names])
    pm = p.mass
    bad = (qm == 0) & (pm > 0)
    if np.any(bad):
        raise AbsoluteContinuityViolated(
            f"{int(bad.sum())} cells have p>0 but q=0; D(p||q) undefined"
        )
    pos = pm > 0
    val = float(np.sum(pm[pos] * (np.log2(pm[pos]) - np.log2(qm[pos]))))
    return max(val, 0.0)


def extend(p: JointPmf, ch: Channel) -> JointPmf:
    """Attach channel outputs: result(x.., t..) = p(x..) * kernel(from.., t..).

    The channel's from_axes must be present in p (matched by name and size);
    its to_axes must be new names.  Output axis order = p.axes + ch.to_axes.
    """
    for a in ch.from_axes:
        have = p.axis(a.name)
        if have.size != a.size:
            raise AxisError(f"axis {a.name!r} size mismatch: {have.size} vs {a.size}")
    for a in ch.to_axes:
        if a.name in p.names:
            raise AxisError(f"output axis {a.name!r} already present in pmf")
    letters = "abcdefghijklmnopqrstuvwxyz"
    if len(p.axes) + len(ch.to_axes) > len(letters):
        raise AxisError("too many axes")
    lp = {a.name: letters[i] for i, a in enumerate(p.axes)}
    lt = {a.name: letters[len(p.axes) + i] for i, a in enumerate(ch.to_axes)}
    sub_p = "".join(lp[a.name] for a in p.axes)
    sub_k = "".join(lp[a.name] for a in ch.from_axes) + "".join(
        lt[a.name] for a in ch.to_axes)
    sub_o = sub_p + "".join(lt[a.name] for a in ch.to_axes)
    mass = np.einsum(f"{sub_p},{sub_k}->{sub_o}", p.mass, ch.kernel)
    return JointPmf(p.axes + ch.to_axes, mass)


def conditional(p: JointPmf, targets, given) -> np.ndarray:
    """Conditional pmf P(targets | given) as an array shaped given + targets.

    Rows whose conditioning event has zero probability are left all-zero.
    """
    t = _as_axis_names(targets)
    g = _as_axis_names(given)
    joint = marginalize(p, g + t)
    order = [joint.axis_index(n) for n in g + t]
    arr = np.transpose(joint.mass, order)
    denom = arr.sum(axis=tuple(range(len(g), arr.ndim)), keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(denom > 0, arr / np.where(denom > 0, denom, 1.0), 0.0)
    return out


_TAG_INDEPENDENCE = "against-independence"
_TAG_CONDITIONAL = "against-conditional-independence"
STRUCTURE_TAGS = (_TAG_INDEPENDENCE, _TAG_CONDITIONAL)


def alternative_hypothesis(h0: JointPmf, structure_tag: str) -> JointPmf:
    """Build the alternative law from h0's (conditional) marginals.

    against-independence over (X, Y1, Y2):
        h1 = P_X * P_{Y1 Y2}
    against-conditional-independence over (X, Y1, Y2, Z1):
        h1 = P_{X Z1} * P_{Y1|Z1} * P_{Y2}
    Axis order of the result matches h0.
    """
    if structure_tag == _TAG_INDEPENDENCE:
        required = {"X", "Y1", "Y2"}
    elif structure_tag == _TAG_CONDITIONAL:
        required = {"X", "Y1", "Y2", "Z1"}
    else:
        raise StructureError(f"unknown structure tag {structure_tag!r}")
    missing = required - set(h0.names)
    if missing:
        raise AxisError(f"structure {structure_tag!r} needs axes {sorted(missing)}")
    if set(h0.names) != required:
        raise AxisError(
            f"structure {structure_tag!r} is defined over exactly {sorted(required)}, "
            f"got {h0.names}")

    if structure_tag == _TAG_INDEPENDENCE:
        px = marginalize(h0, "X").mass
        py = marginalize(h0, ("Y1", "Y2"))
        mass = np.einsum("a,bc->abc", px, py.mass)
        axes = (h0.axis("X"), py.axis("Y1"), py.axis("Y2"))
        out = JointPmf(axes, mass)
    else:
        pxz = marginalize(h0, ("X", "Z1"))
        arr_xz = np.transpose(pxz.mass, [pxz.axis_index("X"), pxz.axis_index("Z1")])
        py1gz = conditional(h0, "Y1", "Z1")          # (z, y1)
        py2 = marginalize(h0, "Y2").mass
        mass = np.einsum("az,zb,c->abcz", arr_xz, py1gz, py2)
        axes = (h0.axis("X"), h0.axis("Y1"), h0.axis("Y2"), h0.axis("Z1"))
        out = JointPmf(axes, mass)
    # restore h0's canonical axis order
    perm = [out.axis_index(n) for n in h0.names]
    return JointPmf(tuple(out.axes[i] for i in perm), np.transpose(out.mass, perm))


@dataclass(frozen=True)
class HypothesisPair:
    """The H=0 law and its structured H=1 counterpart."""

    h0: JointPmf
    h1: JointPmf
    structure_tag: str

    def __post_init__(self):
        if self.structure_tag not in STRUCTURE_TAGS:
            raise StructureError(f"unknown structure tag {self.structure_tag!r}")
        if set(self.h0.names) != set(self.h1.names):
            raise AxisError("h0 and h1 must share axes")
        want = alternative_hypothesis(self.h0, self.structure_tag)
        h1m = self.h1.mass
        if self.h1.names != want.names:
            h1m = np.transpose(h1m, [self.h1.axis_index(n) for n in want.names])
        if np.max(np.abs(h1m - want.mass)) > IDENTITY_TOL:
            raise StructureError(
                f"h1 does not factorize per {self.structure_tag!r} within {IDENTITY_TOL}")

    @classmethod
    def from_h0(cls, h0: JointPmf, structure_tag: str) -> "HypothesisPair":
        return cls(h0, alternative_hypothesis(h0, structure_tag), structure_tag)


def is_typical(seqs, p: JointPmf, mu: float) -> bool:
    """Robust mu-typicality: |freq(cell)/n - P(cell)| <= mu*P(cell) for all cells.

    `seqs` is a mapping axis-name -> integer sequence (or a single sequence
    for a one-axis pmf); parallel sequences are tested jointly.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if not isinstance(seqs, Mapping):
        if len(p.axes) != 1:
            raise AxisError("a bare sequence is only accepted for one-axis pmfs")
        seqs = {p.axes[0].name: seqs}
    missing = set(p.names) - set(seqs)
    if missing:
        raise AxisError(f"missing sequences for axes {sorted(missing)}")
    arrs = []
    n = None
    for a in p.axes:
        s = np.asarray(seqs[a.name], dtype=np.int64)
        if s.ndim != 1:
            raise AxisError(f"sequence for {a.name!r} must be one-dimensional")
        if n is None:
            n = s.size
        elif s.size != n:
            raise AxisError(f"sequence length mismatch: {a.name!r} has {s.size}, expected {n}")
        if s.size and (s.min() < 0 or s.max() >= a.size):
            raise AxisError(f"symbol out of range for axis {a.name!r}")
        arrs.append(s)
    if n == 0:
        raise AxisError("sequences must be nonempty")
    idx = np.zeros(n, dtype=np.int64)
    for a, s in zip(p.axes, arrs):
        idx = idx * a.size + s
    counts = np.bincount(idx, minlength=p.mass.size).astype(np.float64)
    freq = counts / n
    target = p.mass.reshape(-1)
    # tiny absolute slack guards against float rounding in freq and mu*target
    return bool(np.all(np.abs(freq - target) <= mu * target + 1e-12))

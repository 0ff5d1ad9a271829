"""Closed-form exponent regions for the two jointly Gaussian examples.

Everything here is an exact formula evaluation in bits; no optimization.
The common-pipe-only setting (gw) yields a rectangle, so its frontier is a
single corner; the side-information setting (hb) yields a genuine tradeoff
curve parametrized by alpha_tilde in [-R, 0].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import AlphaOutOfRange


@dataclass(frozen=True)
class GwGaussianParams:
    """Noise variances and common rate for the no-side-information example."""

    sigma1_sq: float
    sigma2_sq: float
    r0: float

    def __post_init__(self):
        if not (self.sigma1_sq > 0 and self.sigma2_sq > 0):
            raise ValueError("noise variances must be positive")
        if not (self.r0 >= 0):
            raise ValueError("r0 must be nonnegative")


@dataclass(frozen=True)
class HbGaussianParams:
    """Parameters for the side-information example; alpha_tilde in [-r, 0]."""

    sigmaz_sq: float
    sigma1_sq: float
    sigma2_sq: float
    r: float
    alpha_tilde: float | None = None

    def __post_init__(self):
        if not (self.sigmaz_sq > 0 and self.sigma1_sq > 0 and self.sigma2_sq > 0):
            raise ValueError("variances must be positive")
        if not (self.r >= 0):
            raise ValueError("r must be nonnegative")
        if self.alpha_tilde is not None:
            if not (-self.r <= self.alpha_tilde <= 0.0):
                raise AlphaOutOfRange(
                    f"alpha_tilde={self.alpha_tilde} outside [{-self.r}, 0]")


def gw_gaussian_corner(p: GwGaussianParams) -> tuple[float, float]:
    """Rectangle corner (theta1_max, theta2_max).

    theta_i = (1/2) log2( (1 + sigma_i^2) / (2^{-2 r0} + sigma_i^2) );
    the full region is {(t1, t2): 0 <= t_i <= corner_i}.
    """
    att = 2.0 ** (-2.0 * p.r0)  # 0 in the r0 -> infinity limit
    t1 = 0.5 * math.log2((1.0 + p.sigma1_sq) / (att + p.sigma1_sq))
    t2 = 0.5 * math.log2((1.0 + p.sigma2_sq) / (att + p.sigma2_sq))
    return (t1, t2)


def hb_gaussian_point(p: HbGaussianParams) -> tuple[float, float]:
    """One supported point of the side-information region at p.alpha_tilde."""
    if p.alpha_tilde is None:
        raise AlphaOutOfRange("alpha_tilde is required for a point evaluation")
    at = p.alpha_tilde
    s1 = p.sigma1_sq * (1.0 + p.sigmaz_sq)
    t1 = 0.5 * math.log2((p.sigmaz_sq + s1) / (2.0 ** (2.0 * at) * p.sigmaz_sq + s1))
    t2 = 0.5 * math.log2(
        (1.0 + p.sigmaz_sq + p.sigma2_sq)
        / (2.0 ** (-2.0 * (at + p.r)) * (1.0 + p.sigmaz_sq) + p.sigma2_sq))
    return (t1, t2)


def hb_gaussian_frontier(p: HbGaussianParams, grid_size: int = 101
                         ) -> list[tuple[float, float, float]]:
    """Frontier as (alpha_tilde, theta1, theta2) rows, Pareto-sorted.

    alpha_tilde runs over a uniform grid on [-r, 0]; theta1 is strictly
    increasing (and theta2 strictly decreasing) along the returned list.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    rows = []
    for i in range(grid_size):
        # descending from 0 to -r so theta1 comes out increasing
        at = -p.r * i / (grid_size - 1)
        t1, t2 = hb_gaussian_point(HbGaussianParams(
            p.sigmaz_sq, p.sigma1_sq, p.sigma2_sq, p.r, at))
        rows.append((at, t1, t2))
    return rows

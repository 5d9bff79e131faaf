"""Zero density K_{1,l} of the Dirichlet random spherical harmonic.

All hemisphere densities are functions of the scaled distance to the equator
``psi = l (pi - 2 theta)``, ``0 < psi <= pi l``.  The planar model of random
waves vanishing on a line is parametrised by the height ``x2`` above it.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .covariance import blocks_from_gamma, near_boundary_series
from .errors import DegenerateVarianceError, DomainError
from .special_functions import (
    bessel_j0_derivatives,
    gaussian_norm_expectation,
)

FAR_CONSTANT = 10.0
PSI_SWITCH = 0.5
# planar model: series below this height, Bessel evaluation above
PLANAR_SWITCH = 0.5

ISOTROPIC_PLANAR_DENSITY = 1.0 / (2.0 * math.sqrt(2.0))


def plateau(degree: int) -> float:
    """Density of the boundaryless ensemble, ``sqrt(l (l+1)) / (2 sqrt 2)``."""
    return math.sqrt(degree * (degree + 1)) / (2.0 * math.sqrt(2.0))


def _psi_array(degree: int, psi):
    if degree < 1 or int(degree) != degree:
        raise DomainError("degree must be a positive integer")
    psi = np.asarray(psi, dtype=float)
    if np.any(psi <= 0.0):
        raise DegenerateVarianceError("psi <= 0: the field vanishes on the boundary")
    if np.any(psi > math.pi * degree * (1.0 + 1e-15)):
        raise DomainError("psi exceeds pi * l (beyond the pole)")
    if degree % 2 == 0 and np.any(psi >= math.pi * degree):
        raise DegenerateVarianceError("even degree: the field vanishes at the pole")
    return np.minimum(psi, math.pi * degree)


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def conditional_moments(degree: int, psi, branch: str = "auto",
                        psi_switch: float = PSI_SWITCH):
    """``(variance, omega11, omega22)`` at scaled distance psi.

    ``branch`` is ``"series"``, ``"direct"`` or ``"auto"`` (series below
    ``psi_switch``).
    """
    psi = _psi_array(degree, psi)
    flat = np.atleast_1d(psi)
    var = np.empty_like(flat)
    o11 = np.empty_like(flat)
    o22 = np.empty_like(flat)
    if branch == "auto":
        use_series = flat < psi_switch
    elif branch == "series":
        use_series = np.ones(flat.shape, dtype=bool)
    elif branch == "direct":
        use_series = np.zeros(flat.shape, dtype=bool)
    else:
        raise ValueError(f"unknown branch {branch!r}")
    if np.any(use_series):
        v, a, b = near_boundary_series(degree, flat[use_series])
        var[use_series], o11[use_series], o22[use_series] = v, a, b
    direct = ~use_series
    if np.any(direct):
        a, b1, c11, c22 = blocks_from_gamma(degree, flat[direct] / degree)
        var[direct] = a
        o11[direct] = c11 - b1**2 / a
        o22[direct] = c22
    # rounding can push a vanishing conditional variance slightly negative
    o11 = np.maximum(o11, 0.0)
    o22 = np.maximum(o22, 0.0)
    if psi.ndim == 0:
        return float(var[0]), float(o11[0]), float(o22[0])
    return var, o11, o22


def k1_exact(degree: int, psi, branch: str = "auto", psi_switch: float = PSI_SWITCH):
    """Zero density ``E[|grad T| | T = 0] / sqrt(2 pi Var T)`` at scaled distance psi.

    For ``l = 1`` the field is a multiple of ``cos theta`` and never vanishes
    off the equator, so the density is identically zero.
    """
    psi_arr = _psi_array(degree, psi)
    if degree == 1:
        return _out(np.zeros_like(psi_arr))
    var, o11, o22 = conditional_moments(degree, psi_arr, branch, psi_switch)
    o11, o22 = np.asarray(o11), np.asarray(o22)
    # odd degree at the pole: only even orders survive, so the gradient vanishes there
    live = np.maximum(o11, o22) > 0.0
    norm = gaussian_norm_expectation(np.where(live, o11, 1.0), np.where(live, o22, 1.0))
    norm = np.where(live, norm, 0.0)
    return _out(norm / np.sqrt(2.0 * math.pi * np.asarray(var)))


def k1_far_asymptotic(degree: int, psi):
    """Oscillatory large-psi expansion of the density (valid for psi > C)."""
    psi = np.asarray(psi, dtype=float)
    phase = (degree + 0.5) * psi / degree
    bracket = (
        1.0
        + math.sqrt(2.0 / math.pi) * np.cos(phase - math.pi / 4.0) / np.sqrt(psi)
        - 1.0 / (16.0 * math.pi * psi)
        + 15.0 / (16.0 * math.pi * psi) * np.cos(2.0 * phase - math.pi / 2.0)
    )
    return _out(plateau(degree) * bracket)


def k1_near_asymptotic(degree: int, psi=None):
    """Leading term ``l / (2 pi)`` of the density close to the boundary."""
    value = degree / (2.0 * math.pi)
    if psi is None or np.ndim(psi) == 0:
        return value
    return np.full(np.shape(psi), value)


@dataclass(frozen=True)
class TaylorExpansion:
    plateau: float
    leading: np.ndarray | float
    s: np.ndarray | float
    s11: np.ndarray | float
    s22: np.ndarray | float

    @property
    def total(self):
        return self.plateau + self.leading

    @property
    def size(self):
        """``max(|s|, |S11|, |S22|)``, the expansion's small parameter."""
        return np.maximum(np.abs(self.s), np.maximum(np.abs(self.s11), np.abs(self.s22)))


def taylor_leading_term(degree: int, psi) -> TaylorExpansion:
    """Second-order expansion of the density in ``s = P_l(cos(psi/l))`` and S.

    Uses the exact s and S entries; the neglected remainder is cubic in them.
    """
    psi = _psi_array(degree, psi)
    big_l = degree * (degree + 1)
    var, o11, o22 = conditional_moments(degree, psi, branch="direct")
    s = 1.0 - np.asarray(var)
    s11 = 2.0 * np.asarray(o11) / big_l - 1.0
    s22 = 2.0 * np.asarray(o22) / big_l - 1.0
    tr = s11 + s22
    tr_sq = s11**2 + s22**2
    lead = math.sqrt(big_l) / (4.0 * math.sqrt(2.0)) * (
        s + 0.5 * tr + 0.75 * s**2 + 0.25 * s * tr - tr_sq / 16.0 - tr**2 / 32.0
    )
    return TaylorExpansion(plateau(degree), _out(lead), _out(s), _out(s11), _out(s22))


@dataclass(frozen=True)
class HilbApproximation:
    p: np.ndarray | float
    dp: np.ndarray | float
    ddp: np.ndarray | float


def hilb_legendre_asymptotics(degree: int, psi) -> HilbApproximation:
    """Leading oscillatory approximations of P, P', P'' at ``cos(psi / l)``."""
    psi = np.asarray(psi, dtype=float)
    gamma = psi / degree
    phase = (degree + 0.5) * gamma - math.pi / 4.0
    c = math.sqrt(2.0 / math.pi)
    sin_g = np.sin(gamma)
    p = c * np.cos(phase) / np.sqrt(psi)
    dp = c * math.sqrt(degree) / sin_g**1.5 * np.sin(phase)
    ddp = -c * degree**1.5 / sin_g**2.5 * np.cos(phase)
    return HilbApproximation(_out(p), _out(dp), _out(ddp))


def s_matrix_asymptotic(degree: int, psi):
    """Two-term approximations of the diagonal entries S11, S22."""
    psi = np.asarray(psi, dtype=float)
    phase = (degree + 0.5) * psi / degree - math.pi / 4.0
    c = math.sqrt(2.0 / math.pi)
    s11 = 2.0 * c * np.cos(phase) / np.sqrt(psi) - (4.0 / math.pi) * np.sin(phase) ** 2 / psi
    s22 = -2.0 * c * np.sin(phase) / psi**1.5
    return _out(s11), _out(s22)


# --- planar model -------------------------------------------------------

@lru_cache(maxsize=1)
def _planar_series(order: int = 18):
    # J0(r) = sum c_k t^k with t = r^2
    c = [Fraction((-1) ** k, 4**k * math.factorial(k) ** 2) for k in range(order + 4)]
    alpha = [-c[j + 1] for j in range(order + 2)]                  # 1 - J0 = t alpha
    omega11 = [2 * (j + 2) * c[j + 2] for j in range(order + 1)]   # Omega11 = t * this
    beta = [2 * (j + 1) * c[j + 1] for j in range(order + 2)]      # J1 = -r beta
    c22 = [-(2 * (j + 1)) * (2 * j + 1) * c[j + 1] for j in range(order + 2)]
    c22[0] += Fraction(1, 2)
    n = order + 2
    num = [Fraction(0)] * n
    for i in range(n):
        for j in range(n - i):
            num[i + j] += c22[i] * alpha[j] - beta[i] * beta[j]
    if num[0] != 0 or num[1] != 0:
        raise AssertionError("planar series cancellation failed")
    def as_float(seq):
        return np.array([float(v) for v in seq[:order]])

    return as_float(alpha), as_float(omega11), as_float(num[2:])


def _poly(coef, t):
    acc = np.zeros_like(t)
    for ci in coef[::-1]:
        acc = acc * t + ci
    return acc


def planar_moments(height, branch: str = "auto"):
    """``(variance, omega_parallel, omega_normal)`` for the planar boundary model."""
    x2 = np.asarray(height, dtype=float)
    if np.any(x2 <= 0.0):
        raise DomainError("height above the boundary must be positive")
    flat = np.atleast_1d(x2)
    r = 2.0 * flat
    var = np.empty_like(flat)
    o_par = np.empty_like(flat)
    o_nor = np.empty_like(flat)
    if branch == "auto":
        use_series = flat < PLANAR_SWITCH
    else:
        use_series = np.full(flat.shape, branch == "series")
    if np.any(use_series):
        t = r[use_series] ** 2
        alpha, om11, num = _planar_series()
        al = _poly(alpha, t)
        var[use_series] = t * al
        o_par[use_series] = t * _poly(om11, t)
        o_nor[use_series] = t * t * _poly(num, t) / al
    direct = ~use_series
    if np.any(direct):
        rd = r[direct]
        j0, dj0, ddj0 = bessel_j0_derivatives(rd)
        a = 1.0 - j0
        var[direct] = a
        o_par[direct] = 0.5 + dj0 / rd
        o_nor[direct] = 0.5 - ddj0 - dj0**2 / a
    o_par = np.maximum(o_par, 0.0)
    o_nor = np.maximum(o_nor, 0.0)
    if x2.ndim == 0:
        return float(var[0]), float(o_par[0]), float(o_nor[0])
    return var, o_par, o_nor


def planar_berry_density(height, branch: str = "auto"):
    """Zero density of planar random waves vanishing on the line ``x2 = 0``.

    Covariance ``J0(|x - y|) - J0(|x - y~|)`` with ``y~`` the reflection of y.
    Tends to ``1/(2 pi)`` at the boundary and oscillates around
    ``1/(2 sqrt 2)`` far from it.
    """
    var, o_par, o_nor = planar_moments(height, branch)
    return _out(gaussian_norm_expectation(o_par, o_nor) / np.sqrt(2.0 * math.pi * np.asarray(var)))


def planar_far_expansion(height, with_log_term: bool = True):
    """Explicit large-height terms of the planar density."""
    x2 = np.asarray(height, dtype=float)
    bracket = 1.0 + np.cos(2.0 * x2 - math.pi / 4.0) / np.sqrt(math.pi * x2)
    if with_log_term:
        bracket = bracket - 1.0 / (32.0 * math.pi * x2)
    return _out(ISOTROPIC_PLANAR_DENSITY * bracket)


# --- profiles -----------------------------------------------------------

REGIMES = ("exact", "far", "near")
# planar baseline rescaled to the sphere: l * K_planar(psi / 2)
ALL_REGIMES = REGIMES + ("planar",)


@dataclass
class DensityProfile:
    degree: int
    samples: list[tuple[float, float, str]] = field(default_factory=list)

    def values(self, regime: str | None = None) -> np.ndarray:
        return np.array([v for _, v, r in self.samples if regime is None or r == regime])

    def psis(self, regime: str | None = None) -> np.ndarray:
        return np.array([p for p, _, r in self.samples if regime is None or r == regime])

    def write_csv(self, handle, header: Iterable[str] = ()):
        for line in header:
            handle.write(f"# {line}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["psi", "value", "regime"])
        for psi, value, regime in self.samples:
            writer.writerow([repr(float(psi)), repr(float(value)), regime])


def density_profile(degree: int, psis, regimes: Iterable[str] = REGIMES,
                    far_constant: float = FAR_CONSTANT,
                    psi_switch: float = PSI_SWITCH) -> DensityProfile:
    """Sample the density on a psi grid under one or more regimes.

    The far expansion is only emitted for ``psi > far_constant``.
    """
    psis = np.unique(np.asarray(psis, dtype=float))
    if psis.size == 0 or psis[0] <= 0.0 or psis[-1] > math.pi * degree:
        raise DomainError("psi grid must lie in (0, pi * l]")
    if degree % 2 == 0:
        psis = psis[psis < math.pi * degree]
    profile = DensityProfile(degree)
    for regime in regimes:
        if regime == "exact":
            values = np.atleast_1d(k1_exact(degree, psis, psi_switch=psi_switch))
            grid = psis
        elif regime == "far":
            grid = psis[psis > far_constant]
            values = np.atleast_1d(k1_far_asymptotic(degree, grid))
        elif regime == "near":
            grid = psis
            values = np.atleast_1d(k1_near_asymptotic(degree, psis))
        elif regime == "planar":
            grid = psis
            values = degree * np.atleast_1d(planar_berry_density(0.5 * psis))
        else:
            raise ValueError(f"unknown regime {regime!r}")
        profile.samples.extend((float(p), float(v), regime) for p, v in zip(grid, values))
    return profile


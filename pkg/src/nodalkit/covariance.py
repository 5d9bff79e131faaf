"""Covariance structure of the Dirichlet random spherical harmonic T_l.

Angles follow the usual spherical convention: colatitude ``theta`` in
``[0, pi]`` and longitude ``phi``.  The hemisphere is ``theta <= pi/2`` with
the equator as its boundary.  Gradients are taken in the orthonormal frame
``(d/dtheta, (1/sin theta) d/dphi)``.

Most formulas here are written in terms of the angle ``gamma = pi - 2 theta``
between a point and its mirror image, ``gamma = psi / l``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateVarianceError, DomainError
from .special_functions import legendre_triple

# smallest field variance accepted before declaring the point degenerate
MIN_VARIANCE = 1e-14


@dataclass(frozen=True)
class HemispherePoint:
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi / 2:
            raise DomainError(f"colatitude {self.theta} is not on the upper hemisphere")

    def psi(self, degree: int) -> float:
        """Scaled distance to the equator, ``l (pi - 2 theta)``."""
        return degree * (math.pi - 2.0 * self.theta)

    @classmethod
    def from_psi(cls, degree: int, psi: float, phi: float = 0.0) -> "HemispherePoint":
        return cls(0.5 * (math.pi - psi / degree), phi)

    def mirror(self) -> tuple[float, float]:
        return mirror((self.theta, self.phi))


@dataclass(frozen=True)
class CovarianceBlocks:
    """Joint covariance of ``(T, grad T)`` at one point."""

    a: float
    b: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class ConditionalCovariance:
    omega: np.ndarray
    s11: float
    s22: float
    variance: float

    def scaled(self, degree: int) -> np.ndarray:
        """``Delta = I + S = 2 Omega / (l (l + 1))``."""
        return np.eye(2) + np.diag([self.s11, self.s22])


def _coords(point):
    if isinstance(point, HemispherePoint):
        return point.theta, point.phi
    theta, phi = point
    return float(theta), float(phi)


def mirror(point):
    """Reflect a point in the equator: ``(theta, phi) -> (pi - theta, phi)``."""
    theta, phi = _coords(point)
    return (math.pi - theta, phi)


def cos_distance(x, y) -> float:
    tx, px = _coords(x)
    ty, py = _coords(y)
    # haversine form: exact at zero distance, no cancellation for nearby points
    h = math.sin(0.5 * (tx - ty)) ** 2 + math.sin(tx) * math.sin(ty) * math.sin(0.5 * (px - py)) ** 2
    return min(1.0, max(-1.0, 1.0 - 2.0 * h))


def covariance(degree: int, x, y) -> float:
    """``E[T(x) T(y)] = P_l(cos d(x, y)) - P_l(cos d(x, mirror(y)))``."""
    if degree < 1:
        raise DomainError("degree must be >= 1")
    direct = legendre_triple(degree, cos_distance(x, y)).p
    reflected = legendre_triple(degree, cos_distance(x, mirror(y))).p
    return direct - reflected


def _check_theta(degree: int, theta: float):
    if degree < 1:
        raise DomainError("degree must be >= 1")
    if not 0.0 <= theta <= math.pi / 2:
        raise DomainError(f"colatitude {theta} is not on the upper hemisphere")
    if theta == math.pi / 2:
        raise DegenerateVarianceError("T vanishes identically on the equator")
    if theta == 0.0 and degree % 2 == 0:
        raise DegenerateVarianceError("T vanishes at the pole for even degree")


def blocks_from_gamma(degree: int, gamma):
    """Direct evaluation of A, B1, C11, C22 at mirror angle ``gamma``.

    Vectorised over ``gamma``; returns a tuple of arrays (or floats).
    """
    x = np.cos(gamma)
    sin2t = np.sin(gamma)       # sin(2 theta)
    cos2t = -x                  # cos(2 theta)
    leg = legendre_triple(degree, x)
    dp1 = degree * (degree + 1) / 2.0
    a = 1.0 - leg.p
    b1 = -sin2t * leg.dp
    c11 = dp1 - cos2t * leg.dp - sin2t**2 * leg.ddp
    c22 = dp1 - leg.dp
    return a, b1, c11, c22


def covariance_blocks(degree: int, theta: float) -> CovarianceBlocks:
    """Unconditional covariance blocks of ``(T(x), grad T(x))`` at colatitude theta."""
    _check_theta(degree, theta)
    a, b1, c11, c22 = blocks_from_gamma(degree, math.pi - 2.0 * theta)
    return CovarianceBlocks(
        a=float(a),
        b=np.array([float(b1), 0.0]),
        c=np.array([[float(c11), 0.0], [0.0, float(c22)]]),
    )


def closed_form_s_entries(degree: int, theta: float) -> tuple[float, float]:
    """S11, S22 from their closed forms in terms of P, P', P'' at cos(pi - 2 theta)."""
    x = math.cos(math.pi - 2.0 * theta)
    leg = legendre_triple(degree, x)
    s2 = math.sin(2.0 * theta) ** 2
    scale = -2.0 / (degree * (degree + 1))
    s11 = scale * (
        math.cos(2.0 * theta) * leg.dp
        + s2 * leg.ddp
        + s2 * leg.dp**2 / (1.0 - leg.p)
    )
    s22 = scale * leg.dp
    return s11, s22


def conditional_covariance(degree: int, theta: float) -> ConditionalCovariance:
    """Covariance of ``grad T`` given ``T = 0``, by Gaussian conditioning.

    ``omega`` comes from ``C - B^T B / A``; ``s11``/``s22`` from the closed
    forms, so the two routes can be compared by the caller.
    """
    _check_theta(degree, theta)
    blocks = covariance_blocks(degree, theta)
    if blocks.a <= MIN_VARIANCE:
        raise DegenerateVarianceError(
            f"variance {blocks.a:.3e} below {MIN_VARIANCE:g}; point lies in the "
            "excised equator neighbourhood"
        )
    omega = blocks.c - np.outer(blocks.b, blocks.b) / blocks.a
    # a conditional variance that vanishes identically (l = 2) can round below zero
    diag = np.diag_indices(2)
    omega[diag] = np.maximum(omega[diag], 0.0)
    s11, s22 = closed_form_s_entries(degree, theta)
    return ConditionalCovariance(omega=omega, s11=s11, s22=s22, variance=blocks.a)


# --- near-equator series -------------------------------------------------
#
# With w = sin^2(gamma/2) = (1 - x)/2, P_l(x) = sum_k a_k w^k where
# a_k = (-1)^k C(l, k) C(l + k, k) are integers.  Every block is then a
# polynomial in w with integer coefficients, and the leading cancellations in
# A*C11 - B1^2 happen exactly.

_SERIES_ORDER = 16


def _pmul(p, q, n):
    out = [0] * n
    for i, pi in enumerate(p[:n]):
        if pi:
            for j, qj in enumerate(q[: n - i]):
                out[i + j] += pi * qj
    return out


@lru_cache(maxsize=256)
def _series_coefficients(degree: int):
    n = _SERIES_ORDER + 4
    a = [(-1) ** k * math.comb(degree, k) * math.comb(degree + k, k) if k <= degree else 0
         for k in range(n + 3)]
    big_l = degree * (degree + 1)
    dp = [(j + 1) * a[j + 1] for j in range(n + 1)]           # p'(w)
    ddp = [(j + 2) * (j + 1) * a[j + 2] for j in range(n)]    # p''(w)
    alpha = [-a[j + 1] for j in range(n)]                     # A = w alpha
    gamma = [dp[j + 1] for j in range(n)]                     # 2 C22 = w gamma

    # 2 C11 = L - (1 - 2w) p' - 2 w (1 - w) p''
    two_c11 = [0] * n
    for j in range(n):
        v = -dp[j]
        if j >= 1:
            v += 2 * dp[j - 1] - 2 * ddp[j - 1]
        if j >= 2:
            v += 2 * ddp[j - 2]
        two_c11[j] = v
    two_c11[0] += big_l

    # M = 2 C11 alpha - 2 (1 - w) p'^2 = w^2 mu
    dp2 = _pmul(dp, dp, n)
    m = _pmul(two_c11, alpha, n)
    for j in range(n):
        m[j] -= 2 * dp2[j]
        if j >= 1:
            m[j] += 2 * dp2[j - 1]
    if m[0] != 0 or m[1] != 0:
        raise AssertionError("leading cancellation in the conditional variance failed")
    mu = m[2:]

    def scaled(c):
        # coefficients of z^j with z = L w
        return np.array([ci / big_l**j for j, ci in enumerate(c[:_SERIES_ORDER])])

    return scaled(alpha), scaled(gamma), scaled(mu)


def near_boundary_series(degree: int, psi):
    """Variance and conditional gradient variances from the exact w-series.

    Returns ``(variance, omega11, omega22)`` at scaled distance ``psi``; meant
    for ``psi`` of order one or smaller, where direct evaluation cancels.
    """
    if degree < 1:
        raise DomainError("degree must be >= 1")
    psi = np.asarray(psi, dtype=float)
    alpha, gamma, mu = _series_coefficients(int(degree))
    big_l = degree * (degree + 1)
    w = np.sin(psi / (2.0 * degree)) ** 2
    z = big_l * w

    def horner(c):
        acc = np.zeros_like(z)
        for ci in c[::-1]:
            acc = acc * z + ci
        return acc

    al = horner(alpha)
    variance = w * al
    omega22 = 0.5 * w * horner(gamma)
    omega11 = w * w * horner(mu) / (2.0 * al)
    if variance.ndim == 0:
        return float(variance), float(omega11), float(omega22)
    return variance, omega11, omega22

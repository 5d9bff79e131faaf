"""Legendre, associated Legendre, Bessel J0 and elliptic-integral kernels.

Everything here accepts scalars or numpy arrays and is a pure function of its
inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError

# series / asymptotic switch for J0 and its derivatives
BESSEL_CROSSOVER = 12.0

_SERIES_TERMS = 60
_ASYMPTOTIC_TERMS = 26
_RESCALE = 1e100


@dataclass(frozen=True)
class LegendreTriple:
    """P_l(x) together with its first two x-derivatives."""

    p: np.ndarray | float
    dp: np.ndarray | float
    ddp: np.ndarray | float


def _as_float(value):
    arr = np.asarray(value, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def legendre_triple(degree: int, x) -> LegendreTriple:
    """Evaluate P_l, P'_l and P''_l by upward recurrence in the degree.

    The derivatives use ``P'_{n+1} = P'_{n-1} + (2n+1) P_n`` (and the same
    relation one order up), so nothing is ever divided by ``1 - x**2``.
    """
    if degree < 0 or int(degree) != degree:
        raise DomainError(f"degree must be a nonnegative integer, got {degree!r}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0) or np.any(~np.isfinite(x)):
        raise DomainError("Legendre argument must lie in [-1, 1]")
    degree = int(degree)

    p_prev, p = np.ones_like(x), x.copy()
    dp_prev, dp = np.zeros_like(x), np.ones_like(x)
    ddp_prev, ddp = np.zeros_like(x), np.zeros_like(x)
    if degree == 0:
        return LegendreTriple(_as_float(p_prev), _as_float(dp_prev), _as_float(ddp_prev))
    for n in range(1, degree):
        p_next = ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
        dp_next = dp_prev + (2 * n + 1) * p
        ddp_next = ddp_prev + (2 * n + 1) * dp
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
        ddp_prev, ddp = ddp, ddp_next
    return LegendreTriple(_as_float(p), _as_float(dp), _as_float(ddp))


def associated_legendre_table(degree: int, theta) -> np.ndarray:
    """Orthonormal theta-parts of Y_{l,m}, m = 0..l, for an array of colatitudes.

    Returns an array of shape ``theta.shape + (degree + 1,)`` holding
    ``N_{l,m}(theta)`` such that ``Y_{l,m} = N_{l,m}(theta) exp(i m phi)`` is
    L2-orthonormal on the sphere, Condon-Shortley phase included.  Sectoral
    seeds are carried as logarithms and the column recurrence is rescaled so
    that high degrees near the poles neither overflow nor underflow early.
    """
    if degree < 0 or int(degree) != degree:
        raise DomainError(f"degree must be a nonnegative integer, got {degree!r}")
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0.0) or np.any(theta > math.pi):
        raise DomainError("colatitude must lie in [0, pi]")
    degree = int(degree)
    shape = theta.shape
    th = theta.ravel()
    cos_t = np.cos(th)
    with np.errstate(divide="ignore"):
        log_sin = np.log(np.abs(np.sin(th)))

    out = np.zeros((th.size, degree + 1))
    log_seed = np.full(th.size, 0.5 * math.log(1.0 / (4.0 * math.pi)))
    for m in range(degree + 1):
        if m > 0:
            log_seed = log_seed + 0.5 * math.log((2 * m + 1) / (2 * m)) + log_sin
        sign = -1.0 if m % 2 else 1.0
        # p_lm / exp(log_seed), kept O(1) via the running log_scale
        prev = np.zeros(th.size)
        cur = np.full(th.size, sign)
        log_scale = log_seed.copy()
        for ell in range(m + 1, degree + 1):
            a = math.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
            b = math.sqrt(((ell - 1.0) ** 2 - m * m) / (4.0 * (ell - 1.0) ** 2 - 1.0))
            nxt = a * (cos_t * cur - b * prev)
            prev, cur = cur, nxt
            big = np.abs(cur) > _RESCALE
            if np.any(big):
                prev = np.where(big, prev / _RESCALE, prev)
                cur = np.where(big, cur / _RESCALE, cur)
                log_scale = np.where(big, log_scale + math.log(_RESCALE), log_scale)
        with np.errstate(under="ignore"):
            out[:, m] = cur * np.exp(log_scale)
    return out.reshape(shape + (degree + 1,))


def associated_legendre_row(degree: int, colatitude: float) -> np.ndarray:
    """Orthonormal ``N_{l,m}(theta)`` for m = 0..l at a single colatitude."""
    return associated_legendre_table(degree, np.asarray(float(colatitude)))


# --- Bessel J0 -----------------------------------------------------------

def _hankel_g(k: int) -> float:
    # g(0) = 1, g(k) = prod_{j<=k} (-(2j-1)^2) / (2^(2k) k!)
    num = 1.0
    for j in range(1, k + 1):
        num *= -((2 * j - 1) ** 2)
    return num / (4.0**k * math.factorial(k))


# J0(x) = sqrt(2/pi) [cos(chi) U(x) - sin(chi) V(x)],  chi = x - pi/4,
# U, V = x^(-1/2) * sum_j c_j x^(-j).  cos(x + pi/4) = -sin(chi).
_U0 = np.zeros(2 * _ASYMPTOTIC_TERMS + 4)
_V0 = np.zeros(2 * _ASYMPTOTIC_TERMS + 4)
for _k in range(_ASYMPTOTIC_TERMS):
    _U0[2 * _k] = (-1) ** _k * _hankel_g(2 * _k) / 2.0 ** (2 * _k)
    _V0[2 * _k + 1] = (-1) ** _k * _hankel_g(2 * _k + 1) / 2.0 ** (2 * _k + 1)


def _diff_half_series(c: np.ndarray) -> np.ndarray:
    # d/dx [x^(-1/2-j)] = -(1/2+j) x^(-3/2-j): shift by one power
    out = np.zeros_like(c)
    j = np.arange(c.size - 1)
    out[1:] = -(0.5 + j) * c[:-1]
    return out


def _asymptotic_pair(order: int):
    u, v = _U0, _V0
    for _ in range(order):
        # d/dx [cos U - sin V] = cos (U' - V) - sin (U + V')
        u, v = _diff_half_series(u) - v, u + _diff_half_series(v)
    return u, v


_ASYM = [_asymptotic_pair(k) for k in range(3)]
_SERIES_COEF_LD = np.array(
    [np.longdouble((-1) ** k) / (np.longdouble(4) ** k * np.longdouble(math.factorial(k)) ** 2)
     for k in range(_SERIES_TERMS)]
)


def _j0_series(x: np.ndarray, order: int) -> np.ndarray:
    # extended precision absorbs the cancellation between terms of size ~1e4
    k = np.arange(_SERIES_TERMS)
    powers = 2 * k - order
    coef = _SERIES_COEF_LD.copy()
    for i in range(order):
        coef = coef * (2 * k - i)
    keep = powers >= 0
    xl = x.astype(np.longdouble)
    terms = coef[keep] * xl[..., None] ** powers[keep]
    return np.sum(terms, axis=-1).astype(float)


def _j0_asymptotic(x: np.ndarray, order: int) -> np.ndarray:
    u, v = _ASYM[order]
    inv = 1.0 / x
    j = np.arange(u.size)
    # divergent series: stop near its smallest term, j ~ 2x
    pw = np.where(j <= 2.0 * x[..., None], inv[..., None] ** j, 0.0)
    uu = np.sqrt(inv) * np.sum(u * pw, axis=-1)
    vv = np.sqrt(inv) * np.sum(v * pw, axis=-1)
    chi = x - math.pi / 4.0
    return math.sqrt(2.0 / math.pi) * (np.cos(chi) * uu - np.sin(chi) * vv)


def _j0_any(x, order: int):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(~np.isfinite(x)):
        raise DomainError("Bessel argument must be finite and >= 0")
    out = np.empty_like(x)
    small = x < BESSEL_CROSSOVER
    if np.any(small):
        out[small] = _j0_series(x[small], order)
    if np.any(~small):
        out[~small] = _j0_asymptotic(x[~small], order)
    return _as_float(out)


def bessel_j0(x):
    """J0 for real x >= 0: power series below 12, Hankel expansion above."""
    return _j0_any(x, 0)


def bessel_j0_derivatives(x):
    """Return ``(J0, J0', J0'')`` using the same two branches as :func:`bessel_j0`."""
    return _j0_any(x, 0), _j0_any(x, 1), _j0_any(x, 2)


# --- elliptic integral and Gaussian norm expectation ----------------------

def elliptic_e(m):
    """Complete elliptic integral of the second kind E(m) by the AGM."""
    m = np.asarray(m, dtype=float)
    if np.any(m < 0.0) or np.any(m > 1.0) or np.any(~np.isfinite(m)):
        raise DomainError("elliptic parameter must lie in [0, 1]")
    a = np.ones_like(m)
    b = np.sqrt(1.0 - m)
    c2 = m.copy()
    total = 0.5 * c2
    weight = 0.5
    for _ in range(40):
        a_next = 0.5 * (a + b)
        c = 0.5 * (a - b)
        b = np.sqrt(a * b)
        a = a_next
        weight *= 2.0
        total = total + weight * c * c
        if np.all(c <= 1e-17 * a):
            break
    with np.errstate(divide="ignore", invalid="ignore"):
        e = (math.pi / (2.0 * a)) * (1.0 - total)
    e = np.where(m == 1.0, 1.0, e)
    return _as_float(e)


def gaussian_norm_expectation(var1, var2):
    """E[sqrt(var1 X^2 + var2 Y^2)] for independent standard normals X, Y.

    Closed form ``sqrt(2/pi) * a * E(1 - b^2/a^2)`` with ``a^2 = max`` and
    ``b^2 = min`` of the two variances.
    """
    v1 = np.asarray(var1, dtype=float)
    v2 = np.asarray(var2, dtype=float)
    if np.any(v1 < 0.0) or np.any(v2 < 0.0):
        raise DomainError("variances must be nonnegative")
    hi = np.maximum(v1, v2)
    lo = np.minimum(v1, v2)
    if np.any(hi == 0.0):
        raise DegenerateInputError("both variances are zero")
    m = np.clip(1.0 - lo / hi, 0.0, 1.0)
    return _as_float(math.sqrt(2.0 / math.pi) * np.sqrt(hi) * elliptic_e(m))

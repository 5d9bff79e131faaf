"""Independent reference computations and the verification suite.

Nothing here reuses the algorithm it is meant to check: Legendre values come
from the explicit binomial sum in exact rational arithmetic, the Gaussian norm
expectation from quadrature instead of the elliptic integral, and the zero
density from 60-digit mpmath arithmetic instead of the double-precision blocks.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .errors import DegenerateVarianceError, DomainError

LEGENDRE_ORACLE_MAX_DEGREE = 60
QUADRATURE_NODES = 64
_MP_DIGITS = 60


@dataclass(frozen=True)
class OracleReport:
    name: str
    oracle: float
    main: float
    abs_dev: float
    rel_dev: float
    tolerance: float
    kind: str = "rel"       # which deviation the tolerance applies to: rel | abs | stderr
    passed: bool = False

    @classmethod
    def compare(cls, name, oracle, main, tolerance, kind="rel", scale=None):
        """Build a report; for ``kind="stderr"`` pass the standard error as ``scale``."""
        oracle, main = float(oracle), float(main)
        abs_dev = abs(main - oracle)
        rel_dev = abs_dev / abs(oracle) if oracle != 0.0 else (0.0 if abs_dev == 0.0 else math.inf)
        if kind == "rel":
            dev = rel_dev
        elif kind == "abs":
            dev = abs_dev
        elif kind == "stderr":
            dev = abs_dev / scale
        else:
            raise DomainError(f"unknown tolerance kind {kind!r}")
        return cls(name, oracle, main, abs_dev, rel_dev, float(tolerance), kind, bool(dev <= tolerance))


def write_reports_csv(reports, handle):
    w = csv.writer(handle, lineterminator="\n")
    w.writerow(["quantity", "oracle", "main", "abs_dev", "rel_dev", "tolerance", "kind", "pass"])
    for r in reports:
        w.writerow([r.name, f"{r.oracle:.15g}", f"{r.main:.15g}", f"{r.abs_dev:.3e}",
                    f"{r.rel_dev:.3e}", f"{r.tolerance:g}", r.kind, int(r.passed)])


# --- Legendre -------------------------------------------------------------

def legendre_series_oracle(degree: int, x) -> float:
    """P_l(x) from ``2^-l sum_k (-1)^k C(l,k) C(2l-2k, l) x^(l-2k)``, exactly in rationals."""
    if degree < 0 or int(degree) != degree:
        raise DomainError("degree must be a nonnegative integer")
    if degree > LEGENDRE_ORACLE_MAX_DEGREE:
        raise DomainError(f"series oracle is limited to l <= {LEGENDRE_ORACLE_MAX_DEGREE}")
    xf = Fraction(float(x))
    total = Fraction(0)
    for k in range(degree // 2 + 1):
        total += (-1) ** k * math.comb(degree, k) * math.comb(2 * degree - 2 * k, degree) * xf ** (degree - 2 * k)
    return float(total / 2**degree)


# --- Gaussian norm expectation ----------------------------------------------

def _angular_panels(ratio: float) -> list[float]:
    # grade towards the near-kink of sqrt(hi sin^2 + lo cos^2) at u = 0
    edges = [0.0]
    s = math.sqrt(ratio)
    if 0.0 < s < 0.25:
        e = s
        while e < math.pi / 2:
            edges.append(e)
            e *= 4.0
    edges.append(math.pi / 2)
    return edges


def quadrature_norm_oracle(var1: float, var2: float, nodes: int = QUADRATURE_NODES) -> float:
    """E[sqrt(var1 X^2 + var2 Y^2)] by a Gauss product rule in polar coordinates.

    The radial factor uses Gauss-Hermite nodes for ``int r^2 exp(-r^2/2)``
    over the real line; the angular factor uses composite Gauss-Legendre.
    The Cartesian tensor rule converges only algebraically here because the
    integrand has a cone point at the origin.
    """
    if var1 < 0.0 or var2 < 0.0:
        raise DomainError("variances must be nonnegative")
    if nodes < QUADRATURE_NODES:
        raise DomainError(f"use at least {QUADRATURE_NODES} nodes per axis")
    hi, lo = max(var1, var2), min(var1, var2)
    if hi == 0.0:
        return 0.0
    xh, wh = np.polynomial.hermite.hermgauss(nodes)
    radial = 0.5 * 2.0**1.5 * math.fsum(wh * xh**2)
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    edges = _angular_panels(lo / hi)
    ang = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        u = 0.5 * (a + b) + 0.5 * (b - a) * xg
        ang += 0.5 * (b - a) * math.fsum(wg * np.sqrt(hi * np.sin(u) ** 2 + lo * np.cos(u) ** 2))
    return 4.0 * ang / (2.0 * math.pi) * radial


# --- zero density in high precision ------------------------------------------

def _mp_legendre_blocks(degree: int, psi: float):
    with mpmath.workdps(_MP_DIGITS):
        gamma = mpmath.mpf(psi) / degree
        x = mpmath.cos(gamma)
        s = mpmath.sin(gamma)
        p = mpmath.legendre(degree, x)
        q = mpmath.legendre(degree - 1, x)
        dp = degree * (x * p - q) / (x * x - 1)
        ddp = (2 * x * dp - degree * (degree + 1) * p) / (1 - x * x)
        lam = mpmath.mpf(degree * (degree + 1)) / 2
        a = 1 - p
        b1 = -s * dp
        c11 = lam + x * dp - s * s * ddp
        c22 = lam - dp
        return a, b1, c11, c22


def mp_conditional_moments(degree: int, psi: float) -> tuple[float, float, float]:
    """``(variance, omega11, omega22)`` from 60-digit Legendre values."""
    if degree < 2 or psi <= 0.0 or psi >= math.pi * degree:
        raise DomainError("need l >= 2 and 0 < psi < pi l")
    with mpmath.workdps(_MP_DIGITS):
        a, b1, c11, c22 = _mp_legendre_blocks(degree, psi)
        om11 = c11 - b1 * b1 / a
        return float(a), float(om11), float(c22)


def k1_quadrature_oracle(degree: int, psi: float) -> float:
    """Zero density from high-precision moments and :func:`quadrature_norm_oracle`."""
    var, om11, om22 = mp_conditional_moments(degree, psi)
    return quadrature_norm_oracle(max(om11, 0.0), max(om22, 0.0)) / math.sqrt(2.0 * math.pi * var)


# --- Monte Carlo conditional expectation -------------------------------------

def mc_norm_k1(omega11: float, omega22: float, variance: float, samples: int = 10**6,
               seed: int = 0) -> tuple[float, float]:
    """Monte Carlo ``E|N(0, diag(omega))| / sqrt(2 pi variance)`` with its standard error."""
    if variance <= 0.0:
        raise DegenerateVarianceError("variance must be positive")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    z = rng.standard_normal((samples, 2))
    norms = np.sqrt(omega11 * z[:, 0] ** 2 + omega22 * z[:, 1] ** 2)
    scale = 1.0 / math.sqrt(2.0 * math.pi * variance)
    return float(norms.mean() * scale), float(norms.std(ddof=1) / math.sqrt(samples) * scale)


def mc_conditional_k1(degree: int, psi: float, samples: int = 10**6,
                      seed: int = 0) -> tuple[float, float]:
    """Sample gradients from the conditional covariance at ``psi`` and average their norm."""
    from . import covariance

    if psi <= 0.0 or psi > math.pi * degree:
        raise DegenerateVarianceError("psi must lie in (0, pi l]")
    if psi < 0.5:
        var, om11, om22 = covariance.near_boundary_series(degree, psi)
    else:
        theta = 0.5 * (math.pi - psi / degree)
        cc = covariance.conditional_covariance(degree, theta)
        var, om11, om22 = cc.variance, cc.omega[0, 0], cc.omega[1, 1]
    return mc_norm_k1(max(om11, 0.0), max(om22, 0.0), var, samples, seed)


# --- verification suite --------------------------------------------------------

def random_density_points(count: int, seed: int = 0, max_degree: int = 300):
    """Random ``(l, psi)`` with psi log-uniform over the whole hemisphere."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        degree = int(rng.integers(2, max_degree + 1))
        psi = float(np.exp(rng.uniform(math.log(0.01), math.log(0.99 * math.pi * degree))))
        pts.append((degree, psi))
    return pts


def run_verification(seed: int = 0, density_points: int = 40, mc_samples: int = 200_000):
    """Compare every main routine against its oracle; returns a list of reports."""
    from . import covariance, density, special_functions as sf
    from .kac_rice import expected_nodal_length

    reports = []
    rng = np.random.default_rng(seed)

    for degree in (0, 1, 2, 3, 10, 25, 60):
        for x in (-0.93, -0.2, 0.0, 0.7, 1.0):
            reports.append(OracleReport.compare(
                f"legendre l={degree} x={x}", legendre_series_oracle(degree, x),
                sf.legendre_triple(degree, x).p, 1e-12, "abs"))
    for degree in (100, 500):
        for x in (-0.6, 0.31, 0.999):
            with mpmath.workdps(30):
                ref = float(mpmath.legendre(degree, x))
            reports.append(OracleReport.compare(
                f"legendre l={degree} x={x} (mpmath)", ref, sf.legendre_triple(degree, x).p, 1e-12, "abs"))

    for x in (0.0, 0.5, 3.7, 11.9, 12.1, 25.0, 60.0):
        reports.append(OracleReport.compare(
            f"J0({x})", float(mpmath.besselj(0, x)), sf.bessel_j0(x), 1e-12, "abs"))
    for m in (0.0, 0.3, 0.9, 0.999999, 1.0):
        reports.append(OracleReport.compare(
            f"E(m={m})", float(mpmath.ellipe(m)), sf.elliptic_e(m), 1e-13, "rel"))

    for v1, v2 in ((1.0, 1.0), (1.0, 0.0), (3.0, 0.2), (0.5, 7.0), (1.0, 1e-6)):
        reports.append(OracleReport.compare(
            f"E|Z| var=({v1},{v2})", quadrature_norm_oracle(v1, v2),
            sf.gaussian_norm_expectation(v1, v2), 1e-12, "rel"))

    for degree, psi in random_density_points(density_points, seed):
        reports.append(OracleReport.compare(
            f"K1 l={degree} psi={psi:.6g}", k1_quadrature_oracle(degree, psi),
            density.k1_exact(degree, psi), 1e-8, "rel"))
    reports.append(OracleReport.compare(
        "K1 l=2 psi=pi (two meridians)", math.sqrt(2.0) / math.pi, density.k1_exact(2, math.pi), 1e-12))

    for i, (degree, psi) in enumerate(((2, math.pi), (10, 3.0), (100, 0.05), (300, 40.0))):
        est, err = mc_conditional_k1(degree, psi, mc_samples, seed + i)
        reports.append(OracleReport.compare(
            f"MC K1 l={degree} psi={psi:.4g}", density.k1_exact(degree, psi), est, 3.0, "stderr", err))

    for _ in range(5):
        degree = int(rng.integers(1, 80))
        x = (float(rng.uniform(0.0, math.pi / 2)), float(rng.uniform(0, 2 * math.pi)))
        y = (math.pi / 2, float(rng.uniform(0, 2 * math.pi)))
        reports.append(OracleReport.compare(
            f"Dirichlet r(x, equator) l={degree}", 0.0, covariance.covariance(degree, x, y), 1e-12, "abs"))

    for degree in (1, 7, 50):
        t1, t2 = rng.uniform(0.0, math.pi, 2)
        dphi = float(rng.uniform(0, 2 * math.pi))
        row1 = sf.associated_legendre_row(degree, t1)
        row2 = sf.associated_legendre_row(degree, t2)
        m = np.arange(1, degree + 1)
        closure = row1[0] * row2[0] + 2.0 * np.sum(row1[1:] * row2[1:] * np.cos(m * dphi))
        cosd = math.cos(t1) * math.cos(t2) + math.sin(t1) * math.sin(t2) * math.cos(dphi)
        ref = (2 * degree + 1) / (4 * math.pi) * sf.legendre_triple(degree, cosd).p
        reports.append(OracleReport.compare(f"addition theorem l={degree}", ref, closure, 1e-10, "abs"))

    reports.append(OracleReport.compare("E[L] l=1 (equator)", 2 * math.pi,
                                        expected_nodal_length(1).total, 0.0, "abs"))
    reports.append(OracleReport.compare("E[L] l=2 (two meridians + equator)", 3 * math.pi,
                                        expected_nodal_length(2).total, 1e-6, "abs"))
    return reports

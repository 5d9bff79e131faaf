"""Monte Carlo synthesis of random spherical harmonics on (theta, phi) grids.

Two ensembles are supported:

* ``"dirichlet"``: the boundary-adapted field, only orders ``m`` with
  ``m != l (mod 2)``, normalised by ``sqrt(8 pi / (2l + 1))``.  It vanishes on
  the equator.
* ``"full"``: the isotropic full-sphere field with all orders, normalised by
  ``sqrt(4 pi / (2l + 1))`` so that its variance is one.

Coefficients use ``a_m = (u + i v) / sqrt(2)`` for ``m > 0`` and a real
standard normal ``a_0``, with ``a_{-m} = conj(a_m)`` and
``Y_{l,-m} = conj(Y_{l,m})``.  The field is then
``c * [a_0 N_0 + sum_{m>0} sqrt(2) (u cos(m phi) - v sin(m phi)) N_m]``.
"""
from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, GridTooCoarseError
from .special_functions import associated_legendre_table

DIRICHLET = "dirichlet"
FULL = "full"
MODES = (DIRICHLET, FULL)

# theta nodes per pi/2 and phi nodes per full turn, per unit of degree
THETA_NODES_PER_DEGREE = 10
PHI_NODES_PER_DEGREE = 20

_DUMP_MAGIC = b"NDKF"
_DUMP_HEADER = struct.Struct("<4sIIIIId")   # magic, version, degree, n_theta, n_phi, mode, theta_max


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def allowed_orders(degree: int, mode: str) -> np.ndarray:
    """Nonnegative orders m carried by the ensemble."""
    _check_mode(mode)
    ms = np.arange(degree + 1)
    if mode == DIRICHLET:
        ms = ms[(ms - degree) % 2 == 1]
    return ms


def normalisation(degree: int, mode: str) -> float:
    num = 8.0 if _check_mode(mode) == DIRICHLET else 4.0
    return math.sqrt(num * math.pi / (2 * degree + 1))


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, else NODALKIT_THREADS, else 1."""
    if threads is None:
        env = os.environ.get("NODALKIT_THREADS", "").strip()
        threads = int(env) if env else 1
    if threads < 1:
        raise DomainError("thread count must be >= 1")
    return int(threads)


def parallel_map(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    """Order-preserving map; results never depend on the worker count."""
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients ``a_{l,m}`` for ``m >= 0``; negative orders follow by conjugation."""

    degree: int
    mode: str
    orders: np.ndarray
    values: np.ndarray
    seed: int
    replicate: int = 0

    def entry(self, m: int) -> complex:
        idx = np.flatnonzero(self.orders == abs(m))
        if idx.size == 0:
            return 0j
        a = complex(self.values[idx[0]])
        return a.conjugate() if m < 0 else a

    @property
    def degrees_of_freedom(self) -> int:
        """Number of independent real Gaussians behind the set."""
        return int(sum(1 if m == 0 else 2 for m in self.orders))


def sample_coefficients(degree: int, mode: str = DIRICHLET, seed: int = 0,
                        replicate: int = 0) -> CoefficientSet:
    """Draw one coefficient set.

    Each order gets its own Philox stream keyed by ``(seed, replicate, m)``,
    so a replicate never depends on how many others were drawn before it.
    """
    if degree < 1 or int(degree) != degree:
        raise DomainError("degree must be a positive integer")
    degree = int(degree)
    orders = allowed_orders(degree, mode)
    values = np.empty(orders.size, dtype=complex)
    for i, m in enumerate(orders):
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(m)))
        u, v = np.random.Generator(np.random.Philox(ss)).standard_normal(2)
        values[i] = u if m == 0 else (u + 1j * v) / math.sqrt(2.0)
    return CoefficientSet(degree, mode, orders, values, int(seed), int(replicate))


@dataclass(frozen=True)
class Grid:
    """Latitude-longitude grid; theta runs from the north pole to ``theta_max`` inclusive."""

    n_theta: int
    n_phi: int
    theta_max: float = math.pi / 2

    def __post_init__(self):
        if self.n_theta < 2 or self.n_phi < 3:
            raise DomainError("grid needs at least 2 colatitudes and 3 longitudes")
        if not 0.0 < self.theta_max <= math.pi:
            raise DomainError("theta_max must lie in (0, pi]")

    @classmethod
    def for_mode(cls, mode: str, n_theta: int, n_phi: int) -> "Grid":
        return cls(n_theta, n_phi, math.pi / 2 if _check_mode(mode) == DIRICHLET else math.pi)

    @property
    def theta(self) -> np.ndarray:
        return np.linspace(0.0, self.theta_max, self.n_theta)

    @property
    def phi(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def d_theta(self) -> float:
        return self.theta_max / (self.n_theta - 1)

    @property
    def d_phi(self) -> float:
        return 2.0 * math.pi / self.n_phi

    def check_resolution(self, degree: int):
        """Refuse grids with fewer than ten nodes per half wavelength."""
        per_quarter = self.n_theta * (math.pi / 2) / self.theta_max
        need_t = THETA_NODES_PER_DEGREE * degree
        need_p = PHI_NODES_PER_DEGREE * degree
        if per_quarter + 1e-9 < need_t or self.n_phi < need_p:
            raise GridTooCoarseError(
                f"grid {self.n_theta}x{self.n_phi} over theta in [0, {self.theta_max:.4f}] is "
                f"too coarse for l={degree}: need >= {need_t} colatitudes per pi/2 "
                f"(have {per_quarter:.1f}) and >= {need_p} longitudes"
            )


def _rows(coeffs: CoefficientSet, theta: np.ndarray, n_phi: int) -> np.ndarray:
    # per-row Fourier sums evaluated with one inverse real FFT
    if n_phi <= 2 * coeffs.degree:
        raise DomainError("n_phi must exceed 2l to resolve every order")
    table = associated_legendre_table(coeffs.degree, theta)[:, coeffs.orders]
    spec = np.zeros((theta.size, n_phi // 2 + 1), dtype=complex)
    spec[:, coeffs.orders] = table * coeffs.values
    return normalisation(coeffs.degree, coeffs.mode) * n_phi * np.fft.irfft(spec, n=n_phi, axis=1)


def evaluate_direct(coeffs: CoefficientSet, theta, phi) -> np.ndarray:
    """Plain summation of the real expansion at arbitrary points."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    theta, phi = np.broadcast_arrays(theta, phi)
    table = associated_legendre_table(coeffs.degree, theta)[..., coeffs.orders]
    m = coeffs.orders.astype(float)
    a = coeffs.values
    wave = np.where(m == 0, a.real,
                    2.0 * (a.real * np.cos(m * phi[..., None]) - a.imag * np.sin(m * phi[..., None])))
    out = normalisation(coeffs.degree, coeffs.mode) * np.sum(table * wave, axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass
class FieldSample:
    """Field values on a grid plus a way to evaluate the field anywhere.

    ``evaluator(theta, phi)`` is exact (coefficient based for synthesised
    fields); ``row_evaluator(theta)`` returns full longitude rows.
    """

    grid: Grid
    values: np.ndarray
    mode: str
    degree: int
    coeffs: CoefficientSet | None = None
    evaluator: Callable | None = field(default=None, repr=False)
    row_evaluator: Callable | None = field(default=None, repr=False)

    @classmethod
    def from_function(cls, fn: Callable, grid: Grid, mode: str = FULL, degree: int = 1) -> "FieldSample":
        """Wrap an analytic ``fn(theta, phi)`` (vectorised) as a sample."""
        th, ph = np.meshgrid(grid.theta, grid.phi, indexing="ij")
        values = np.asarray(fn(th, ph), dtype=float)

        def rows(theta):
            t, p = np.meshgrid(np.atleast_1d(theta), grid.phi, indexing="ij")
            return np.asarray(fn(t, p), dtype=float)

        return cls(grid, values, _check_mode(mode), degree, None, fn, rows)

    def rows(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.row_evaluator is not None:
            return self.row_evaluator(theta)
        raise DomainError("sample has no row evaluator")

    def evaluate(self, theta, phi):
        if self.evaluator is None:
            raise DomainError("sample has no exact evaluator")
        return self.evaluator(theta, phi)

    def write_binary(self, handle):
        """Little-endian dump: fixed header, then float64 values in row-major order."""
        head = _DUMP_HEADER.pack(_DUMP_MAGIC, 1, self.degree, self.grid.n_theta,
                                 self.grid.n_phi, MODES.index(self.mode), self.grid.theta_max)
        handle.write(head)
        handle.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())


def read_binary(handle) -> FieldSample:
    """Inverse of :meth:`FieldSample.write_binary` (values only, no evaluator)."""
    raw = handle.read(_DUMP_HEADER.size)
    magic, version, degree, n_theta, n_phi, mode, theta_max = _DUMP_HEADER.unpack(raw)
    if magic != _DUMP_MAGIC or version != 1:
        raise DomainError("not a nodalkit field dump")
    values = np.frombuffer(handle.read(8 * n_theta * n_phi), dtype="<f8").reshape(n_theta, n_phi)
    return FieldSample(Grid(n_theta, n_phi, theta_max), values.astype(float), MODES[mode], degree)


def synthesize_field(coeffs: CoefficientSet, grid: Grid) -> FieldSample:
    """Evaluate the expansion on every grid node (inverse FFT along each row)."""
    values = _rows(coeffs, grid.theta, grid.n_phi)
    if coeffs.mode == DIRICHLET and math.isclose(grid.theta_max, math.pi / 2):
        values[-1] = 0.0    # exact zero on the equator; the sum is ~1e-16 there
    return FieldSample(
        grid, values, coeffs.mode, coeffs.degree, coeffs,
        evaluator=lambda t, p: evaluate_direct(coeffs, t, p),
        row_evaluator=lambda t: _rows(coeffs, np.atleast_1d(np.asarray(t, dtype=float)), grid.n_phi),
    )


def _basis(degree: int, mode: str, theta, phi) -> np.ndarray:
    # real design matrix B with T = B z, z the standard normals in draw order
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    orders = allowed_orders(degree, mode)
    table = associated_legendre_table(degree, theta)[:, orders]
    c = normalisation(degree, mode)
    cols = []
    for j, m in enumerate(orders):
        if m == 0:
            cols += [c * table[:, j], np.zeros_like(theta)]
        else:
            r2 = math.sqrt(2.0)
            cols += [c * r2 * table[:, j] * np.cos(m * phi), -c * r2 * table[:, j] * np.sin(m * phi)]
    return np.column_stack(cols)


def _draws(degree: int, mode: str, seed: int, replicate: int) -> np.ndarray:
    coeffs = sample_coefficients(degree, mode, seed, replicate)
    z = []
    for m, a in zip(coeffs.orders, coeffs.values):
        if m == 0:
            z += [a.real, 0.0]
        else:
            z += [a.real * math.sqrt(2.0), a.imag * math.sqrt(2.0)]
    return np.array(z)


def empirical_covariance(degree: int, mode: str, pairs, replicates: int = 1000,
                         seed: int = 0, threads: int | None = None) -> list[tuple[float, float]]:
    """Monte Carlo ``E[T(x) T(y)]`` for each pair ``((theta, phi), (theta', phi'))``.

    Returns ``(mean, stderr)`` per pair.
    """
    if replicates < 100:
        raise DomainError("need at least 100 replicates")
    pts_x = np.array([p[0] for p in pairs], dtype=float).reshape(-1, 2)
    pts_y = np.array([p[1] for p in pairs], dtype=float).reshape(-1, 2)
    bx = _basis(degree, mode, pts_x[:, 0], pts_x[:, 1])
    by = _basis(degree, mode, pts_y[:, 0], pts_y[:, 1])
    z = np.array(parallel_map(lambda r: _draws(degree, mode, seed, r), range(replicates), threads))
    prod = (z @ bx.T) * (z @ by.T)
    mean = prod.mean(axis=0)
    err = prod.std(axis=0, ddof=1) / math.sqrt(replicates)
    return [(float(a), float(b)) for a, b in zip(mean, err)]

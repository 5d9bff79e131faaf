"""Nodal lines of sampled fields by marching squares, and their spherical length.

On the Dirichlet hemisphere the field is divided by ``cos(theta)`` before
contouring.  The quotient has the same zero set off the equator but does not
vanish on it, so nodal lines that meet the boundary are followed all the way
down without any band being cut out; the equator itself is added as ``2 pi``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .sampler import (DIRICHLET, Grid, FieldSample, parallel_map, sample_coefficients,
                      synthesize_field)

# offset used to take the limit of T / cos(theta) on the equator row
_EQUATOR_OFFSET = 1e-6

# corners 0..3 = (i, j), (i, j+1), (i+1, j+1), (i+1, j); edge k joins corner k and k+1
_EDGES_OF_CORNER = ((3, 0), (0, 1), (1, 2), (2, 3))


@dataclass
class NodalSegments:
    """Straight pieces of the nodal line, one row ``(theta1, phi1, theta2, phi2)`` each."""

    segments: np.ndarray
    lengths: np.ndarray
    equator_convention: bool
    total_length: float = field(init=False)

    def __post_init__(self):
        extra = 2.0 * math.pi if self.equator_convention else 0.0
        self.total_length = math.fsum(self.lengths) + extra

    def __len__(self):
        return len(self.segments)

    def write_csv(self, handle):
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(["theta1", "phi1", "theta2", "phi2"])
        for row in self.segments:
            t1, p1, t2, p2 = row
            w.writerow([f"{t1:.12g}", f"{p1 % (2 * math.pi):.12g}",
                        f"{t2:.12g}", f"{p2 % (2 * math.pi):.12g}"])


@dataclass
class NodalLengthResult:
    degree: int
    mode: str
    mean: float
    stderr: float
    values: np.ndarray
    seed: int
    grid: Grid


def _contour_values(sample: FieldSample) -> np.ndarray:
    grid = sample.grid
    theta = grid.theta
    if sample.mode != DIRICHLET or not math.isclose(grid.theta_max, math.pi / 2):
        return sample.values
    cos_t = np.cos(theta[:-1])
    f = np.empty_like(sample.values)
    f[:-1] = sample.values[:-1] / cos_t[:, None]
    if sample.row_evaluator is not None:
        t_eq = math.pi / 2 - _EQUATOR_OFFSET
        f[-1] = sample.rows(t_eq)[0] / math.cos(t_eq)
    else:
        f[-1] = 2.0 * f[-2] - f[-3]
    return f


def _edge_points(v, theta, phi, d_theta, d_phi):
    # crossing location on the four edges of every cell, in local (unwrapped) phi
    v0 = v[:-1, :]
    v1 = np.roll(v, -1, axis=1)[:-1, :]
    v3 = v[1:, :]
    v2 = np.roll(v, -1, axis=1)[1:, :]
    th0 = theta[:-1, None]
    th1 = theta[1:, None]
    ph0 = phi[None, :]

    def frac(a, b):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = a / (a - b)
        return np.clip(np.nan_to_num(t, nan=0.5), 0.0, 1.0)

    t0 = frac(v0, v1)
    t1 = frac(v1, v2)
    t2 = frac(v3, v2)
    t3 = frac(v0, v3)
    zeros = np.zeros_like(t0)
    pts_theta = np.stack([th0 + zeros, th0 + t1 * d_theta, th1 + zeros, th0 + t3 * d_theta])
    pts_phi = np.stack([ph0 + t0 * d_phi, ph0 + d_phi + zeros, ph0 + t2 * d_phi, ph0 + zeros])
    return (v0, v1, v2, v3), pts_theta, pts_phi


def extract_nodal_length(sample: FieldSample, equator_exclusion: float = 0.0,
                         equator_convention: bool | None = None,
                         check_resolution: bool = True) -> NodalSegments:
    """Marching squares on the grid with linear interpolation along cell edges.

    ``equator_exclusion`` (radians) skips cells within that distance of the
    equator; it must be zero or at least one colatitude step.  Saddle cells are
    resolved by the exact field value at the cell centre.
    """
    grid = sample.grid
    if check_resolution:
        grid.check_resolution(sample.degree)
    dirichlet = sample.mode == DIRICHLET
    if equator_convention is None:
        equator_convention = dirichlet
    if equator_exclusion < 0.0 or (0.0 < equator_exclusion < grid.d_theta * (1 - 1e-9)):
        raise DomainError("equator exclusion must be 0 or at least one grid step")
    if equator_exclusion > 0.0 and not dirichlet:
        raise DomainError("equator exclusion only applies to the Dirichlet hemisphere")

    theta, phi = grid.theta, grid.phi
    v = _contour_values(sample)
    corners, pts_theta, pts_phi = _edge_points(v, theta, phi, grid.d_theta, grid.d_phi)
    pos = [c >= 0.0 for c in corners]
    case = pos[0] * 1 + pos[1] * 2 + pos[2] * 4 + pos[3] * 8
    crossing = np.stack([pos[k] != pos[(k + 1) % 4] for k in range(4)])

    active = (case != 0) & (case != 15)
    if equator_exclusion > 0.0:
        keep_rows = theta[1:] <= math.pi / 2 - equator_exclusion + 1e-12
        active &= keep_rows[:, None]
    saddle = active & ((case == 5) | (case == 10))
    plain = active & ~saddle

    pieces = []
    # ordinary cells: exactly two crossing edges
    ii, jj = np.nonzero(plain)
    if ii.size:
        cr = crossing[:, ii, jj]                      # (4, n)
        order = np.argsort(~cr, axis=0, kind="stable")
        ea, eb = order[0], order[1]
        pieces.append(np.column_stack([
            pts_theta[ea, ii, jj], pts_phi[ea, ii, jj],
            pts_theta[eb, ii, jj], pts_phi[eb, ii, jj],
        ]))

    # saddles: cut off the two corners whose sign differs from the centre
    ii, jj = np.nonzero(saddle)
    if ii.size:
        if sample.evaluator is not None:
            centre = np.asarray(sample.evaluate(theta[ii] + 0.5 * grid.d_theta,
                                                phi[jj] + 0.5 * grid.d_phi))
        else:
            centre = sum(c[ii, jj] for c in corners) / 4.0
        centre_pos = np.atleast_1d(centre >= 0.0)
        for k, (e1, e2) in enumerate(_EDGES_OF_CORNER):
            cut = pos[k][ii, jj] != centre_pos
            if np.any(cut):
                a, b = ii[cut], jj[cut]
                pieces.append(np.column_stack([
                    pts_theta[e1, a, b], pts_phi[e1, a, b],
                    pts_theta[e2, a, b], pts_phi[e2, a, b],
                ]))

    segs = np.concatenate(pieces) if pieces else np.zeros((0, 4))
    mean_t = 0.5 * (segs[:, 0] + segs[:, 2])
    lengths = np.hypot(segs[:, 2] - segs[:, 0], np.sin(mean_t) * (segs[:, 3] - segs[:, 1]))
    return NodalSegments(segs, lengths, bool(equator_convention))


def monte_carlo_nodal_length(degree: int, mode: str = DIRICHLET, replicates: int = 100,
                             grid: Grid | None = None, seed: int = 0,
                             equator_exclusion: float = 0.0,
                             threads: int | None = None) -> NodalLengthResult:
    """Mean and standard error of the extracted nodal length over replicates."""
    if replicates < 30:
        raise DomainError("need at least 30 replicates")
    if grid is None:
        grid = Grid.for_mode(mode, 20 * degree + 1, 40 * degree)
    grid.check_resolution(degree)

    def one(rep: int) -> float:
        coeffs = sample_coefficients(degree, mode, seed, rep)
        return extract_nodal_length(synthesize_field(coeffs, grid), equator_exclusion).total_length

    values = np.array(parallel_map(one, range(replicates), threads))
    return NodalLengthResult(degree, mode, float(values.mean()),
                             float(values.std(ddof=1) / math.sqrt(replicates)),
                             values, int(seed), grid)

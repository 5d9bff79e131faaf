"""Expected nodal length of the Dirichlet random spherical harmonic.

In the scaled variable the hemisphere integral reads

    E[L] - 2 pi = (pi / l) * int_0^{pi l} K(psi) cos(psi / (2 l)) dpsi,

the ``2 pi`` being the equator, which is always part of the nodal set.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import density
from .errors import DomainError, NumericalFailure

EXCISION_PSI = 1e-6
BOUNDARY_LAYER = 0.5        # eps_0: end of the near-boundary region
FAR_CONSTANT = density.FAR_CONSTANT
OSCILLATION_PANEL = math.pi / 2
NODES_PER_PANEL = 16


def leading_term(degree: int) -> float:
    """Hemisphere area times the isotropic density."""
    return 2.0 * math.pi * density.plateau(degree)


def berard_baseline(degree: int) -> float:
    """Expected nodal length of the full-sphere ensemble, ``sqrt(2) pi sqrt(l (l+1))``."""
    if degree < 1:
        raise DomainError("degree must be >= 1")
    return math.sqrt(2.0) * math.pi * math.sqrt(degree * (degree + 1))


@dataclass
class NodalLengthPrediction:
    degree: int
    total: float
    leading: float
    deficiency: float
    region_contributions: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def interior(self) -> float:
        """Expected length off the equator."""
        return self.total - 2.0 * math.pi

    @property
    def interior_deficiency(self) -> float:
        return self.interior - self.leading


def _panel_edges(degree: int, eps_psi: float, eps0: float, far_c: float) -> np.ndarray:
    top = math.pi * degree
    edges = [eps_psi]
    # geometric panels towards the boundary, unit panels through the transition
    edges += list(np.geomspace(max(eps_psi, 1e-3), eps0, 4)) if eps0 > eps_psi else []
    edges += list(np.arange(math.ceil(eps0), math.ceil(far_c)))
    edges += [eps0, far_c]
    n_osc = max(1, math.ceil((top - far_c) / OSCILLATION_PANEL))
    edges += list(np.linspace(far_c, top, n_osc + 1))
    edges.append(top)
    e = np.unique(np.clip(np.array(edges, dtype=float), eps_psi, top))
    return e


def _integrate(degree: int, edges: np.ndarray, nodes: int, psi_switch: float):
    x, w = np.polynomial.legendre.leggauss(nodes)
    a = edges[:-1, None]
    b = edges[1:, None]
    psi = 0.5 * (a + b) + 0.5 * (b - a) * x
    weights = 0.5 * (b - a) * w
    k = np.asarray(density.k1_exact(degree, psi.ravel(), psi_switch=psi_switch)).reshape(psi.shape)
    integrand = k * np.cos(psi / (2.0 * degree)) * weights * (math.pi / degree)
    return integrand.sum(axis=1)


def expected_nodal_length(degree: int, nodes: int = NODES_PER_PANEL,
                          eps_psi: float = EXCISION_PSI,
                          eps0: float = BOUNDARY_LAYER, far_c: float = FAR_CONSTANT,
                          rtol: float = 1e-9, max_doublings: int = 4,
                          psi_switch: float = density.PSI_SWITCH) -> NodalLengthPrediction:
    """Kac-Rice expected nodal length with the equator counted separately.

    The density is integrated end to end with its exact form; ``eps0`` and
    ``far_c`` only decide how the integral is attributed to the boundary,
    intermediate and far regions.  Node counts are doubled until two
    successive totals agree to ``rtol``.
    """
    if degree < 1 or int(degree) != degree:
        raise DomainError("degree must be a positive integer")
    degree = int(degree)
    lead = leading_term(degree)
    if degree == 1:
        regions = {"hc": 0.0, "hi": 0.0, "hf": 0.0}
        total = 2.0 * math.pi
        return NodalLengthPrediction(degree, total, lead, total - lead, regions,
                                     {"nodes": 0, "excision_bound": 0.0})

    edges = _panel_edges(degree, eps_psi, eps0, far_c)
    panels = _integrate(degree, edges, nodes, psi_switch)
    previous = math.fsum(panels)
    change = math.inf
    for _ in range(max_doublings):
        nodes *= 2
        panels = _integrate(degree, edges, nodes, psi_switch)
        current = math.fsum(panels)
        change = abs(current - previous)
        if change <= rtol * abs(current):
            break
        previous = current
    else:
        raise NumericalFailure(
            f"Kac-Rice quadrature did not converge for l={degree}",
            {"degree": degree, "nodes": nodes, "last_change": change,
             "value": current, "panels": len(edges) - 1},
        )

    left = edges[:-1]
    regions = {
        "hc": math.fsum(panels[left < eps0]),
        "hi": math.fsum(panels[(left >= eps0) & (left < far_c)]),
        "hf": math.fsum(panels[left >= far_c]),
    }
    total = math.fsum(regions.values()) + 2.0 * math.pi
    # (pi/l) * K(0+) * eps_psi with K(0+) = sqrt(l (l+1)) / (2 pi)
    excision_bound = 0.5 * eps_psi * math.sqrt(1.0 + 1.0 / degree)
    diagnostics = {
        "nodes": nodes,
        "panels": len(edges) - 1,
        "last_change": change,
        "excision_bound": excision_bound,
    }
    return NodalLengthPrediction(degree, total, lead, total - lead, regions, diagnostics)


@dataclass
class DeficiencyFit:
    slope: float
    intercept: float
    degrees: list
    deficiencies: list
    residuals: list

    def to_json(self, extra: dict | None = None) -> str:
        payload = asdict(self)
        payload["reference_slope"] = REFERENCE_SLOPE
        if extra:
            payload = {**extra, **payload}
        return json.dumps(payload, indent=2, sort_keys=True)


REFERENCE_SLOPE = -1.0 / (32.0 * math.sqrt(2.0))


def fit_log_slope(degrees, deficiencies) -> DeficiencyFit:
    """Least-squares fit ``deficiency ~ slope * log l + intercept``."""
    degrees = [int(d) for d in degrees]
    if len(degrees) < 5:
        raise DomainError("need at least five degrees for the deficiency fit")
    if max(degrees) < 10 * min(degrees):
        raise DomainError("degrees must span at least one decade")
    x = np.log(np.asarray(degrees, dtype=float))
    y = np.asarray(deficiencies, dtype=float)
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - (slope * x + intercept)
    return DeficiencyFit(float(slope), float(intercept), degrees,
                         [float(v) for v in y], [float(v) for v in residuals])


def deficiency_fit(degrees, **quadrature) -> DeficiencyFit:
    """Fit the nodal deficiency of the Kac-Rice length against ``log l``."""
    degrees = [int(d) for d in degrees]
    if len(degrees) < 5 or max(degrees) < 10 * min(degrees):
        raise DomainError("need at least five degrees spanning one decade")
    preds = [expected_nodal_length(d, **quadrature) for d in degrees]
    return fit_log_slope(degrees, [p.deficiency for p in preds])


def far_substituted_deficiency(degree: int, far_c: float = FAR_CONSTANT,
                               nodes: int = NODES_PER_PANEL) -> float:
    """Deficiency with the far-region density replaced by its asymptotic expansion.

    Used to check that only the non-oscillatory ``1/psi`` correction feeds the
    logarithm.
    """
    pred = expected_nodal_length(degree, nodes=nodes, far_c=far_c)
    top = math.pi * degree
    n_osc = max(1, math.ceil((top - far_c) / OSCILLATION_PANEL))
    edges = np.linspace(far_c, top, n_osc + 1)
    x, w = np.polynomial.legendre.leggauss(2 * nodes)
    a = edges[:-1, None]
    b = edges[1:, None]
    psi = 0.5 * (a + b) + 0.5 * (b - a) * x
    weights = 0.5 * (b - a) * w
    k = np.asarray(density.k1_far_asymptotic(degree, psi))
    hf = math.fsum((k * np.cos(psi / (2.0 * degree)) * weights).ravel()) * math.pi / degree
    total = pred.region_contributions["hc"] + pred.region_contributions["hi"] + hf + 2.0 * math.pi
    return total - pred.leading

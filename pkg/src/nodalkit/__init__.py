"""Nodal length of boundary-adapted random spherical harmonics.

Exact zero density, Kac-Rice expected length, Monte Carlo sampling and
nodal-line extraction for the Dirichlet ensemble on the hemisphere.
"""
from .density import k1_exact, k1_far_asymptotic, k1_near_asymptotic, planar_berry_density
from .errors import (DegenerateInputError, DegenerateVarianceError, DomainError,
                     GridTooCoarseError, NodalkitError, NumericalFailure)
from .kac_rice import berard_baseline, deficiency_fit, expected_nodal_length
from .nodal_geometry import extract_nodal_length, monte_carlo_nodal_length
from .sampler import Grid, sample_coefficients, synthesize_field

__version__ = "0.1.0"

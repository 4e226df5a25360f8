"""Explicit solutions of divergence-form equations with extremely fast decay.

Modules, bottom up: ``scalarcore`` (smooth step, log-domain scalars),
``planarlemma`` (2x2 matrix identities), ``segments`` (time slabs carrying
one field to another), ``assembly`` (chains), ``parabolic`` (drifted heat
chain), ``verifier`` (measured checks) and ``cli``.
"""

from .assembly import (
    Timeline,
    building_block,
    eigen_full_cylinder,
    eigen_half_cylinder,
    gaussian_chain,
    harmonic_half_cylinder,
    load_timeline,
    plis_miller_chain,
    save_timeline,
    timeline_eval,
)
from .parabolic import parabolic_block, parabolic_chain
from .scalarcore import LogScalar, theta
from .verifier import Tolerances, run_suite

__all__ = [
    "LogScalar",
    "Timeline",
    "Tolerances",
    "building_block",
    "eigen_full_cylinder",
    "eigen_half_cylinder",
    "gaussian_chain",
    "harmonic_half_cylinder",
    "load_timeline",
    "parabolic_block",
    "parabolic_chain",
    "plis_miller_chain",
    "run_suite",
    "save_timeline",
    "theta",
    "timeline_eval",
]

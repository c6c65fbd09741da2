"""g2sphere - Sp(2)-invariant G2-structures on the 7-sphere.

g2sphere computes torsion, the divergence of the full torsion tensor, the
isometric flow and the second variation of the energy for invariant
G2-structures, both from structure constants with exterior calculus and from
closed forms, and cross-checks the two.
"""

from g2sphere.algebra import InnerProduct, Multivector, ce_differential, hodge_star, structure_constants, wedge
from g2sphere.config import DEFAULT_SETTINGS, Settings
from g2sphere.connection import DivergenceResult, connection_data, div_full_torsion, divergence_invariant_sym
from g2sphere.exceptions import (
    DefinitenessError,
    DegreeError,
    G2Error,
    IntegrationError,
    NotCriticalError,
    OrientationError,
    ParameterDomainError,
    UnsupportedCaseError,
    UsageError,
)
from g2sphere.flow import FlowState, Trajectory, asymptotics, closed_form_solution, flow_rhs, integrate
from g2sphere.params import AnsatzParams, G2Params, GeneralParams, load_params
from g2sphere.stability import (
    CriticalClass,
    StabilityReport,
    classify_critical,
    find_special_radii,
    hessian_closed,
    hessian_numeric,
)
from g2sphere.structures import metric_from_phi, phi_from_params, psi_from_phi
from g2sphere.torsion import TorsionData, closed_form_ansatz, closed_form_general, rho_coefficients, torsion

__all__ = [
    "InnerProduct",
    "Multivector",
    "ce_differential",
    "hodge_star",
    "structure_constants",
    "wedge",
    "DEFAULT_SETTINGS",
    "Settings",
    "DivergenceResult",
    "connection_data",
    "div_full_torsion",
    "divergence_invariant_sym",
    "DefinitenessError",
    "DegreeError",
    "G2Error",
    "IntegrationError",
    "NotCriticalError",
    "OrientationError",
    "ParameterDomainError",
    "UnsupportedCaseError",
    "UsageError",
    "FlowState",
    "Trajectory",
    "asymptotics",
    "closed_form_solution",
    "flow_rhs",
    "integrate",
    "AnsatzParams",
    "G2Params",
    "GeneralParams",
    "load_params",
    "CriticalClass",
    "StabilityReport",
    "classify_critical",
    "find_special_radii",
    "hessian_closed",
    "hessian_numeric",
    "metric_from_phi",
    "phi_from_params",
    "psi_from_phi",
    "TorsionData",
    "closed_form_ansatz",
    "closed_form_general",
    "rho_coefficients",
    "torsion",
]

"""Invariant Levi-Civita connection and divergence of invariant tensors.

For an invariant metric g on p the Levi-Civita connection is encoded by

    ∇_{e_a} e_b = -½ [e_a, e_b]_p + U(e_a, e_b),
    2 g(U(x, y), z) = g([z, x]_p, y) + g(x, [z, y]_p),

with components of invariant tensors differentiated along the Killing frame by
e_a(S(e_b, e_c)) = -S([e_a, e_b]_p, e_c) - S(e_b, [e_a, e_c]_p). Together these
give (∇_a S)(e_b, e_c) = -S(Λ_a e_b, e_c) - S(e_b, Λ_a e_c) with the Nomizu map
Λ_a e_b = ½ [e_a, e_b]_p + U(e_a, e_b).

The divergence of a 2-tensor contracts the derivative with the first slot,
(div S)_j = g^{ab} (∇_a S)(e_b, e_j). The first slot of the full torsion is
the differentiated one. The 1-form reported as div T is minus that divergence,
which keeps the sign of the Ansatz closed form:

    div T = ½ ⋆d(τ2 ∧ φ) - ⋆d(τ1 ∧ ψ) + div τ27,

and along ∂φ/∂t = -(div T)^♯ ⌟ ψ the energy decreases, d|T|^2/dt = -2 |div T|^2.
"""

import logging
from dataclasses import dataclass

import numpy as np

from g2sphere.algebra import InnerProduct, Multivector, ce_differential, hodge_star, structure_constants, wedge
from g2sphere.params import AnsatzParams, AnyParams, GeneralParams
from g2sphere.structures import phi_from_params
from g2sphere.torsion import TorsionData, TorsionForms, full_torsion, torsion_forms

logger = logging.getLogger(__name__)

# Coefficient of the bracket in ∇_{e_a} e_b
BRACKET_SIGN = -0.5


@dataclass(frozen=True, eq=False)
class ConnectionData:
    """U[a, b, c] and nabla[a, b, c]: component c of U(e_a, e_b) and ∇_{e_a} e_b."""

    metric: InnerProduct
    U: np.ndarray
    nabla: np.ndarray

    @property
    def nomizu(self) -> np.ndarray:
        """Λ[a, b, c], component c of Λ_a e_b."""
        return self.U + 0.5 * _p_bracket()

    def covariant_derivative(self, tensor: np.ndarray) -> np.ndarray:
        """(∇_a S)(e_b, e_c) for an invariant 2-tensor S."""
        lam = self.nomizu
        s = np.asarray(tensor, dtype=float)
        return -np.einsum("abd,dc->abc", lam, s) - np.einsum("acd,bd->abc", lam, s)


def _p_bracket() -> np.ndarray:
    return structure_constants().p_bracket.astype(float)


def connection_data(g: InnerProduct) -> ConnectionData:
    """U-operator and connection coefficients of an invariant metric."""
    bracket = _p_bracket()
    gram = g.gram
    # rhs[a, b, z] = g([e_z, e_a], e_b) + g(e_a, [e_z, e_b])
    rhs = np.einsum("zac,cb->abz", bracket, gram) + np.einsum("ac,zbc->abz", gram, bracket)
    u = 0.5 * np.einsum("abz,zc->abc", rhs, g.gram_inv)
    return ConnectionData(metric=g, U=u, nabla=BRACKET_SIGN * bracket + u)


def divergence(tensor: np.ndarray, conn: ConnectionData) -> np.ndarray:
    """(div S)_j = g^{ab} (∇_a S)(e_b, e_j) as 1-form components."""
    derivative = conn.covariant_derivative(tensor)
    return np.einsum("ab,abj->j", conn.metric.gram_inv, derivative)


def divergence_invariant_sym(tensor: np.ndarray, g: InnerProduct | ConnectionData) -> np.ndarray:
    """Divergence of an invariant symmetric 2-tensor."""
    s = np.asarray(tensor, dtype=float)
    if not np.allclose(s, s.T, rtol=0.0, atol=1e-10 * max(1.0, float(np.abs(s).max()))):
        raise ValueError("divergence_invariant_sym needs a symmetric tensor")
    conn = g if isinstance(g, ConnectionData) else connection_data(g)
    return divergence(s, conn)


@dataclass(frozen=True, eq=False)
class DivergenceResult:
    """div T by the exterior route (A) and the connection route (B).

    Route B is -div of the full torsion; route A is the exterior part plus div τ27.
    """

    route_a: np.ndarray
    route_b: np.ndarray
    torsion: TorsionData
    metric: InnerProduct

    @property
    def value(self) -> np.ndarray:
        return self.route_b

    @property
    def norm(self) -> float:
        """|div T|_g."""
        v = self.route_b
        return float(np.sqrt(max(0.0, v @ self.metric.gram_inv @ v)))

    def sharp(self) -> np.ndarray:
        return self.metric.gram_inv @ self.route_b


def exterior_part(forms: TorsionForms) -> Multivector:
    """½ ⋆d(τ2 ∧ φ) - ⋆d(τ1 ∧ ψ), minus the divergence of the skew part of T."""
    g = forms.metric
    first = hodge_star(ce_differential(wedge(forms.tau2, forms.phi)), g)
    second = hodge_star(ce_differential(wedge(forms.tau1, forms.psi)), g)
    return first * 0.5 - second


def div_full_torsion(params: AnyParams | Multivector) -> DivergenceResult:
    """Divergence of the full torsion tensor, computed two ways."""
    phi = params if isinstance(params, Multivector) else phi_from_params(params)
    forms = torsion_forms(phi)
    data = full_torsion(forms)
    conn = connection_data(forms.metric)
    route_a = exterior_part(forms).coeffs + divergence_invariant_sym(data.tau27, conn)
    route_b = -divergence(data.full, conn)
    logger.debug("div T routes differ by %.3e", float(np.max(np.abs(route_a - route_b))))
    return DivergenceResult(route_a=route_a, route_b=route_b, torsion=data, metric=forms.metric)


def ansatz_divergence(params: AnsatzParams) -> np.ndarray:
    """div T = (4 (r^3 + 2)(r^3 - 1) h2 / r) (h3 e^1 + h0 e^2 - h1 e^3)."""
    r = params.r
    h0, h1, h2, h3 = params.quaternion
    coef = 4.0 * (r**3 + 2) * (r**3 - 1) * h2 / r
    return coef * np.array([h3, h0, -h1, 0.0, 0.0, 0.0, 0.0])


def ansatz_div_norm_sq(r: float, h2: float) -> float:
    """|div T|^2 = (4 (r^3 + 2)(r^3 - 1) / r)^2 h2^2 (1 - h2^2) / r^2."""
    return (4.0 * (r**3 + 2) * (r**3 - 1) / r) ** 2 * h2**2 * (1 - h2**2) / r**2


def exterior_part_general(params: GeneralParams) -> np.ndarray:
    """Closed form of ½ ⋆d(τ2 ∧ φ) - ⋆d(τ1 ∧ ψ) on the family (r1, r2, r3, h)."""
    r1, r2, r3 = params.general_radii()
    h0, h1, h2, h3 = params.quaternion
    x1 = r1 * r2**4 * r3**4
    x2 = r1**4 * r2 * r3**4
    x3 = r1**4 * r2**4 * r3
    out = np.zeros(7)
    out[0] = 2 * r1**6 / (r2**6 * r3**6) * (
        (x1 + 2) * (x1 - 1) * (r2**3 + r3**3) * h2 * h3 + (x1 - 2) * (x1 + 1) * (r2**3 - r3**3) * h0 * h1
    )
    out[1] = 2 * r2**6 / (r1**6 * r3**6) * (
        (x2 + 2) * (x2 - 1) * (r1**3 + r3**3) * h0 * h2 - (x2 - 2) * (x2 + 1) * (r1**3 - r3**3) * h1 * h3
    )
    out[2] = -2 * r3**6 / (r1**6 * r2**6) * (
        (x3 + 2) * (x3 - 1) * (r1**3 + r2**3) * h1 * h2 + (x3 - 2) * (x3 + 1) * (r1**3 - r2**3) * h0 * h3
    )
    return out

"""Torsion of invariant G2-structures.

First-principles torsion forms come from the Chevalley-Eilenberg differential
and the Hodge star of the metric induced by the same 3-form:

    τ0 = ⋆(φ ∧ dφ)/7,   τ1 = ⋆(φ ∧ ⋆dφ)/12,
    τ2 = -⋆dψ + 4⋆(τ1 ∧ ψ),   τ3 = ⋆dφ - τ0 φ - 3⋆(τ1 ∧ φ),

so that dφ = τ0 ψ + 3 τ1 ∧ φ + ⋆τ3 and dψ = 4 τ1 ∧ ψ + τ2 ∧ φ. The full
torsion tensor is T = (τ0/4) g - ⋆(τ1 ∧ ψ) - τ2/2 - ȷ(τ3)/4.

Closed forms for the Ansatz and general families are kept alongside as
independent oracles.
"""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from g2sphere.algebra import (
    DIM,
    OMEGAS,
    InnerProduct,
    Multivector,
    ce_differential,
    contract,
    coframe,
    hodge_star,
    index_tuples,
    norm_sq,
    wedge,
)
from g2sphere.exceptions import UnsupportedCaseError
from g2sphere.params import AnsatzParams, AnyParams, GeneralParams
from g2sphere.structures import metric_from_params, metric_from_phi, phi_from_params, psi_from_phi

logger = logging.getLogger(__name__)

NEARLY_PARALLEL_R = float(np.cbrt(2.0))
SQUASHED_R = float(np.cbrt(2.0 / 5.0))


@dataclass(frozen=True, eq=False)
class TorsionForms:
    """A G2-structure with its metric, dual 4-form, differentials and torsion forms."""

    phi: Multivector
    psi: Multivector
    metric: InnerProduct
    dphi: Multivector
    dpsi: Multivector
    tau0: float
    tau1: Multivector
    tau2: Multivector
    tau3: Multivector


@dataclass(frozen=True, eq=False)
class TorsionData:
    """Torsion forms, τ27, the full torsion tensor and its squared norm."""

    tau0: float
    tau1: Multivector
    tau2: Multivector
    tau27: np.ndarray
    full: np.ndarray
    norm_sq: float
    tau3: Multivector | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "tau0": float(self.tau0),
            "tau1": [float(x) for x in self.tau1.coeffs],
            "tau2": {"".join(map(str, key)): value for key, value in self.tau2.to_dict().items()},
            "tau27": self.tau27.tolist(),
            "T": self.full.tolist(),
            "normT2": float(self.norm_sq),
        }


def _star_scalar(top: Multivector, g: InnerProduct) -> float:
    return top.value() / g.vol_coeff


def torsion_forms(phi: Multivector, g: InnerProduct | None = None) -> TorsionForms:
    """Torsion forms of φ with respect to its own metric.

    Raises:
        DefinitenessError: If φ is not a G2-structure
    """
    g = g if g is not None else metric_from_phi(phi)
    psi = psi_from_phi(phi, g)
    dphi = ce_differential(phi)
    dpsi = ce_differential(psi)
    star_dphi = hodge_star(dphi, g)

    tau0 = _star_scalar(wedge(phi, dphi), g) / 7.0
    tau1 = hodge_star(wedge(phi, star_dphi), g) / 12.0
    tau2 = -hodge_star(dpsi, g) + hodge_star(wedge(tau1, psi), g) * 4.0
    tau3 = star_dphi - phi * tau0 - hodge_star(wedge(tau1, phi), g) * 3.0
    return TorsionForms(
        phi=phi, psi=psi, metric=g, dphi=dphi, dpsi=dpsi, tau0=tau0, tau1=tau1, tau2=tau2, tau3=tau3
    )


def j_map(tau: Multivector, phi: Multivector, g: InnerProduct) -> np.ndarray:
    """ȷ(τ)_ij = ⋆((e_i ⌟ φ) ∧ (e_j ⌟ φ) ∧ τ) for a 3-form τ."""
    inner = [contract(np.eye(DIM)[i], phi) for i in range(DIM)]
    out = np.zeros((DIM, DIM))
    for i in range(DIM):
        for j in range(i, DIM):
            out[i, j] = out[j, i] = _star_scalar(wedge(wedge(inner[i], inner[j]), tau), g)
    return out


def i_map(beta: np.ndarray, phi: Multivector, g: InnerProduct) -> Multivector:
    """ı(β) = β_ij g^{jl} e^i ∧ (e_l ⌟ φ); ȷ(ı(β)) = 4β on trace-free β."""
    raised = np.asarray(beta, dtype=float) @ g.gram_inv
    out = Multivector.zero(3)
    for i in range(DIM):
        vector = raised[i]
        if np.any(vector):
            out = out + wedge(coframe(i + 1), contract(vector, phi))
    return out


def two_form_matrix(beta: Multivector) -> np.ndarray:
    """Components β(e_i, e_j) of a 2-form."""
    out = np.zeros((DIM, DIM))
    for (i, j), value in zip(index_tuples(2), beta.coeffs):
        out[i - 1, j - 1] = value
        out[j - 1, i - 1] = -value
    return out


def tensor_norm_sq(tensor: np.ndarray, g: InnerProduct) -> float:
    """Σ g^{ik} g^{jl} T_ij T_kl."""
    return float(np.trace(g.gram_inv @ tensor @ g.gram_inv @ tensor.T))


def assemble_full(
    tau0: float, tau1: Multivector, tau2: Multivector, tau27: np.ndarray, psi: Multivector, g: InnerProduct
) -> np.ndarray:
    skew = two_form_matrix(hodge_star(wedge(tau1, psi), g)) + 0.5 * two_form_matrix(tau2)
    return 0.25 * tau0 * g.gram - skew - tau27


def full_torsion(forms: TorsionForms) -> TorsionData:
    """Full torsion tensor and its norm from the torsion forms."""
    g = forms.metric
    tau27 = 0.25 * j_map(forms.tau3, forms.phi, g)
    full = assemble_full(forms.tau0, forms.tau1, forms.tau2, tau27, forms.psi, g)
    return TorsionData(
        tau0=forms.tau0,
        tau1=forms.tau1,
        tau2=forms.tau2,
        tau27=tau27,
        full=full,
        norm_sq=tensor_norm_sq(full, g),
        tau3=forms.tau3,
    )


def torsion(params: AnyParams) -> TorsionData:
    """First-principles torsion of any parametrized structure."""
    return full_torsion(torsion_forms(phi_from_params(params)))


def norm_decomposition(data: TorsionData, g: InnerProduct) -> float:
    """(7/16) τ0^2 + |τ27|^2 + 6 |τ1|^2 + |τ2|^2/2, which equals |T|^2."""
    return (
        7.0 / 16.0 * data.tau0**2
        + tensor_norm_sq(data.tau27, g)
        + 6.0 * norm_sq(data.tau1, g)
        + 0.5 * norm_sq(data.tau2, g)
    )


def regimes(data: TorsionData, atol: float = 1e-9) -> dict[str, bool]:
    """Which torsion classes a structure belongs to."""
    no_tau1 = data.tau1.max_abs() <= atol
    no_tau2 = data.tau2.max_abs() <= atol
    no_tau27 = float(np.max(np.abs(data.tau27))) <= atol
    return {
        "coclosed": no_tau1 and no_tau2,
        "nearly_parallel": no_tau1 and no_tau2 and no_tau27 and abs(data.tau0) > atol,
        "tau2_free": no_tau2,
    }


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def tau0_closed(params: AnyParams) -> float:
    """τ0 of Φ(a, D) in closed form.

    τ0 = -4/(7 vol) [a^3 (E11 - E22 + E33) + |E|^2 + 2 (C11 - C22 + C33)]
    with E = D^{-1}, C its cofactor matrix and vol = a det(E)^{2/3}.
    """
    p = params.to_g2params()
    E = p.coefficient_matrix
    cof = np.array([np.cross(E[1], E[2]), np.cross(E[2], E[0]), np.cross(E[0], E[1])])
    vol = p.a * np.linalg.det(E) ** (2.0 / 3.0)
    signed_trace = E[0, 0] - E[1, 1] + E[2, 2]
    signed_cof = cof[0, 0] - cof[1, 1] + cof[2, 2]
    return float(-4.0 / (7.0 * vol) * (p.a**3 * signed_trace + np.sum(E**2) + 2.0 * signed_cof))


def ansatz_norm_sq(r: float, h2: float) -> float:
    """|T|^2 = (4r^6 - 14r^3 + 19 + 8(r^3 + 2)(r^3 - 1) h2^2) / r^2."""
    r3 = r**3
    return (4 * r3**2 - 14 * r3 + 19 + 8 * (r3 + 2) * (r3 - 1) * h2**2) / r**2


def energy_levels(r: float) -> dict[str, float]:
    """|T|^2 on the equatorial (RP2) and polar (NS) critical sets of the Ansatz."""
    return {"RP2": ansatz_norm_sq(r, 0.0), "NS": ansatz_norm_sq(r, 1.0)}


def _ansatz_tau27(r: float, h: np.ndarray) -> np.ndarray:
    h0, h1, h2, h3 = h
    r3 = r**3
    p = [7 * (r3 - 2) * h[k] ** 2 + (9 * r3 - 10) * h2**2 - 4 * (r3 - 2) for k in range(4)]
    off = 7 * r3 * (r3 - 2)
    block = np.zeros((DIM, DIM))
    block[:3, :3] = [
        [r3 * p[3], off * h0 * h3, -off * h1 * h3],
        [off * h0 * h3, r3 * p[0], -off * h0 * h1],
        [-off * h1 * h3, -off * h0 * h1, r3 * p[1]],
    ]
    block[3:, 3:] = (1.25 * (r3 - 2) - (5 * r3 - 4) * h2**2) * np.eye(4)
    return 2.0 / (7.0 * r**2) * block


def closed_form_ansatz(params: AnsatzParams) -> TorsionData:
    """Printed closed forms for the Ansatz family Φ(r, Υ(h̄))."""
    r = params.r
    h0, h1, h2, h3 = params.quaternion
    r3 = r**3

    tau0 = -4.0 / (7.0 * r) * (r3 * (1 - 4 * h2**2) + 5 - 8 * h2**2)
    tau1 = Multivector(1, np.array([h3, h0, -h1, 0, 0, 0, 0]) * (-2.0 * (r3 + 2) * h2 / 3.0))
    w1, w2, w3 = OMEGAS
    e12, e13, e23 = Multivector.basis(1, 2), Multivector.basis(1, 3), Multivector.basis(2, 3)
    tau2 = (
        (e12 * (2 * r) + w3 / r**2) * h1 + (e13 * (2 * r) + w2 / r**2) * h0 - (e23 * (2 * r) + w1 / r**2) * h3
    ) * (-8.0 * (r3 - 1) * h2 / 3.0)
    tau27 = _ansatz_tau27(r, params.quaternion)

    phi = phi_from_params(params)
    g = metric_from_params(params)
    full = assemble_full(tau0, tau1, tau2, tau27, psi_from_phi(phi, g), g)
    return TorsionData(
        tau0=tau0, tau1=tau1, tau2=tau2, tau27=tau27, full=full, norm_sq=ansatz_norm_sq(r, h2)
    )


def _general_tau1(r: np.ndarray, h: np.ndarray) -> Multivector:
    r1, r2, r3 = r
    h0, h1, h2, h3 = h
    c1 = -(r1**3) / (3 * r2**3 * r3**3) * (
        (r1 * r2**4 * r3**7 + r1 * r2**7 * r3**4 + 2 * r2**3 + 2 * r3**3) * h2 * h3
        + (r1 * r2**4 * r3**7 - r1 * r2**7 * r3**4 + 2 * r2**3 - 2 * r3**3) * h0 * h1
    )
    c2 = -(r2**3) / (3 * r1**3 * r3**3) * (
        (r1**4 * r2 * r3**7 + r1**7 * r2 * r3**4 + 2 * r1**3 + 2 * r3**3) * h0 * h2
        - (r1**4 * r2 * r3**7 - r1**7 * r2 * r3**4 + 2 * r1**3 - 2 * r3**3) * h1 * h3
    )
    c3 = r3**3 / (3 * r1**3 * r2**3) * (
        (r1**7 * r2**4 * r3 + r1**4 * r2**7 * r3 + 2 * r1**3 + 2 * r2**3) * h1 * h2
        - (r1**7 * r2**4 * r3 - r1**4 * r2**7 * r3 - 2 * r1**3 + 2 * r2**3) * h0 * h3
    )
    return Multivector(1, np.array([c1, c2, c3, 0, 0, 0, 0]))


def _general_tau2(r: np.ndarray, h: np.ndarray) -> Multivector:
    r1, r2, r3 = r
    h0, h1, h2, h3 = h
    w1, w2, w3 = OMEGAS
    e12, e13, e23 = Multivector.basis(1, 2), Multivector.basis(1, 3), Multivector.basis(2, 3)
    k3 = 1.0 / (r1**4 * r2**4 * r3)
    k2 = 1.0 / (r1**4 * r2 * r3**4)
    k1 = 1.0 / (r1 * r2**4 * r3**4)
    total = (
        (e12 * 2 + w3 * k3) * ((r1**7 * r2**4 * r3 + r1**4 * r2**7 * r3 - r1**3 - r2**3) * h1 * h2)
        - (e12 * 2 - w3 * k3) * ((r1**7 * r2**4 * r3 - r1**4 * r2**7 * r3 + r1**3 - r2**3) * h0 * h3)
        + (e13 * 2 + w2 * k2) * ((r1**4 * r2 * r3**7 + r1**7 * r2 * r3**4 - r1**3 - r3**3) * h0 * h2)
        - (e13 * 2 - w2 * k2) * ((r1**4 * r2 * r3**7 - r1**7 * r2 * r3**4 - r1**3 + r3**3) * h1 * h3)
        - (e23 * 2 + w1 * k1) * ((r1 * r2**7 * r3**4 + r1 * r2**4 * r3**7 - r2**3 - r3**3) * h2 * h3)
        + (e23 * 2 - w1 * k1) * ((r1 * r2**7 * r3**4 - r1 * r2**4 * r3**7 + r2**3 - r3**3) * h0 * h1)
    )
    return total * (-4.0 / 3.0)


def _general_tau27(r: np.ndarray, h: np.ndarray) -> np.ndarray:
    r1, r2, r3 = r
    h0, h1, h2, h3 = h
    t = np.zeros((DIM, DIM))
    t[0, 1] = (r1**4 * r2**7 * r3 + r1**7 * r2**4 * r3 - 2 * r1**3 - 2 * r2**3) * h0 * h3 + (
        r1**4 * r2**7 * r3 - r1**7 * r2**4 * r3 - 2 * r1**3 + 2 * r2**3
    ) * h1 * h2
    t[0, 2] = -(r1**4 * r2 * r3**7 + r1**7 * r2 * r3**4 - 2 * r1**3 - 2 * r3**3) * h1 * h3 + (
        r1**4 * r2 * r3**7 - r1**7 * r2 * r3**4 - 2 * r1**3 + 2 * r3**3
    ) * h0 * h2
    t[1, 2] = -(r1 * r2**7 * r3**4 + r1 * r2**4 * r3**7 - 2 * r2**3 - 2 * r3**3) * h0 * h1 + (
        r1 * r2**7 * r3**4 - r1 * r2**4 * r3**7 + 2 * r2**3 - 2 * r3**3
    ) * h2 * h3
    t[1, 0], t[2, 0], t[2, 1] = t[0, 1], t[0, 2], t[1, 2]

    t[0, 0] = -2 * r1**3 / (7 * r2**3 * r3**3) * (
        r2**3 * (r1**4 * r2 * r3**7 + 8 * r1**7 * r2 * r3**4 + 2 * r1**3 - 12 * r3**3) * h0**2
        + r3**3 * (r1**4 * r2**7 * r3 + 8 * r1**7 * r2**4 * r3 + 2 * r1**3 - 12 * r2**3) * h1**2
        + r1**3 * (r1 * r2**4 * r3**7 + r1 * r2**7 * r3**4 + 2 * r2**3 + 2 * r3**3) * h3**2
        - r1 * r2**4 * r3**4 / 2 * (r1**3 * r2**3 + r1**3 * r3**3 + 8 * r1**6)
        + 4 * r1**6 - 3 * r2**6 - 3 * r3**6 - r1**3 * r2**3 - r1**3 * r3**3 + 6 * r2**3 * r3**3
    )
    t[1, 1] = -2 * r2**3 / (7 * r1**3 * r3**3) * (
        r2**3 * (r1**4 * r2 * r3**7 + r1**7 * r2 * r3**4 + 2 * r1**3 + 2 * r3**3) * h0**2
        + r3**3 * (r1**7 * r2**4 * r3 + 8 * r1**4 * r2**7 * r3 - 12 * r1**3 + 2 * r2**3) * h1**2
        + r1**3 * (r1 * r2**4 * r3**7 + 8 * r1 * r2**7 * r3**4 + 2 * r2**3 - 12 * r3**3) * h3**2
        - r1**4 * r2 * r3**4 / 2 * (r1**3 * r2**3 + r2**3 * r3**3 + 8 * r2**6)
        + 4 * r2**6 - 3 * r1**6 - 3 * r3**6 - r1**3 * r2**3 - r2**3 * r3**3 + 6 * r1**3 * r3**3
    )
    t[2, 2] = -2 * r3**3 / (7 * r1**3 * r2**3) * (
        r2**3 * (r1**7 * r2 * r3**4 + 8 * r1**4 * r2 * r3**7 - 12 * r1**3 + 2 * r3**3) * h0**2
        + r3**3 * (r1**7 * r2**4 * r3 + r1**4 * r2**7 * r3 + 2 * r1**3 + 2 * r2**3) * h1**2
        + r1**3 * (8 * r1 * r2**4 * r3**7 + r1 * r2**7 * r3**4 - 12 * r2**3 + 2 * r3**3) * h3**2
        - r1**4 * r2**4 * r3 / 2 * (r1**3 * r3**3 + r2**3 * r3**3 + 8 * r3**6)
        + 4 * r3**6 - 3 * r1**6 - 3 * r2**6 - r1**3 * r3**3 - r2**3 * r3**3 + 6 * r1**3 * r2**3
    )
    # p4 block from trace-freeness against diag(r_k^6, (r1 r2 r3)^{-1})
    upper = sum(t[k, k] / r[k] ** 6 for k in range(3))
    t[3:, 3:] = -upper / (4.0 * r1 * r2 * r3) * np.eye(4)
    return t


def closed_form_general(params: GeneralParams) -> TorsionData:
    """Closed forms for the family (r1, r2, r3, h), evaluated in the general convention."""
    if not isinstance(params, GeneralParams):
        raise UnsupportedCaseError("closed_form_general needs GeneralParams")
    r = params.general_radii()
    h = params.quaternion
    tau0 = tau0_closed(params)
    tau1 = _general_tau1(r, h)
    tau2 = _general_tau2(r, h)
    tau27 = _general_tau27(r, h)

    phi = phi_from_params(params)
    g = metric_from_params(params)
    full = assemble_full(tau0, tau1, tau2, tau27, psi_from_phi(phi, g), g)
    return TorsionData(
        tau0=tau0, tau1=tau1, tau2=tau2, tau27=tau27, full=full, norm_sq=tensor_norm_sq(full, g)
    )


# ---------------------------------------------------------------------------
# ρ coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RhoCoefficients:
    """|T|^2(h) = ρ0 h0^2 + ρ1 h1^2 + ρ3 h3^2 + ϱ on the family (r1, r2, r3)."""

    rho0: float
    rho1: float
    rho3: float
    varrho: float

    @property
    def quadratic_form(self) -> np.ndarray:
        """diag(ρ0, ρ1, 0, ρ3) in the order (h0, h1, h2, h3)."""
        return np.diag([self.rho0, self.rho1, 0.0, self.rho3])

    def energy(self, h: np.ndarray) -> float:
        h = np.asarray(h, dtype=float)
        return float(h @ self.quadratic_form @ h + self.varrho)


def rho_f(x: float, y: float, z: float) -> float:
    """f(x, y, z) = 4(x^3 + z^3)(x^4 y z^4 + 2)(x^6 + y^6 + z^6 - 2x^3 z^3 - x^4 y^7 z^4) / (x^6 y^3 z^6)."""
    return (
        4.0
        * (x**3 + z**3)
        * (x**4 * y * z**4 + 2.0)
        * (x**6 + y**6 + z**6 - 2.0 * x**3 * z**3 - x**4 * y**7 * z**4)
        / (x**6 * y**3 * z**6)
    )


def rho_values(r1: float, r2: float, r3: float) -> tuple[float, float, float]:
    """(ρ0, ρ1, ρ3) = (f(r1, r2, r3), f(r2, r3, r1), f(r3, r1, r2)), general convention.

    Takes the raw radii. Tabulated values such as those at (2, 2, 1/4) are in
    the reduced variables R = r^3; use reduced_rho for them, with
    rho_values(∛R) = 4 reduced_rho(R).
    """
    return rho_f(r1, r2, r3), rho_f(r2, r3, r1), rho_f(r3, r1, r2)


def rho_coefficients(r1: float, r2: float, r3: float) -> RhoCoefficients:
    """ρ coefficients from f and ϱ as the first-principles |T|^2 at h = j."""
    base = GeneralParams.create(r1=r1, r2=r2, r3=r3, h=(0.0, 0.0, 1.0, 0.0), convention="general")
    rho0, rho1, rho3 = rho_values(r1, r2, r3)
    return RhoCoefficients(rho0=rho0, rho1=rho1, rho3=rho3, varrho=torsion(base).norm_sq)


def fit_rho(params: GeneralParams) -> RhoCoefficients:
    """Measure the ρ coefficients from first-principles |T|^2 at h = 1, i, j, k."""
    values = [torsion(params.with_h(np.eye(4)[k])).norm_sq for k in range(4)]
    varrho = values[2]
    return RhoCoefficients(
        rho0=values[0] - varrho, rho1=values[1] - varrho, rho3=values[3] - varrho, varrho=varrho
    )


def reduced_rho(R1: float, R2: float, R3: float) -> tuple[float, float, float]:
    """Unit-volume ρ polynomials in R_k = r_k^3 (R1 R2 R3 = 1); equal to rho_values(∛R)/4."""
    rho0 = (
        2 * R3**3 * R2 + 2 * R3 * R2**3 + 2 * R1**3 * R2 + 2 * R1 * R2**3 + R3**3
        - R3**2 * R1 - R3 * R1**2 - R3 * R2**2 + R1**3 - R1 * R2**2
        - R3 * R2 - R1 * R2 - 2 * R3 - 2 * R1
    )
    rho1 = (
        2 * R3**3 * R1 + 2 * R3**3 * R2 + 2 * R3 * R1**3 + 2 * R3 * R2**3
        - R3**2 * R1 - R3**2 * R2 + R1**3 - R1**2 * R2 - R1 * R2**2 + R2**3
        - R3 * R1 - R3 * R2 - 2 * R1 - 2 * R2
    )
    rho3 = (
        2 * R3**3 * R1 + 2 * R3 * R1**3 + 2 * R1**3 * R2 + 2 * R1 * R2**3 + R3**3
        - R3**2 * R2 - R3 * R1**2 - R3 * R2**2 - R1**2 * R2 + R2**3
        - R3 * R1 - R1 * R2 - 2 * R3 - 2 * R2
    )
    return rho0, rho1, rho3

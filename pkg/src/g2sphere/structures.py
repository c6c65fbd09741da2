"""Invariant G2-structures: the Φ map, induced metric and isometry utilities."""

import logging
from dataclasses import dataclass

import numpy as np

from g2sphere.algebra import (
    DIM,
    E123,
    OMEGAS,
    InnerProduct,
    Multivector,
    coframe,
    contract,
    flat,
    hodge_star,
    wedge,
)
from g2sphere.exceptions import DefinitenessError, OrientationError, ParameterDomainError
from g2sphere.params import AnsatzParams, AnyParams, G2Params, GeneralParams
from g2sphere.quaternion import canonical_sign, from_rotation, upsilon

logger = logging.getLogger(__name__)

PHI0 = E123 + sum((wedge(coframe(i + 1), OMEGAS[i]) for i in range(3)), Multivector.zero(3))


def phi_from_coefficients(a: float, E: np.ndarray) -> Multivector:
    """φ = a^3 e^{123} + Σ_ij E_ij e^j ∧ ω_i."""
    phi = E123 * a**3
    for i in range(3):
        for j in range(3):
            if E[i, j] != 0.0:
                phi = phi + wedge(coframe(j + 1), OMEGAS[i]) * float(E[i, j])
    return phi


def phi_from_params(params: AnyParams) -> Multivector:
    """The invariant 3-form Φ(a, D) = (D(a)^{-1})^* φ0 of any parametrization."""
    p = params.to_g2params()
    return phi_from_coefficients(p.a, p.coefficient_matrix)


def pullback_matrix(params: G2Params) -> np.ndarray:
    """Linear map M of p with M^* φ0 = Φ(a, D), block diag(s E, t I4)."""
    E = params.coefficient_matrix
    det_e = float(np.linalg.det(E))
    s = params.a / np.cbrt(det_e)
    t = det_e ** (1.0 / 6.0) / np.sqrt(params.a)
    m = np.zeros((DIM, DIM))
    m[:3, :3] = s * E
    m[3:, 3:] = t * np.eye(4)
    return m


def induced_bilinear(phi: Multivector) -> np.ndarray:
    """B_ij = coefficient of e^{1..7} in (e_i ⌟ φ) ∧ (e_j ⌟ φ) ∧ φ."""
    inner = [contract(np.eye(DIM)[i], phi) for i in range(DIM)]
    b = np.zeros((DIM, DIM))
    for i in range(DIM):
        for j in range(i, DIM):
            b[i, j] = b[j, i] = wedge(wedge(inner[i], inner[j]), phi).value()
    return b


def metric_from_phi(phi: Multivector) -> InnerProduct:
    """Metric g_φ = B / (6^{2/9} det(B)^{1/9}) with vol = 6^{-7/9} det(B)^{1/9}.

    Raises:
        OrientationError: If B is negative definite
        DefinitenessError: If B is indefinite or degenerate
    """
    b = induced_bilinear(phi)
    eigenvalues = np.linalg.eigvalsh(b)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    if np.all(eigenvalues < -1e-14 * scale):
        raise OrientationError("Induced bilinear form is negative definite")
    if not np.all(eigenvalues > 1e-14 * scale):
        raise DefinitenessError(
            f"Induced bilinear form is not definite (eigenvalues {np.round(eigenvalues, 6).tolist()})"
        )
    det_b = float(np.prod(eigenvalues))
    return InnerProduct(b / (6 ** (2 / 9) * det_b ** (1 / 9)))


def metric_from_params(params: AnyParams) -> InnerProduct:
    """Metric of Φ(a, D) in closed form, block diag(s^2 E^t E, t^2 I4)."""
    m = pullback_matrix(params.to_g2params())
    return InnerProduct(m.T @ m)


def psi_from_phi(phi: Multivector, g: InnerProduct | None = None) -> Multivector:
    """The dual 4-form ψ = ⋆φ."""
    return hodge_star(phi, g if g is not None else metric_from_phi(phi))


def bryant_vector(params: GeneralParams) -> tuple[float, np.ndarray]:
    """(f, X) with bryant_form(base, f, X) equal to the structure at (r, h).

    In the intro convention X = -(r1^3 h1 e1 + r2^3 h2 e2 + r3^3 h3 e3); in the
    general convention the radii enter as r_k^{-3}.
    """
    h = params.quaternion
    weights = params.general_radii() ** -3
    x = np.zeros(DIM)
    x[:3] = -weights * h[1:]
    return float(h[0]), x


def bryant_form(base: GeneralParams, f: float, x: np.ndarray, atol: float = 1e-10) -> Multivector:
    """(f^2 - |X|^2) φ - 2 f (X ⌟ ψ) + 2 X^♭ ∧ (X ⌟ φ) for the base at h = 1.

    Raises:
        ParameterDomainError: If X leaves p1+p2+p3 or f^2 + |X|^2 != 1
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (DIM,) or np.any(np.abs(x[3:]) > atol):
        raise ParameterDomainError("X must lie in p1+p2+p3")
    phi = phi_from_params(base.with_h((1.0, 0.0, 0.0, 0.0)))
    g = metric_from_phi(phi)
    psi = psi_from_phi(phi, g)
    x_sq = float(x @ g.gram @ x)
    if abs(f**2 + x_sq - 1.0) > atol:
        raise ParameterDomainError(f"f^2 + |X|^2 must be 1, got {f**2 + x_sq:.12g}")
    return phi * (f**2 - x_sq) - contract(x, psi) * (2 * f) + wedge(flat(x, g), contract(x, phi)) * 2.0


@dataclass(frozen=True)
class BlockDecomposition:
    """a = (r1 r2 r3)^{-1/3}, D = [(r4^2/(r1 r2 r3))^{1/3} Υ(v) diag(r1, r2, r3)] Υ(h)."""

    r1: float
    r2: float
    r3: float
    r4: float
    v: np.ndarray
    h: np.ndarray

    def to_g2params(self) -> G2Params:
        product = self.r1 * self.r2 * self.r3
        scale = np.cbrt(self.r4**2 / product)
        D = scale * upsilon(self.v) @ np.diag([self.r1, self.r2, self.r3]) @ upsilon(self.h)
        return G2Params.of(product ** (-1.0 / 3.0), D)


def _oriented_eigenvectors(sym: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values, vectors = np.linalg.eigh(sym)
    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]
    if np.allclose(values, values[0], rtol=1e-12, atol=0.0):
        return values, np.eye(3)
    for k in range(3):
        vectors[:, k] = canonical_sign(vectors[:, k])
    if np.linalg.det(vectors) < 0:
        vectors[:, 2] = -vectors[:, 2]
    return values, vectors


def block_decomposition(params: AnyParams) -> BlockDecomposition:
    """Factor (a, D) into radii r1 >= r2 >= r3, r4 and rotations Υ(v), Υ(h)."""
    p = params.to_g2params()
    D = p.matrix
    det_d = float(np.linalg.det(D))
    lam = np.cbrt(det_d * p.a**3)
    squares, w = _oriented_eigenvectors(D.T @ D)
    sigma = np.sqrt(squares)
    rot_v = D @ w @ np.diag(1.0 / sigma)
    r1, r2, r3 = sigma / lam
    return BlockDecomposition(
        r1=float(r1),
        r2=float(r2),
        r3=float(r3),
        r4=float(np.sqrt(det_d)),
        v=from_rotation(rot_v),
        h=from_rotation(w.T),
    )


def isometric_check(p: AnyParams, q: AnyParams, atol: float = 1e-9) -> tuple[bool, np.ndarray | None]:
    """Whether two structures induce the same metric; witness A = D^{-1} D̃ in SO(3)."""
    left, right = p.to_g2params(), q.to_g2params()
    if abs(left.a - right.a) > atol * max(1.0, left.a):
        return False, None
    witness = np.linalg.solve(left.matrix, right.matrix)
    orthogonal = np.allclose(witness @ witness.T, np.eye(3), rtol=0.0, atol=atol)
    if orthogonal and np.linalg.det(witness) > 0:
        return True, witness
    return False, None


def rescale(params: AnyParams, lam: float) -> G2Params:
    """Parameters of λφ: (λ^{1/3} a, D/λ); the metric scales by λ^{2/3}."""
    p = params.to_g2params()
    return G2Params.of(np.cbrt(lam) * p.a, p.matrix / lam)


def normalize_homothety(params: AnyParams) -> tuple[G2Params, float]:
    """Rescale to det D = 1; returns the parameters and the metric factor r4^{4/9}."""
    r4 = float(np.sqrt(np.linalg.det(params.to_g2params().matrix)))
    lam = r4 ** (2.0 / 3.0)
    return rescale(params, lam), r4 ** (4.0 / 9.0)


def ansatz_metric(r: float) -> np.ndarray:
    return np.diag([r**2] * 3 + [1.0 / r] * 4)


def general_metric(r1: float, r2: float, r3: float) -> np.ndarray:
    """Gram matrix of the general convention, diag(r_k^6, (r1 r2 r3)^{-1} I4)."""
    return np.diag([r1**6, r2**6, r3**6] + [1.0 / (r1 * r2 * r3)] * 4)


def is_ansatz(params: AnyParams) -> bool:
    return isinstance(params, AnsatzParams) or (isinstance(params, GeneralParams) and params.is_ansatz())

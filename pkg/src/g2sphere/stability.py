"""Second variation of the reduced energy and critical-point classification.

On an isometric class with fixed radii the reduced energy is the quadratic form
E(h) = h^t A h + ϱ with A = diag(ρ0, ρ1, 0, ρ3). Variations are m = h k(t, s)
with k(0, 0) = 1 and ∂k = ½ Σ s_k V_k (i, j, k)_k, so at a critical point
(A h = μ h) the Hessian in a g-orthonormal frame of p1+p2+p3 is

    H = ½ Σ R_h^t (A - μ) R_h Σ,   Σ = diag(s_k / sqrt(g_kk)),

where R_h is right multiplication by h restricted to imaginary quaternions.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from scipy.optimize import brentq

from g2sphere.config import DEFAULT_SETTINGS, Settings
from g2sphere.connection import div_full_torsion
from g2sphere.exceptions import NotCriticalError, UnsupportedCaseError
from g2sphere.params import AnsatzParams, AnyParams, GeneralParams, dump_params
from g2sphere.quaternion import imaginary, multiply
from g2sphere.structures import metric_from_params
from g2sphere.torsion import RhoCoefficients, rho_coefficients, rho_values, torsion

logger = logging.getLogger(__name__)

StabilityLabel = Literal["stable-min", "unstable", "degenerate-flat"]

# Branches of r1 scanned for special radii, and the scan step
SPECIAL_RADII_BRANCHES = ((-2.0, -0.1), (0.1, 2.0))
SPECIAL_RADII_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class StabilityReport:
    """Reduced Hessian at a critical point, in a g-orthonormal frame of p1+p2+p3."""

    hessian: np.ndarray
    eigenvalues: np.ndarray
    index: int
    nullity: int
    label: StabilityLabel
    critical_class: str = ""

    @classmethod
    def from_hessian(
        cls, hessian: np.ndarray, settings: Settings = DEFAULT_SETTINGS, critical_class: str = ""
    ) -> "StabilityReport":
        sym = 0.5 * (hessian + hessian.T)
        eigenvalues = np.sort(np.linalg.eigvalsh(sym))
        tol = settings.zero_eigen_rel * max(1.0, float(np.linalg.norm(sym, 2)))
        index = int(np.sum(eigenvalues < -tol))
        nullity = int(np.sum(np.abs(eigenvalues) <= tol))
        if index > 0:
            label: StabilityLabel = "unstable"
        elif nullity == 3:
            label = "degenerate-flat"
        else:
            label = "stable-min"
        return cls(
            hessian=sym, eigenvalues=eigenvalues, index=index, nullity=nullity, label=label,
            critical_class=critical_class,
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "index": self.index,
            "nullity": self.nullity,
            "label": self.label,
            "class": self.critical_class,
        }


@dataclass(frozen=True, eq=False)
class CriticalClass:
    """Critical set containing (r, h), or "non-critical"."""

    label: str
    params: AnyParams
    div_norm: float
    pole: str | None = None
    rho: RhoCoefficients | None = None
    support: tuple[int, ...] = field(default_factory=tuple)

    @property
    def critical(self) -> bool:
        return self.label != "non-critical"

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "class": self.label,
            "pole": self.pole,
            "div_norm": self.div_norm,
            "params": dump_params(self.params),
        }
        if self.rho is not None:
            out["rho"] = [self.rho.rho0, self.rho.rho1, self.rho.rho3]
        return out


def _general(params: AnyParams) -> GeneralParams:
    if isinstance(params, AnsatzParams):
        return params.to_general()
    if isinstance(params, GeneralParams):
        return params.to_convention("general")
    raise UnsupportedCaseError("Stability needs Ansatz or general parameters")


def _right_multiplication(h: np.ndarray) -> np.ndarray:
    """4x3 matrix of u -> h u on imaginary quaternions."""
    return np.column_stack([multiply(h, imaginary(np.eye(3)[k])) for k in range(3)])


def _frame_scales(params: GeneralParams) -> np.ndarray:
    """s_k / sqrt(g_kk): ∂k per unit g-length of V along e_k."""
    gram = metric_from_params(params).gram
    return params.variation_scales() / np.sqrt(np.diag(gram)[:3])


def _div_tolerance(norm_sq: float, settings: Settings) -> float:
    return settings.tolerance * max(1.0, np.sqrt(norm_sq))


def _require_critical(params: AnyParams, settings: Settings) -> float:
    div = div_full_torsion(params)
    norm = div.norm
    if norm > _div_tolerance(div.torsion.norm_sq, settings):
        raise NotCriticalError(f"Not a critical point: |div T| = {norm:.3e}", div_norm=norm)
    return norm


def j_matrix(h: np.ndarray) -> np.ndarray:
    """Equatorial Hessian operator w w^t with w = (h3, h0, -h1)."""
    h0, h1, _, h3 = h
    w = np.array([h3, h0, -h1])
    return np.outer(w, w)


def quadratic_hessian(params: GeneralParams, rho: RhoCoefficients) -> np.ndarray:
    """½ Σ R_h^t (A - μ) R_h Σ for E = h^t A h + ϱ."""
    h = params.quaternion
    A = rho.quadratic_form
    mu = float(h @ A @ h)
    R = _right_multiplication(h)
    scales = np.diag(_frame_scales(params))
    return 0.5 * scales @ R.T @ (A - mu * np.eye(4)) @ R @ scales


def _ansatz_closed(r: float, h: np.ndarray, atol: float) -> np.ndarray:
    kappa = 4.0 * (r**3 + 2) * (r**3 - 1) / r**2
    if abs(r - 1.0) <= atol:
        return np.zeros((3, 3))
    if abs(1.0 - h[2] ** 2) <= atol:
        return -kappa * np.eye(3)
    if abs(h[2]) <= atol:
        return kappa * j_matrix(h)
    raise NotCriticalError(f"(r={r:.6g}, h2={h[2]:.6g}) is not an Ansatz critical point")


def hessian_closed(params: AnyParams, settings: Settings = DEFAULT_SETTINGS) -> StabilityReport:
    """Reduced Hessian from the closed-form energy.

    Raises:
        NotCriticalError: If |div T| exceeds the tolerance
        UnsupportedCaseError: For bare (a, D) parameters
    """
    general = _general(params)
    _require_critical(general, settings)
    cls = classify_critical(general, settings)
    if general.is_ansatz():
        r = float(general.radii[0] ** 3)
        hessian = _ansatz_closed(r, general.quaternion, 1e-9)
    else:
        hessian = quadratic_hessian(general, rho_coefficients(*general.radii))
    return StabilityReport.from_hessian(hessian, settings, critical_class=cls.label)


def _energy_along(params: GeneralParams, a: np.ndarray, b: np.ndarray, t: float, s: float) -> float:
    k = np.array([1.0, 0.0, 0.0, 0.0]) + t * a + s * b
    k /= np.linalg.norm(k)
    return torsion(params.with_h(multiply(params.quaternion, k))).norm_sq


def _mixed_difference(params: GeneralParams, a: np.ndarray, b: np.ndarray, step: float) -> float:
    def f(t: float, s: float) -> float:
        return _energy_along(params, a, b, t, s)

    return (f(step, step) - f(step, -step) - f(-step, step) + f(-step, -step)) / (4 * step**2)


def hessian_numeric(params: AnyParams, settings: Settings = DEFAULT_SETTINGS) -> StabilityReport:
    """Reduced Hessian from central differences of the first-principles |T|^2.

    Variations are k(t, s) = (1 + t a + s b)/|1 + t a + s b|, so that
    ∂²k0/∂t∂s = -a·b, with one Richardson step on the difference quotient.

    Raises:
        NotCriticalError: If |div T| exceeds the tolerance
    """
    general = _general(params)
    _require_critical(general, settings)
    scales = _frame_scales(general)
    directions = [0.5 * imaginary(scales[k] * np.eye(3)[k]) for k in range(3)]
    step = settings.fd_step
    hessian = np.zeros((3, 3))
    for i in range(3):
        for j in range(i, 3):
            coarse = _mixed_difference(general, directions[i], directions[j], step)
            fine = _mixed_difference(general, directions[i], directions[j], step / 2)
            hessian[i, j] = hessian[j, i] = (4 * fine - coarse) / 3
    cls = classify_critical(general, settings)
    return StabilityReport.from_hessian(hessian, settings, critical_class=cls.label)


def _eigen_groups(rho: RhoCoefficients, atol: float) -> list[tuple[int, ...]]:
    """Indices of (h0, h1, h2, h3) grouped by equal diagonal entries of A."""
    values = [rho.rho0, rho.rho1, 0.0, rho.rho3]
    groups: list[list[int]] = []
    for k, value in enumerate(values):
        for group in groups:
            if abs(values[group[0]] - value) <= atol:
                group.append(k)
                break
        else:
            groups.append([k])
    return [tuple(g) for g in groups]


def _group_label(support: tuple[int, ...]) -> str:
    names = {1: "NS", 2: "S1", 3: "S2"}
    if len(support) == 4:
        return "RP3-all"
    return f"{names[len(support)]}_{''.join(map(str, support))}"


def _pole(h: np.ndarray, atol: float) -> str | None:
    for k in range(4):
        if abs(1.0 - abs(h[k])) <= atol:
            return f"NS_{k}"
    return None


def _ansatz_label(general: GeneralParams, atol: float) -> str:
    r = float(general.radii[0] ** 3)
    h2 = general.quaternion[2]
    if abs(r - 1.0) <= atol:
        return "Ansatz-r1-all"
    if abs(h2) <= atol:
        return "Ansatz-equator"
    if abs(1.0 - h2**2) <= atol:
        return "Ansatz-poles"
    return "non-critical"


def classify_critical(params: AnyParams, settings: Settings = DEFAULT_SETTINGS) -> CriticalClass:
    """Critical set of (r, h), from the ρ coefficients and checked against |div T|.

    h is critical exactly when it lies in an eigenspace of A = diag(ρ0, ρ1, 0, ρ3);
    the label names the eigenspace (NS_k, S1_kl, S2_klm or RP3-all). The
    eigenspaces are only searched when the h-conditions of critical_conditions
    hold. The first-principles |div T| decides when the two tests disagree.
    """
    general = _general(params)
    h = general.quaternion
    div = div_full_torsion(general)
    div_norm = div.norm
    div_critical = div_norm <= _div_tolerance(div.torsion.norm_sq, settings)
    pole = _pole(h, 1e-9)

    if general.is_ansatz():
        label = _ansatz_label(general, 1e-9)
        if (label != "non-critical") != div_critical:
            logger.warning("Ansatz label %s disagrees with |div T| = %.3e", label, div_norm)
            label = label if div_critical else "non-critical"
        return CriticalClass(label=label, params=params, div_norm=div_norm, pole=pole)

    rho = rho_coefficients(*general.radii)
    scale = max(1.0, abs(rho.rho0), abs(rho.rho1), abs(rho.rho3))
    residual = float(np.max(np.abs(critical_conditions(general)))) / scale
    logger.debug("h-condition residual %.3e", residual)
    label, support = "non-critical", ()
    for rel in (1e-9, 1e-6):
        if residual > rel:
            continue
        for group in _eigen_groups(rho, rel * scale):
            outside = [k for k in range(4) if k not in group]
            if np.all(np.abs(h[outside]) <= 1e-9):
                label, support = _group_label(group), group
                break
        if label != "non-critical" or not div_critical:
            break
    if label != "non-critical" and not div_critical:
        logger.warning("ρ conditions hold but |div T| = %.3e; reporting non-critical", div_norm)
        label, support = "non-critical", ()
    elif label == "non-critical" and div_critical:
        logger.warning("|div T| = %.3e vanishes outside the ρ critical sets", div_norm)
    return CriticalClass(label=label, params=params, div_norm=div_norm, pole=pole, rho=rho, support=support)


def critical_conditions(params: GeneralParams) -> np.ndarray:
    """Residuals of ρ0 h0 h2 = h1 h3 (ρ1 - ρ3) and its two cyclic companions."""
    h0, h1, h2, h3 = params.quaternion
    rho0, rho1, rho3 = rho_values(*params.to_convention("general").radii)
    return np.array([
        rho0 * h0 * h2 - h1 * h3 * (rho1 - rho3),
        rho1 * h1 * h2 - h3 * h0 * (rho3 - rho0),
        rho3 * h3 * h2 - h1 * h0 * (rho0 - rho1),
    ])


def _special_rho(x: float) -> tuple[float, float]:
    rho0, rho1, _ = rho_values(x, x, x**-8)
    return rho0, rho1


def find_special_radii(step: float = SPECIAL_RADII_STEP, xtol: float = 1e-12) -> list[tuple[float, float]]:
    """Real (r1, r3) with r1 = r2, r3 = r1^{-8} and ρ0 = ρ1 = 0.

    Scans r1 over both branches for sign changes of ρ0 and refines each with
    Brent's method; a root is kept when ρ1 also vanishes there.
    """
    roots: list[float] = []
    for lo, hi in SPECIAL_RADII_BRANCHES:
        grid = np.arange(lo, hi + step / 2, step)
        values = np.array([_special_rho(x)[0] for x in grid])
        found = 0
        for k in range(len(grid) - 1):
            a, b = values[k], values[k + 1]
            if a == 0.0:
                candidate = float(grid[k])
            elif a * b < 0:
                candidate = float(brentq(lambda x: _special_rho(x)[0], grid[k], grid[k + 1], xtol=xtol))
            else:
                continue
            rho0, rho1 = _special_rho(candidate)
            scale = max(1.0, abs(values[k]), abs(b))
            if abs(rho1) <= 1e-8 * scale and all(abs(candidate - r) > 1e-8 for r in roots):
                roots.append(candidate)
                found += 1
        if not found:
            logger.warning("No special radius bracketed on [%g, %g]", lo, hi)
    return [(r, r**-8) for r in sorted(roots)]


def _classify_task(payload: tuple[float, float, float, tuple[float, ...]]) -> str:
    r1, r2, r3, h = payload
    return classify_critical(GeneralParams.create(r1=r1, r2=r2, r3=r3, h=h)).label


def classify_many(points: list[GeneralParams], jobs: int = 1) -> list[str]:
    """Labels for many parameter points, optionally in worker processes."""
    payloads = [(*p.to_convention("general").radii.tolist(), tuple(p.h)) for p in points]
    if jobs <= 1:
        return [_classify_task(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_classify_task, payloads))


"""Isometric flow restricted to invariant structures.

With the radii fixed, the isometric class is parametrized by a unit quaternion
m and the flow ∂φ/∂t = -(div T)^♯ ⌟ ψ becomes

    dm/dt = -½ m q,   q = Σ_k s_k (div T)^♯_k (i, j, k)_k,

where s_k are the variation scales of the parametrization (r for the Ansatz,
r_k^3 in the general convention). The right-hand side is tangent to the unit
sphere, so |m| is conserved.
"""

import csv
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import IO, Literal

import numpy as np

from g2sphere.algebra import OMEGAS, Multivector, coframe, contract
from g2sphere.config import DEFAULT_SETTINGS, Settings
from g2sphere.connection import ansatz_div_norm_sq, div_full_torsion
from g2sphere.exceptions import IntegrationError, UnsupportedCaseError
from g2sphere.params import AnsatzParams, GeneralParams
from g2sphere.quaternion import imaginary, multiply, to_unit, upsilon
from g2sphere.structures import metric_from_params, phi_from_params, psi_from_phi
from g2sphere.torsion import ansatz_norm_sq, fit_rho, torsion

logger = logging.getLogger(__name__)

FlowParams = AnsatzParams | GeneralParams
Label = Literal["RP2", "NS", "stationary"]

CSV_HEADER = ("t", "m0", "m1", "m2", "m3", "energy", "div_norm")
# |div T| must stay below the tolerance this many steps to count as converged
CONVERGENCE_WINDOW = 100


@dataclass(frozen=True, eq=False)
class FlowState:
    """Point m of the isometric class of ``params`` at flow time t."""

    params: FlowParams
    m: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if not isinstance(self.params, (AnsatzParams, GeneralParams)):
            raise UnsupportedCaseError("The flow needs Ansatz or general parameters")
        object.__setattr__(self, "m", to_unit(self.m))

    @classmethod
    def start(cls, params: FlowParams) -> "FlowState":
        return cls(params=params, m=params.quaternion, t=0.0)

    @property
    def point(self) -> FlowParams:
        """Parameters of the structure at m."""
        return self.params.with_h(self.m)


def _velocity(m: np.ndarray, vector: np.ndarray, scales: np.ndarray) -> np.ndarray:
    return -0.5 * multiply(m, imaginary(scales * vector[:3]))


def flow_rhs(state: FlowState) -> np.ndarray:
    """dm/dt at a state, from the first-principles divergence of the full torsion."""
    div = div_full_torsion(state.point)
    return _velocity(state.m, div.sharp(), state.params.variation_scales())


def energy_rate(state: FlowState, eps: float = 1e-5) -> float:
    """d|T|^2/dt along flow_rhs, by a central difference of first-principles |T|^2.

    The exact rate is -2 |div T|^2.
    """
    velocity = flow_rhs(state)
    step = eps / max(1.0, float(np.linalg.norm(velocity)))
    values = []
    for sign in (1.0, -1.0):
        m = state.m + sign * step * velocity
        values.append(torsion(state.params.with_h(m / np.linalg.norm(m))).norm_sq)
    return (values[0] - values[1]) / (2.0 * step)


def ansatz_rhs(r: float, m: np.ndarray) -> np.ndarray:
    """dm/dt = c m2 (m0 m2, m1 m2, -(m0^2 + m1^2 + m3^2), m2 m3), c = 2(r^3 + 2)(r^3 - 1)/r^2."""
    m0, m1, m2, m3 = m
    c = 2.0 * (r**3 + 2) * (r**3 - 1) / r**2
    return c * m2 * np.array([m0 * m2, m1 * m2, -(m0**2 + m1**2 + m3**2), m2 * m3])


def closed_form_solution(params: FlowParams, t: float) -> np.ndarray:
    """Exact Ansatz trajectory through h = params.h at time t.

    Raises:
        UnsupportedCaseError: If the radii are not all equal
    """
    r = _ansatz_radius(params)
    h0, h1, h2, h3 = params.quaternion
    exponent = 2.0 * (r**3 + 2) * (r**3 - 1) * t / r**2
    # m_k carries e^{exponent}/den; written with e^{-exponent} to avoid overflow
    if exponent > 0:
        decay = math.exp(-exponent)
        den = math.sqrt(1 - h2**2 + h2**2 * decay**2)
        return np.array([h0 / den, h1 / den, h2 * decay / den, h3 / den])
    growth = math.exp(exponent)
    den = math.sqrt((1 - h2**2) * growth**2 + h2**2)
    return np.array([h0 * growth / den, h1 * growth / den, h2 / den, h3 * growth / den])


def _ansatz_radius(params: FlowParams) -> float:
    if isinstance(params, AnsatzParams):
        return params.r
    if isinstance(params, GeneralParams) and params.is_ansatz():
        return float(params.general_radii()[0] ** 3)
    raise UnsupportedCaseError("Closed-form flow exists only for the Ansatz family")


def _upsilon_derivative(h: np.ndarray, w: np.ndarray) -> np.ndarray:
    return 0.5 * (upsilon(h + w) - upsilon(h - w))


def flow_rhs_from_forms(state: FlowState) -> tuple[np.ndarray, float]:
    """Solve Dφ(m)[ṁ] = -(div T)^♯ ⌟ ψ for ṁ tangent to the sphere.

    Returns:
        (ṁ, residual) where residual is the max-abs mismatch of the 3-forms
    """
    general = state.params.to_general() if isinstance(state.params, AnsatzParams) else state.params
    _, c = general.with_h(state.m).scale_and_coefficients()
    tangents = [multiply(state.m, imaginary(np.eye(3)[k])) for k in range(3)]

    columns = []
    for w in tangents:
        dE = _upsilon_derivative(state.m, w) @ np.diag(c)
        form = Multivector.zero(3)
        for i in range(3):
            for j in range(3):
                form = form + (coframe(j + 1) ^ OMEGAS[i]) * float(dE[i, j])
        columns.append(form.coeffs)
    A = np.column_stack(columns)

    point = state.point
    g = metric_from_params(point)
    psi = psi_from_phi(phi_from_params(point), g)
    div = div_full_torsion(point)
    target = -contract(div.sharp(), psi).coeffs

    x, *_ = np.linalg.lstsq(A, target, rcond=None)
    residual = float(np.max(np.abs(A @ x - target))) if target.size else 0.0
    return sum(x[k] * tangents[k] for k in range(3)), residual


@dataclass(frozen=True, eq=False)
class DivergenceField:
    """div T on the isometric class of fixed radii as a sextic in m.

    The full torsion is a polynomial of degree at most six in the coefficients
    of φ, so restricted to the unit sphere div T agrees with a homogeneous
    sextic. The sextic is fitted once from first-principles samples.
    """

    params: GeneralParams
    exponents: np.ndarray
    coefficients: np.ndarray
    residual: float

    @classmethod
    def fit(cls, params: FlowParams, samples: int = 168, seed: int = 0) -> "DivergenceField":
        general = params.to_general() if isinstance(params, AnsatzParams) else params
        exponents = np.array(list(combinations_with_replacement(range(4), 6)))
        rng = np.random.default_rng(seed)
        points = rng.normal(size=(samples, 4))
        points /= np.linalg.norm(points, axis=1, keepdims=True)
        design = np.prod(points[:, exponents], axis=2)
        values = np.array([div_full_torsion(general.with_h(q)).route_b for q in points])
        coefficients, *_ = np.linalg.lstsq(design, values, rcond=None)
        residual = float(np.max(np.abs(design @ coefficients - values)))
        logger.debug("Fitted div T field for radii %s, residual %.3e", general.radii.tolist(), residual)
        return cls(params=general, exponents=exponents, coefficients=coefficients, residual=residual)

    def __call__(self, m: np.ndarray) -> np.ndarray:
        return np.prod(np.asarray(m)[self.exponents], axis=1) @ self.coefficients


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled states with energy |T|^2 and |div T|_g per sample."""

    params: FlowParams
    t: np.ndarray
    m: np.ndarray
    energy: np.ndarray
    div_norm: np.ndarray
    converged_at: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def final(self) -> FlowState:
        return FlowState(params=self.params, m=self.m[-1], t=float(self.t[-1]))

    def write_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for k in range(len(self.t)):
            row = [self.t[k], *self.m[k], self.energy[k], self.div_norm[k]]
            writer.writerow([f"{float(x):.17g}" for x in row])


class _VectorField:
    """dm/dt, energy and |div T| for fixed radii."""

    def __init__(self, params: FlowParams):
        self.params = params
        self.scales = params.variation_scales()
        self.ansatz = isinstance(params, AnsatzParams) or params.is_ansatz()
        if self.ansatz:
            self.r = _ansatz_radius(params)
            self.field = None
            self.rho = None
        else:
            self.field = DivergenceField.fit(params)
            self.rho = fit_rho(params)
            self.gram_inv = metric_from_params(params).gram_inv

    def rhs(self, m: np.ndarray) -> np.ndarray:
        if self.ansatz:
            return ansatz_rhs(self.r, m)
        return _velocity(m, self.gram_inv @ self.field(m), self.scales)

    def energy(self, m: np.ndarray) -> float:
        if self.ansatz:
            return ansatz_norm_sq(self.r, m[2])
        return self.rho.energy(m)

    def div_norm(self, m: np.ndarray) -> float:
        if self.ansatz:
            return math.sqrt(max(0.0, ansatz_div_norm_sq(self.r, float(m[2]))))
        v = self.field(m)
        return math.sqrt(max(0.0, float(v @ self.gram_inv @ v)))


def _rk4_step(f: Callable[[np.ndarray], np.ndarray], m: np.ndarray, h: float) -> np.ndarray:
    k1 = f(m)
    k2 = f(m + 0.5 * h * k1)
    k3 = f(m + 0.5 * h * k2)
    k4 = f(m + h * k3)
    return m + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(
    start: FlowState,
    t_max: float | None = None,
    dt: float | None = None,
    settings: Settings = DEFAULT_SETTINGS,
    sample_every: int = 1,
) -> Trajectory:
    """Fixed-step RK4 from ``start`` to ``start.t + t_max`` (either sign).

    Args:
        start: Initial state
        t_max: Flow time to integrate over (default: settings.flow_t_max)
        dt: Step size, positive (default: settings.flow_dt)
        settings: Drift thresholds and convergence tolerance
        sample_every: Record every n-th step (the final state is always recorded)

    Returns:
        Trajectory with energy and |div T| per sample

    Raises:
        ValueError: If dt <= 0 or t_max is not finite
        IntegrationError: If |m| drifts by more than settings.drift_reject in a step, or if
            |T|^2 rises between samples of a forward integration
    """
    t_max = settings.flow_t_max if t_max is None else t_max
    dt = settings.flow_dt if dt is None else dt
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not math.isfinite(t_max):
        raise ValueError(f"t_max must be finite, got {t_max}")

    vf = _VectorField(start.params)
    steps = max(1, math.ceil(abs(t_max) / dt - 1e-9))
    h = t_max / steps
    logger.info("Integrating %d steps of %.3g from t=%g", steps, h, start.t)

    m = start.m.copy()
    t = start.t
    times, points, energies, divs = [t], [m.copy()], [vf.energy(m)], [vf.div_norm(m)]
    below, converged_at = 0, None
    for step in range(1, steps + 1):
        m = _rk4_step(vf.rhs, m, h)
        t = start.t + step * h
        drift = abs(float(np.linalg.norm(m)) - 1.0)
        if drift > settings.drift_reject:
            raise IntegrationError(f"Step rejected at t={t:.6g}: |m| drifted by {drift:.3e}", t=t, drift=drift)
        m = m / np.linalg.norm(m)

        div = vf.div_norm(m)
        below = below + 1 if div < settings.tolerance else 0
        if converged_at is None and below >= CONVERGENCE_WINDOW:
            converged_at = t
        if step % sample_every == 0 or step == steps:
            energy = vf.energy(m)
            rise = energy - energies[-1]
            if h > 0 and rise > settings.tolerance * max(1.0, abs(energies[-1])):
                raise IntegrationError(f"Energy increased by {rise:.3e} at t={t:.6g}", t=t, rise=rise)
            times.append(t)
            points.append(m.copy())
            energies.append(energy)
            divs.append(div)

    return Trajectory(
        params=start.params,
        t=np.array(times),
        m=np.array(points),
        energy=np.array(energies),
        div_norm=np.array(divs),
        converged_at=converged_at,
        metadata={"dt": h, "steps": steps},
    )


def hemisphere_of(m: np.ndarray, atol: float = 1e-12) -> int:
    """Sign of m2: +1 or -1 off the equator, 0 on it."""
    m2 = float(m[2])
    return 0 if abs(m2) <= atol else (1 if m2 > 0 else -1)


def ansatz_critical_class(r: float, h: np.ndarray, atol: float = 1e-9) -> str:
    """Critical-class label of (r, h) in the Ansatz family."""
    h2 = float(np.asarray(h)[2])
    if abs(r - 1.0) <= atol:
        return "Ansatz-r1-all"
    if abs(h2) <= atol:
        return "Ansatz-equator"
    if abs(1.0 - h2**2) <= atol:
        return "Ansatz-poles"
    return "non-critical"


@dataclass(frozen=True)
class Asymptotics:
    """Limits of the Ansatz flow as t -> -∞ and t -> +∞."""

    limit_minus: Label
    limit_plus: Label


def asymptotics(r: float, h: np.ndarray, atol: float = 1e-9) -> Asymptotics:
    """Limit classes of the Ansatz trajectory through h; read off the closed form."""
    cls = ansatz_critical_class(r, h, atol)
    if cls == "Ansatz-r1-all":
        return Asymptotics("stationary", "stationary")
    if cls == "Ansatz-equator":
        return Asymptotics("RP2", "RP2")
    if cls == "Ansatz-poles":
        return Asymptotics("NS", "NS")
    return Asymptotics("RP2", "NS") if r < 1 else Asymptotics("NS", "RP2")

"""Named acceptance checks run by ``g2 verify``.

Every check draws from its own seeded generator, so results do not depend on
the order or the process the checks run in.
"""

import logging
import time
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from g2sphere.algebra import (
    ALGEBRA_DIM,
    DIM,
    InnerProduct,
    Multivector,
    ce_differential,
    hodge_star,
    index_tuples,
    invariant_basis,
    structure_constants,
    wedge,
)
from g2sphere.config import DEFAULT_SETTINGS, Settings
from g2sphere.connection import ansatz_divergence, div_full_torsion
from g2sphere.flow import FlowState, asymptotics, closed_form_solution, energy_rate, hemisphere_of, integrate
from g2sphere.params import AnsatzParams, G2Params, GeneralParams
from g2sphere.quaternion import random_unit
from g2sphere.stability import find_special_radii, hessian_closed, hessian_numeric
from g2sphere.structures import (
    PHI0,
    metric_from_params,
    metric_from_phi,
    normalize_homothety,
    phi_from_params,
    psi_from_phi,
)
from g2sphere.torsion import (
    NEARLY_PARALLEL_R,
    SQUASHED_R,
    closed_form_ansatz,
    closed_form_general,
    fit_rho,
    reduced_rho,
    rho_values,
    tensor_norm_sq,
    torsion,
    torsion_forms,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass(frozen=True)
class VerifyContext:
    seed: int
    scale: float
    settings: Settings

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, *name.encode()])

    def count(self, base: int) -> int:
        return max(1, int(round(base * self.scale)))


def _rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _random_form(rng: np.random.Generator, degree: int) -> Multivector:
    return Multivector(degree, rng.normal(size=len(index_tuples(degree))))


def _random_radii(rng: np.random.Generator) -> tuple[float, float, float]:
    magnitudes = rng.uniform(0.3, 3.0, size=3)
    signs = rng.choice([-1.0, 1.0], size=3)
    if np.prod(signs) < 0:
        signs[rng.integers(3)] *= -1
    return tuple(float(x) for x in magnitudes * signs)


def _random_spd(rng: np.random.Generator) -> InnerProduct:
    a = rng.normal(size=(DIM, DIM))
    return InnerProduct(a @ a.T + DIM * np.eye(DIM))


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def check_jacobi(ctx: VerifyContext) -> tuple[bool, str]:
    """Jacobi identity of the structure constants."""
    c = structure_constants().full_bracket
    # Σ_cyc [x, [y, z]] on basis triples, in exact integer arithmetic
    jac = np.einsum("yzw,xwv->xyzv", c, c)
    total = jac + jac.transpose(1, 2, 0, 3) + jac.transpose(2, 0, 1, 3)
    worst = int(np.max(np.abs(total)))
    return worst == 0, f"max |Jacobiator| = {worst} over {ALGEBRA_DIM**3} triples"


def check_d_squared(ctx: VerifyContext) -> tuple[bool, str]:
    """d∘d = 0 on invariant forms of every degree up to five."""
    rng = ctx.rng("d-squared")
    worst = 0.0
    for degree in range(6):
        forms = [form for form in invariant_basis() if form.degree == degree]
        for form in forms:
            worst = max(worst, ce_differential(ce_differential(form)).max_abs())
        mix = sum((form * float(rng.normal()) for form in forms), Multivector.zero(degree))
        worst = max(worst, ce_differential(ce_differential(mix)).max_abs())
    return worst <= 1e-12, f"max |d d α| = {worst:.2e}"


def check_star_involution(ctx: VerifyContext) -> tuple[bool, str]:
    """⋆⋆ = 1 for random invariant metrics."""
    rng = ctx.rng("star")
    worst = 0.0
    for _ in range(ctx.count(10)):
        g = _random_spd(rng)
        for degree in range(DIM + 1):
            alpha = _random_form(rng, degree)
            worst = max(worst, (hodge_star(hodge_star(alpha, g), g) - alpha).max_abs())
    return worst <= 1e-9, f"max |⋆⋆α - α| = {worst:.2e}"


def check_standard_metric(ctx: VerifyContext) -> tuple[bool, str]:
    """The reference structure induces the standard metric."""
    g = metric_from_phi(PHI0)
    err = float(np.max(np.abs(g.gram - np.eye(DIM))))
    return err <= 1e-12, f"|g(φ0) - I| = {err:.2e}"


def check_homothety(ctx: VerifyContext) -> tuple[bool, str]:
    """Homothety normalization fixes the volume and rescales the metric."""
    rng = ctx.rng("homothety")
    worst = 0.0
    for _ in range(ctx.count(20)):
        D = rng.normal(size=(3, 3))
        if np.linalg.det(D) < 0:
            D[0] *= -1
        params = G2Params.of(rng.uniform(0.5, 2.0), D)
        normalized, factor = normalize_homothety(params)
        worst = max(
            worst,
            _rel_err(metric_from_params(normalized).gram, factor * metric_from_params(params).gram),
            abs(np.linalg.det(normalized.matrix) - 1.0),
        )
    return worst <= 1e-9, f"max metric mismatch after normalization = {worst:.2e}"


def check_ansatz_torsion(ctx: VerifyContext) -> tuple[bool, str]:
    """Exterior calculus agrees with the Ansatz closed forms."""
    rng = ctx.rng("ansatz-torsion")
    worst = 0.0
    for _ in range(ctx.count(500)):
        params = AnsatzParams.create(r=float(rng.uniform(0.3, 3.0)), h=tuple(random_unit(rng)))
        fp, cf = torsion(params), closed_form_ansatz(params)
        worst = max(
            worst,
            _rel_err(fp.tau0, cf.tau0),
            _rel_err(fp.tau1.coeffs, cf.tau1.coeffs),
            _rel_err(fp.tau2.coeffs, cf.tau2.coeffs),
            _rel_err(fp.tau27, cf.tau27),
            _rel_err(fp.norm_sq, cf.norm_sq),
        )
    return worst <= 1e-8, f"max relative error = {worst:.2e}"


def check_general_torsion(ctx: VerifyContext) -> tuple[bool, str]:
    """Exterior calculus agrees with the general-family closed forms."""
    rng = ctx.rng("general-torsion")
    worst = 0.0
    for _ in range(ctx.count(300)):
        r1, r2, r3 = _random_radii(rng)
        params = GeneralParams.create(r1=r1, r2=r2, r3=r3, h=tuple(random_unit(rng)))
        fp, cf = torsion(params), closed_form_general(params)
        worst = max(
            worst,
            _rel_err(fp.tau0, cf.tau0),
            _rel_err(fp.tau1.coeffs, cf.tau1.coeffs),
            _rel_err(fp.tau2.coeffs, cf.tau2.coeffs),
            _rel_err(fp.tau27, cf.tau27),
            _rel_err(fp.norm_sq, cf.norm_sq),
        )
    return worst <= 1e-7, f"max relative error in τ0, τ1, τ2, τ27, |T|^2 = {worst:.2e}"


def check_general_reduces_to_ansatz(ctx: VerifyContext) -> tuple[bool, str]:
    """General closed forms reduce to the Ansatz at equal radii."""
    rng = ctx.rng("general-reduction")
    worst = 0.0
    for _ in range(ctx.count(30)):
        ansatz = AnsatzParams.create(r=float(rng.uniform(0.3, 3.0)), h=tuple(random_unit(rng)))
        a, g = closed_form_ansatz(ansatz), closed_form_general(ansatz.to_general())
        worst = max(
            worst,
            _rel_err(g.tau0, a.tau0),
            _rel_err(g.tau1.coeffs, a.tau1.coeffs),
            _rel_err(g.tau2.coeffs, a.tau2.coeffs),
            _rel_err(g.tau27, a.tau27),
        )
    return worst <= 1e-9, f"max relative error at equal radii = {worst:.2e}"


def check_rho(ctx: VerifyContext) -> tuple[bool, str]:
    """Fitted ρ coefficients agree with f(x, y, z) cyclically."""
    rng = ctx.rng("rho")
    worst = 0.0
    for _ in range(ctx.count(20)):
        r1, r2, r3 = _random_radii(rng)
        params = GeneralParams.create(r1=r1, r2=r2, r3=r3)
        fitted = fit_rho(params)
        worst = max(worst, _rel_err([fitted.rho0, fitted.rho1, fitted.rho3], rho_values(r1, r2, r3)))
    reduced = reduced_rho(2.0, 2.0, 0.25)
    exact = _rel_err(reduced, [3645 / 64, -9 / 8, 3645 / 64])
    return worst <= 1e-7 and exact <= 1e-12, f"fit vs f: {worst:.2e}; (2, 2, 1/4) reduced: {exact:.2e}"


def check_special_structures(ctx: VerifyContext) -> tuple[bool, str]:
    """Nearly parallel and squashed structures have the expected τ0."""
    cases = [
        (AnsatzParams.create(r=NEARLY_PARALLEL_R, h=(1, 0, 0, 0)), -4.0 * 2 ** (-1 / 3)),
        (AnsatzParams.create(r=SQUASHED_R, h=(0, 0, 1, 0)), 12 / 5 * (5 / 2) ** (1 / 3)),
        (AnsatzParams.create(r=SQUASHED_R, h=(0, 0, -1, 0)), 12 / 5 * (5 / 2) ** (1 / 3)),
    ]
    worst = 0.0
    for params, tau0 in cases:
        data = torsion(params)
        worst = max(
            worst,
            data.tau1.max_abs(),
            data.tau2.max_abs(),
            float(np.max(np.abs(data.tau27))),
            abs(data.tau0 - tau0),
        )
    forms = torsion_forms(phi_from_params(AnsatzParams.create(r=1.0, h=(0.6, 0, 0.8, 0))))
    residual = (forms.dpsi - wedge(forms.tau1, forms.psi) * 4.0).max_abs()
    return worst <= 1e-10 and residual <= 1e-9, f"nearly parallel: {worst:.2e}; r = 1 dψ: {residual:.2e}"


def check_tau0_nonzero(ctx: VerifyContext) -> tuple[bool, str]:
    """τ0 never vanishes on the Ansatz family."""
    s = ctx.settings
    smallest = np.inf
    for r in np.linspace(s.scan_r_min, s.scan_r_max, s.scan_r_steps):
        for h in ((1.0, 0.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0)):
            smallest = min(smallest, abs(closed_form_ansatz(AnsatzParams.create(r=float(r), h=h)).tau0))
    return smallest > 0.1, f"min |τ0| on coclosed grid = {smallest:.4f}"


def check_torsion_types(ctx: VerifyContext) -> tuple[bool, str]:
    """τ27 is trace-free and τ2 ∧ ψ = 0; |T|^2 agrees with the tensor norm."""
    rng = ctx.rng("types")
    trace, omega14, decomposition = 0.0, 0.0, 0.0
    for _ in range(ctx.count(20)):
        r1, r2, r3 = _random_radii(rng)
        params = GeneralParams.create(r1=r1, r2=r2, r3=r3, h=tuple(random_unit(rng)))
        data = torsion(params)
        g = metric_from_params(params)
        phi = phi_from_params(params)
        psi = psi_from_phi(phi, g)
        scale = max(1.0, data.norm_sq)
        trace = max(trace, abs(float(np.trace(g.gram_inv @ data.tau27))) / scale)
        omega14 = max(omega14, wedge(data.tau2, psi).max_abs() / scale)
        decomposition = max(decomposition, abs(tensor_norm_sq(data.full, g) - data.norm_sq) / scale)
    ok = max(trace, omega14, decomposition) <= 1e-9
    return ok, f"tr τ27 {trace:.2e}; τ2∧ψ {omega14:.2e}; |T|^2 {decomposition:.2e}"


def check_divergence_routes(ctx: VerifyContext) -> tuple[bool, str]:
    """Both routes to div T agree, and match the Ansatz closed form."""
    rng = ctx.rng("divergence")
    worst, ansatz = 0.0, 0.0
    for k in range(ctx.count(500)):
        if k % 2:
            r1, r2, r3 = _random_radii(rng)
            params = GeneralParams.create(r1=r1, r2=r2, r3=r3, h=tuple(random_unit(rng)))
            div = div_full_torsion(params)
        else:
            params = AnsatzParams.create(r=float(rng.uniform(0.3, 3.0)), h=tuple(random_unit(rng)))
            div = div_full_torsion(params)
            ansatz = max(ansatz, _rel_err(div.route_b, ansatz_divergence(params)))
        worst = max(worst, _rel_err(div.route_a, div.route_b))
    return worst <= 1e-8 and ansatz <= 1e-9, f"route A vs B: {worst:.2e}; Ansatz closed form: {ansatz:.2e}"


def check_divergence_critical(ctx: VerifyContext) -> tuple[bool, str]:
    """div T vanishes on the critical sets and nowhere else."""
    rng = ctx.rng("critical")
    on_sets, off_sets = 0.0, np.inf
    for _ in range(ctx.count(100)):
        r = float(rng.uniform(0.3, 3.0))
        h = random_unit(rng)
        equator = h.copy()
        equator[2] = 0.0
        equator /= np.linalg.norm(equator)
        for point in (
            AnsatzParams.create(r=1.0, h=tuple(h)),
            AnsatzParams.create(r=r, h=tuple(equator)),
            AnsatzParams.create(r=r, h=(0, 0, 1, 0)),
        ):
            on_sets = max(on_sets, div_full_torsion(point).norm)
        if abs(r - 1.0) > 0.01 and 0.1 < abs(h[2]) < 0.99:
            off_sets = min(off_sets, div_full_torsion(AnsatzParams.create(r=r, h=tuple(h))).norm)
    return on_sets <= 1e-10 and off_sets >= 1e-3, f"max on critical sets {on_sets:.2e}; min off {off_sets:.2e}"


# Ansatz radii on both sides of r = 1 and near the round sphere
FLOW_RADII = (0.7, 1.26, 2.0)
# Radii signs with r1 r2 r3 > 0
SIGN_PATTERNS = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))


def _flow_dt(r: float, settings: Settings) -> float:
    rate = abs(2.0 * (r**3 + 2) * (r**3 - 1) / r**2)
    return min(settings.flow_dt, 1e-2 / max(rate, 1e-12))


def check_flow(ctx: VerifyContext) -> tuple[bool, str]:
    """RK4 trajectories follow the closed-form flow."""
    rng = ctx.rng("flow")
    deviation, drift, energy, hemisphere = 0.0, 0.0, 0.0, True
    for k in range(ctx.count(50)):
        r = FLOW_RADII[k % len(FLOW_RADII)]
        h = random_unit(rng)
        params = AnsatzParams.create(r=r, h=tuple(h))
        for t_max in (10.0, -10.0):
            dt = _flow_dt(r, ctx.settings)
            traj = integrate(FlowState.start(params), t_max=t_max, dt=dt, sample_every=10)
            exact = np.array([closed_form_solution(params, t) for t in traj.t])
            deviation = max(deviation, float(np.max(np.abs(traj.m - exact))))
            drift = max(drift, float(np.max(np.abs(np.linalg.norm(traj.m, axis=1) - 1.0))))
            if t_max > 0:
                energy = max(energy, float(np.max(np.diff(traj.energy))))
            hemisphere &= all(hemisphere_of(m) in (0, hemisphere_of(h)) for m in traj.m)
    ok = deviation <= 1e-8 and drift <= 1e-9 and energy <= 1e-10 and hemisphere
    detail = f"vs closed form {deviation:.2e}; |m| drift {drift:.2e}; energy rise {energy:.2e}"
    return ok, f"{detail}; hemisphere kept {hemisphere}"


def check_general_energy(ctx: VerifyContext) -> tuple[bool, str]:
    """Along the flow with distinct radii d|T|^2/dt = -2 |div T|^2."""
    rng = ctx.rng("general-energy")
    worst = 0.0
    for _ in range(ctx.count(20)):
        signs = SIGN_PATTERNS[rng.integers(len(SIGN_PATTERNS))]
        r1, r2, r3 = (float(x) for x in rng.uniform(0.6, 1.6, size=3) * np.array(signs))
        params = GeneralParams.create(r1=r1, r2=r2, r3=r3, h=tuple(random_unit(rng)))
        expected = -2.0 * div_full_torsion(params).norm ** 2
        worst = max(worst, abs(energy_rate(FlowState.start(params)) - expected) / max(1.0, abs(expected)))
    return worst <= 1e-5, f"max relative mismatch of d|T|^2/dt = {worst:.2e}"


def check_asymptotics(ctx: VerifyContext) -> tuple[bool, str]:
    """Forward limits of the flow match the predicted classes."""
    failures = []
    for r in (0.5, 0.8, 1.5, 2.0):
        h = np.array([0.6, 0.0, 0.8, 0.0])
        params = AnsatzParams.create(r=r, h=tuple(h))
        expected = asymptotics(r, h)
        rate = abs(2.0 * (r**3 + 2) * (r**3 - 1) / r**2)
        traj = integrate(FlowState.start(params), t_max=40.0 / rate, dt=_flow_dt(r, ctx.settings), sample_every=100)
        m2 = abs(traj.m[-1][2])
        observed = "NS" if m2 > 1 - 1e-6 else ("RP2" if m2 < 1e-6 else "none")
        if observed != expected.limit_plus:
            failures.append(f"r={r}: {observed} != {expected.limit_plus}")
    return not failures, "; ".join(failures) or "forward limits match for r in {0.5, 0.8, 1.5, 2}"


def _tabulated_points() -> list[tuple[str, GeneralParams | AnsatzParams, tuple[int, int]]]:
    c = np.cbrt
    near = (c(2.0), c(2.0), c(0.25))
    far = (c(2.0), -c(0.5), -1.0)
    points: list[tuple[str, GeneralParams | AnsatzParams, tuple[int, int]]] = [
        ("r=1/2 NS", AnsatzParams.create(r=0.5, h=(0, 0, 1, 0)), (0, 0)),
        ("r=1/2 RP2", AnsatzParams.create(r=0.5, h=(1, 0, 0, 0)), (1, 2)),
        ("r=2 NS", AnsatzParams.create(r=2.0, h=(0, 0, 1, 0)), (3, 0)),
        ("r=2 RP2", AnsatzParams.create(r=2.0, h=(1, 0, 0, 0)), (0, 2)),
        ("(2,2,1/4) S1", GeneralParams.create(r1=near[0], r2=near[1], r3=near[2], h=(0.6, 0, 0, 0.8)), (2, 1)),
        ("(2,2,1/4) NS_2", GeneralParams.create(r1=near[0], r2=near[1], r3=near[2], h=(0, 0, 1, 0)), (1, 0)),
        ("(2,2,1/4) NS_1", GeneralParams.create(r1=near[0], r2=near[1], r3=near[2], h=(0, 1, 0, 0)), (0, 0)),
    ]
    for k, expected in enumerate(((2, 1), (1, 0), (2, 1), (0, 0))):
        h = tuple(float(x) for x in np.eye(4)[k])
        points.append((f"(2,-1/2,-1) NS_{k}", GeneralParams.create(r1=far[0], r2=far[1], r3=far[2], h=h), expected))
    return points


def check_stability_tables(ctx: VerifyContext) -> tuple[bool, str]:
    """Index and nullity at the tabulated critical points."""
    failures = []
    for name, params, expected in _tabulated_points():
        report = hessian_closed(params, ctx.settings)
        if (report.index, report.nullity) != expected:
            failures.append(f"{name}: {(report.index, report.nullity)} != {expected}")
    far = reduced_rho(2.0, -0.5, -1.0)
    if _rel_err(far, [0.0, -99 / 8, -135 / 8]) > 1e-12:
        failures.append(f"(2,-1/2,-1) ρ = {far}")
    return not failures, "; ".join(failures) or f"{len(_tabulated_points())} tabulated points match"


def check_hessian_numeric(ctx: VerifyContext) -> tuple[bool, str]:
    """Finite-difference Hessians agree with the closed form."""
    worst = 0.0
    for _, params, _ in _tabulated_points():
        closed = hessian_closed(params, ctx.settings).hessian
        numeric = hessian_numeric(params, ctx.settings).hessian
        worst = max(worst, float(np.max(np.abs(closed - numeric))) / max(1.0, float(np.max(np.abs(closed)))))
    return worst <= 1e-5, f"max relative mismatch {worst:.2e}"


def check_special_radii(ctx: VerifyContext) -> tuple[bool, str]:
    """Special radii and the energy-constant point."""
    roots = [r1 for r1, _ in find_special_radii()]
    expected = sorted([-1.0, -(2 ** (-1 / 27)), 2 ** (-1 / 27), 1.0])
    found = len(roots) == len(expected) and _rel_err(roots, expected) <= 1e-8
    point = (-(2 ** (-1 / 27)), -(2 ** (-1 / 27)), 2 ** (8 / 27))
    rng = ctx.rng("rp3")
    energies = [
        torsion(GeneralParams.create(r1=point[0], r2=point[1], r3=point[2], h=tuple(random_unit(rng)))).norm_sq
        for _ in range(ctx.count(20))
    ]
    spread = float(np.max(energies) - np.min(energies))
    return found and spread <= 1e-8, f"roots {np.round(roots, 9).tolist()}; |T|^2 spread {spread:.2e}"


CHECKS: dict[str, Callable[[VerifyContext], tuple[bool, str]]] = {
    "algebra.jacobi": check_jacobi,
    "algebra.d_squared": check_d_squared,
    "algebra.star_involution": check_star_involution,
    "structures.standard_metric": check_standard_metric,
    "structures.homothety": check_homothety,
    "torsion.ansatz_closed_form": check_ansatz_torsion,
    "torsion.general_closed_form": check_general_torsion,
    "torsion.general_reduces_to_ansatz": check_general_reduces_to_ansatz,
    "torsion.rho": check_rho,
    "torsion.special_structures": check_special_structures,
    "torsion.tau0_nonzero": check_tau0_nonzero,
    "torsion.types": check_torsion_types,
    "connection.routes": check_divergence_routes,
    "connection.critical_sets": check_divergence_critical,
    "flow.closed_form": check_flow,
    "flow.asymptotics": check_asymptotics,
    "flow.general_energy": check_general_energy,
    "stability.tables": check_stability_tables,
    "stability.numeric_hessian": check_hessian_numeric,
    "stability.special_radii": check_special_radii,
}


def run_check(name: str, ctx: VerifyContext) -> CheckResult:
    start = time.perf_counter()
    try:
        passed, detail = CHECKS[name](ctx)
    except Exception as e:
        logger.exception("Check %s raised", name)
        passed, detail = False, f"{type(e).__name__}: {e}"
    return CheckResult(name=name, passed=bool(passed), detail=detail, seconds=time.perf_counter() - start)


def _run_named(payload: tuple[str, int, float, dict]) -> CheckResult:
    name, seed, scale, settings = payload
    return run_check(name, VerifyContext(seed=seed, scale=scale, settings=Settings(**settings)))


def run_suite(
    names: list[str] | None = None,
    seed: int = 0,
    scale: float = 1.0,
    jobs: int = 1,
    settings: Settings = DEFAULT_SETTINGS,
) -> list[CheckResult]:
    """Run the named checks (all by default) and return their results in order.

    Raises:
        KeyError: If a check name is unknown
    """
    selected = list(CHECKS) if names is None else names
    unknown = [n for n in selected if n not in CHECKS]
    if unknown:
        raise KeyError(f"Unknown checks: {', '.join(unknown)}")
    payloads = [(name, seed, scale, settings.model_dump()) for name in selected]
    logger.info("Running %d checks with %d job(s)", len(payloads), jobs)
    if jobs <= 1:
        return [_run_named(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_named, payloads))

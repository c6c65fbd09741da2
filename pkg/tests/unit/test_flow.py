"""Unit tests for the isometric flow on invariant structures."""

import io

import numpy as np
import pytest

from g2sphere import flow as flow_module
from g2sphere.connection import div_full_torsion
from g2sphere.exceptions import IntegrationError, ParameterDomainError, UnsupportedCaseError
from g2sphere.flow import (
    CSV_HEADER,
    DivergenceField,
    FlowState,
    ansatz_critical_class,
    ansatz_rhs,
    asymptotics,
    closed_form_solution,
    energy_rate,
    flow_rhs,
    flow_rhs_from_forms,
    hemisphere_of,
    integrate,
)
from g2sphere.params import AnsatzParams, G2Params, GeneralParams
from g2sphere.torsion import ansatz_norm_sq


class TestFlowState:
    """Tests for FlowState."""

    def test_start_normalizes(self):
        """Small drift in m is renormalized away."""
        state = FlowState(params=AnsatzParams.create(r=1.2), m=np.array([1.0 + 1e-9, 0.0, 0.0, 0.0]))
        assert state.m[0] == pytest.approx(1.0, abs=1e-15)

    def test_rejects_non_unit(self):
        with pytest.raises(ParameterDomainError):
            FlowState(params=AnsatzParams.create(r=1.2), m=np.array([2.0, 0.0, 0.0, 0.0]))

    def test_point(self, generic_ansatz):
        """point carries the radii of params and the quaternion m."""
        state = FlowState(params=generic_ansatz, m=np.array([0.0, 0.0, 1.0, 0.0]))
        assert state.point.r == generic_ansatz.r
        assert state.point.h == (0.0, 0.0, 1.0, 0.0)

    def test_rejects_g2params(self):
        """Raw (a, D) has no isometric class parametrization."""
        with pytest.raises(UnsupportedCaseError):
            FlowState(params=G2Params.of(1.0, np.eye(3)), m=np.array([1.0, 0.0, 0.0, 0.0]))


class TestRightHandSide:
    """Tests for dm/dt."""

    def test_ansatz_matches_first_principles(self, generic_ansatz):
        """The Ansatz ODE is the projected divergence flow."""
        state = FlowState.start(generic_ansatz)
        np.testing.assert_allclose(flow_rhs(state), ansatz_rhs(generic_ansatz.r, state.m), rtol=1e-8, atol=1e-8)

    def test_tangent_to_sphere(self, generic_general):
        """m · dm/dt = 0."""
        state = FlowState.start(generic_general)
        assert abs(float(state.m @ flow_rhs(state))) < 1e-9

    def test_from_forms(self, generic_ansatz):
        """Solving the 3-form equation gives the same velocity."""
        state = FlowState.start(generic_ansatz)
        velocity, residual = flow_rhs_from_forms(state)
        assert residual < 1e-8
        np.testing.assert_allclose(velocity, flow_rhs(state), rtol=1e-7, atol=1e-8)

    def test_from_forms_distinct_radii(self, generic_general):
        """With distinct radii the velocity still solves the 3-form equation."""
        state = FlowState.start(generic_general)
        velocity, residual = flow_rhs_from_forms(state)
        assert residual < 1e-8
        np.testing.assert_allclose(velocity, flow_rhs(state), rtol=1e-7, atol=1e-8)

    @pytest.mark.parametrize("h", [(0.6, 0.8, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0)])
    def test_critical_points_are_stationary(self, h):
        """Equator and poles do not move."""
        np.testing.assert_allclose(ansatz_rhs(1.5, np.array(h)), 0.0, atol=1e-15)


class TestEnergyRate:
    """d|T|^2/dt = -2 |div T|^2 along the flow."""

    @pytest.mark.parametrize(
        ("radii", "h"),
        [
            ((1.3, 0.8, 1.1), (0.5, 0.5, 0.5, 0.5)),
            ((1.0, 1.2, 0.9), (0.1, 0.7, 0.5, 0.5)),
            ((1.3, -0.8, -1.1), (0.5, -0.5, 0.5, 0.5)),
            ((0.8, -1.4, -1.05), (0.3, 0.1, -0.5, 0.806225774829855)),
        ],
    )
    def test_distinct_radii(self, radii, h):
        """The flow decreases |T|^2 at the rate set by div T for any radii."""
        r1, r2, r3 = radii
        state = FlowState.start(GeneralParams.create(r1=r1, r2=r2, r3=r3, h=h))
        expected = -2.0 * div_full_torsion(state.point).norm ** 2
        assert expected < -1e-3
        assert energy_rate(state) == pytest.approx(expected, rel=1e-5)

    def test_ansatz(self, generic_ansatz):
        state = FlowState.start(generic_ansatz)
        expected = -2.0 * div_full_torsion(generic_ansatz).norm ** 2
        assert energy_rate(state) == pytest.approx(expected, rel=1e-5)


class TestClosedForm:
    """Tests for the exact Ansatz trajectory."""

    def test_initial_value(self, generic_ansatz):
        """m(0) = h."""
        np.testing.assert_allclose(closed_form_solution(generic_ansatz, 0.0), generic_ansatz.quaternion, atol=1e-15)

    def test_initial_derivative(self, generic_ansatz):
        """dm2/dt = -c h2 (1 - h2^2) at t = 0."""
        r, h2 = generic_ansatz.r, generic_ansatz.h[2]
        c = 2 * (r**3 + 2) * (r**3 - 1) / r**2
        eps = 1e-6
        slope = (closed_form_solution(generic_ansatz, eps) - closed_form_solution(generic_ansatz, -eps)) / (2 * eps)
        assert slope[2] == pytest.approx(-c * h2 * (1 - h2**2), rel=1e-6)

    def test_unit_norm_for_large_times(self, generic_ansatz):
        """No overflow in either direction."""
        for t in (-1e3, 1e3):
            m = closed_form_solution(generic_ansatz, t)
            assert np.all(np.isfinite(m))
            assert np.linalg.norm(m) == pytest.approx(1.0)

    def test_general_needs_equal_radii(self, generic_general):
        """Distinct radii have no closed form."""
        with pytest.raises(UnsupportedCaseError):
            closed_form_solution(generic_general, 1.0)

    def test_general_at_equal_radii(self, generic_ansatz):
        """The general family at equal radii uses the Ansatz closed form."""
        np.testing.assert_allclose(
            closed_form_solution(generic_ansatz.to_general(), 0.3), closed_form_solution(generic_ansatz, 0.3)
        )


class TestIntegrate:
    """Tests for the RK4 integrator."""

    def test_follows_closed_form(self):
        """RK4 agrees with the exact trajectory."""
        params = AnsatzParams.create(r=0.7, h=(0.5, 0.5, 0.5, 0.5))
        traj = integrate(FlowState.start(params), t_max=2.0, dt=1e-3, sample_every=50)
        exact = np.array([closed_form_solution(params, t) for t in traj.t])
        assert np.max(np.abs(traj.m - exact)) < 1e-8
        assert traj.t[-1] == pytest.approx(2.0)

    def test_backward_in_time(self):
        """Negative t_max integrates backwards."""
        params = AnsatzParams.create(r=1.5, h=(0.5, 0.5, 0.5, 0.5))
        traj = integrate(FlowState.start(params), t_max=-0.2, dt=1e-3)
        assert traj.t[-1] == pytest.approx(-0.2)
        np.testing.assert_allclose(traj.m[-1], closed_form_solution(params, -0.2), atol=1e-9)

    def test_energy_decreases(self, generic_ansatz):
        """|T|^2 is non-increasing forward in time and |m| stays 1."""
        traj = integrate(FlowState.start(generic_ansatz), t_max=0.5, dt=1e-3)
        assert np.all(np.diff(traj.energy) <= 1e-10)
        np.testing.assert_allclose(np.linalg.norm(traj.m, axis=1), 1.0, atol=1e-12)
        assert traj.energy[0] == pytest.approx(ansatz_norm_sq(generic_ansatz.r, generic_ansatz.h[2]))

    def test_metadata(self, generic_ansatz):
        """Step count rounds up and the step is shrunk to land on t_max."""
        traj = integrate(FlowState.start(generic_ansatz), t_max=0.1, dt=0.003)
        assert traj.metadata["steps"] == 34
        assert traj.metadata["dt"] == pytest.approx(0.1 / 34)
        assert len(traj.t) == 35

    def test_energy_rise_is_rejected(self, generic_ansatz, monkeypatch):
        """A forward step that raises |T|^2 stops the integration."""
        monkeypatch.setattr(flow_module, "ansatz_rhs", lambda r, m: -ansatz_rhs(r, m))
        with pytest.raises(IntegrationError, match="Energy increased") as exc:
            integrate(FlowState.start(generic_ansatz), t_max=0.1, dt=1e-3)
        assert exc.value.rise > 0
        assert exc.value.t == pytest.approx(1e-3)

    def test_backward_energy_may_rise(self, generic_ansatz):
        """Backward in time the energy increases without error."""
        traj = integrate(FlowState.start(generic_ansatz), t_max=-0.1, dt=1e-3)
        assert np.all(np.diff(traj.energy) >= -1e-10)

    def test_final(self, generic_ansatz):
        """final is the last sample as a state."""
        traj = integrate(FlowState.start(generic_ansatz), t_max=0.1, dt=0.01)
        assert traj.final.t == pytest.approx(0.1)
        np.testing.assert_allclose(traj.final.m, traj.m[-1])

    @pytest.mark.parametrize("dt", [0.0, -0.1])
    def test_rejects_bad_step(self, generic_ansatz, dt):
        """dt must be positive."""
        with pytest.raises(ValueError, match="dt"):
            integrate(FlowState.start(generic_ansatz), t_max=1.0, dt=dt)

    def test_rejects_infinite_time(self, generic_ansatz):
        """t_max must be finite."""
        with pytest.raises(ValueError, match="t_max"):
            integrate(FlowState.start(generic_ansatz), t_max=float("inf"), dt=0.1)

    def test_convergence_detected(self):
        """A start on a critical set converges after the window."""
        params = AnsatzParams.create(r=1.5, h=(1.0, 0.0, 0.0, 0.0))
        traj = integrate(FlowState.start(params), t_max=0.2, dt=1e-3)
        assert traj.converged_at == pytest.approx(0.1)

    def test_write_csv(self, generic_ansatz):
        """Header plus one row per sample."""
        traj = integrate(FlowState.start(generic_ansatz), t_max=0.1, dt=0.01)
        out = io.StringIO()
        traj.write_csv(out)
        lines = out.getvalue().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 12
        assert float(lines[-1].split(",")[0]) == pytest.approx(0.1)


@pytest.mark.slow
class TestGeneralFlow:
    """Tests for the flow with distinct radii."""

    def test_field_fit(self, generic_general, rng):
        """The sextic field reproduces div T away from the samples."""
        field = DivergenceField.fit(generic_general)
        assert field.residual < 1e-8
        h = rng.normal(size=4)
        h /= np.linalg.norm(h)
        expected = div_full_torsion(generic_general.with_h(h)).route_b
        np.testing.assert_allclose(field(h), expected, atol=1e-7 * max(1.0, float(np.max(np.abs(expected)))))

    def test_integrate(self, generic_general):
        """Energy decreases along a short general trajectory."""
        traj = integrate(FlowState.start(generic_general), t_max=0.01, dt=1e-3)
        assert np.all(np.diff(traj.energy) <= 1e-8 * max(1.0, abs(float(traj.energy[0]))))
        np.testing.assert_allclose(np.linalg.norm(traj.m, axis=1), 1.0, atol=1e-12)


class TestAsymptotics:
    """Tests for critical classes and flow limits in the Ansatz family."""

    @pytest.mark.parametrize(
        ("r", "h", "expected"),
        [
            (1.0, (0.5, 0.5, 0.5, 0.5), "Ansatz-r1-all"),
            (1.5, (0.6, 0.8, 0.0, 0.0), "Ansatz-equator"),
            (1.5, (0.0, 0.0, -1.0, 0.0), "Ansatz-poles"),
            (1.5, (0.5, 0.5, 0.5, 0.5), "non-critical"),
        ],
    )
    def test_critical_class(self, r, h, expected):
        assert ansatz_critical_class(r, np.array(h)) == expected

    def test_limits(self):
        """Forward limit is NS for r < 1 and RP2 for r > 1."""
        h = np.array([0.5, 0.5, 0.5, 0.5])
        assert asymptotics(0.5, h).limit_plus == "NS"
        assert asymptotics(0.5, h).limit_minus == "RP2"
        assert asymptotics(2.0, h).limit_plus == "RP2"
        assert asymptotics(2.0, h).limit_minus == "NS"
        assert asymptotics(1.0, h).limit_plus == "stationary"
        assert asymptotics(2.0, np.array([1.0, 0.0, 0.0, 0.0])).limit_plus == "RP2"

    def test_forward_limit_matches_closed_form(self):
        """Closed-form trajectories reach the predicted limit."""
        h = np.array([0.6, 0.0, 0.8, 0.0])
        for r, pole in ((0.5, True), (2.0, False)):
            m2 = abs(closed_form_solution(AnsatzParams.create(r=r, h=tuple(h)), 50.0)[2])
            assert (m2 > 1 - 1e-9) if pole else (m2 < 1e-9)

    def test_hemisphere(self):
        assert hemisphere_of(np.array([0.0, 0.0, 0.3, 0.0])) == 1
        assert hemisphere_of(np.array([0.0, 0.0, -0.3, 0.0])) == -1
        assert hemisphere_of(np.array([1.0, 0.0, 0.0, 0.0])) == 0

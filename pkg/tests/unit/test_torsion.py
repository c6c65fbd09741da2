"""Unit tests for torsion forms, the full torsion tensor and closed forms."""

import numpy as np
import pytest

from g2sphere.algebra import Multivector, hodge_star, wedge
from g2sphere.exceptions import UnsupportedCaseError
from g2sphere.params import AnsatzParams, G2Params, GeneralParams
from g2sphere.quaternion import random_unit
from g2sphere.structures import metric_from_params, phi_from_params
from g2sphere.torsion import (
    ansatz_norm_sq,
    closed_form_ansatz,
    closed_form_general,
    energy_levels,
    fit_rho,
    i_map,
    j_map,
    norm_decomposition,
    reduced_rho,
    regimes,
    rho_coefficients,
    rho_values,
    tau0_closed,
    tensor_norm_sq,
    torsion,
    torsion_forms,
    two_form_matrix,
)


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


class TestSpecialStructures:
    """Tests for the nearly parallel structures of the Ansatz family."""

    def test_round_sphere(self, round_sphere):
        """Round sphere: τ0 = -4 · 2^{-1/3}, all other torsion vanishes."""
        data = torsion(round_sphere)
        assert data.tau0 == pytest.approx(-4 * 2 ** (-1 / 3), rel=1e-10)
        assert data.tau0 == pytest.approx(-3.17480, abs=1e-5)
        assert data.tau1.max_abs() < 1e-10
        assert data.tau2.max_abs() < 1e-10
        assert np.max(np.abs(data.tau27)) < 1e-10
        assert regimes(data)["nearly_parallel"]

    def test_squashed_sphere(self, squashed_sphere):
        """Squashed sphere: τ0 = (12/5)(5/2)^{1/3}."""
        data = torsion(squashed_sphere)
        assert data.tau0 == pytest.approx(12 / 5 * (5 / 2) ** (1 / 3), rel=1e-10)
        assert regimes(data) == {"coclosed": True, "nearly_parallel": True, "tau2_free": True}

    def test_generic_point_is_not_coclosed(self, generic_ansatz):
        """Off the special structures τ1 and τ2 are present."""
        data = torsion(generic_ansatz)
        flags = regimes(data)
        assert not flags["coclosed"]
        assert not flags["nearly_parallel"]


class TestTorsionForms:
    """Tests for the first-principles decomposition."""

    def test_dphi_reconstructs(self, generic_general):
        """dφ = τ0 ψ + 3 τ1 ∧ φ + ⋆τ3."""
        forms = torsion_forms(phi_from_params(generic_general))
        rebuilt = forms.psi * forms.tau0 + wedge(forms.tau1, forms.phi) * 3.0 + hodge_star(forms.tau3, forms.metric)
        assert _rel(rebuilt.coeffs, forms.dphi.coeffs) < 1e-9

    def test_dpsi_reconstructs(self, generic_general):
        """dψ = 4 τ1 ∧ ψ + τ2 ∧ φ."""
        forms = torsion_forms(phi_from_params(generic_general))
        rebuilt = wedge(forms.tau1, forms.psi) * 4.0 + wedge(forms.tau2, forms.phi)
        assert _rel(rebuilt.coeffs, forms.dpsi.coeffs) < 1e-9

    def test_tau2_in_fourteen(self, generic_general):
        """τ2 ∧ ψ = 0."""
        forms = torsion_forms(phi_from_params(generic_general))
        assert wedge(forms.tau2, forms.psi).max_abs() < 1e-9 * max(1.0, forms.tau2.max_abs())

    def test_tau27_symmetric_trace_free(self, generic_general):
        """τ27 is symmetric and g-trace-free."""
        data = torsion(generic_general)
        g = metric_from_params(generic_general)
        np.testing.assert_allclose(data.tau27, data.tau27.T, atol=1e-12)
        assert abs(np.trace(g.gram_inv @ data.tau27)) < 1e-9 * max(1.0, np.abs(data.tau27).max())

    def test_j_and_i_maps(self, generic_general):
        """ȷ(ı(β)) = 4β on g-trace-free symmetric β."""
        phi = phi_from_params(generic_general)
        g = metric_from_params(generic_general)
        beta = torsion(generic_general).tau27
        assert _rel(j_map(i_map(beta, phi, g), phi, g), 4 * beta) < 1e-9

    def test_norm_decomposition(self, generic_general):
        """|T|^2 = (7/16)τ0^2 + |τ27|^2 + 6|τ1|^2 + |τ2|^2/2."""
        data = torsion(generic_general)
        g = metric_from_params(generic_general)
        assert norm_decomposition(data, g) == pytest.approx(data.norm_sq, rel=1e-9)
        assert tensor_norm_sq(data.full, g) == pytest.approx(data.norm_sq, rel=1e-12)

    def test_two_form_matrix(self):
        """Components of e^{12} are skew."""
        m = two_form_matrix(Multivector.basis(1, 2))
        assert m[0, 1] == 1.0
        assert m[1, 0] == -1.0
        assert np.count_nonzero(m) == 2

    def test_to_json(self, round_sphere):
        """JSON payload carries every torsion component."""
        payload = torsion(round_sphere).to_json()
        assert set(payload) == {"tau0", "tau1", "tau2", "tau27", "T", "normT2"}
        assert len(payload["tau1"]) == 7
        assert np.array(payload["T"]).shape == (7, 7)


class TestClosedForms:
    """Tests comparing closed forms with exterior calculus."""

    def test_ansatz_matches_first_principles(self, rng):
        """Ansatz closed forms agree with exterior calculus."""
        for _ in range(5):
            params = AnsatzParams.create(r=float(rng.uniform(0.4, 2.5)), h=tuple(random_unit(rng)))
            fp, cf = torsion(params), closed_form_ansatz(params)
            assert _rel(fp.tau0, cf.tau0) < 1e-9
            assert _rel(fp.tau1.coeffs, cf.tau1.coeffs) < 1e-9
            assert _rel(fp.tau2.coeffs, cf.tau2.coeffs) < 1e-9
            assert _rel(fp.tau27, cf.tau27) < 1e-9
            assert _rel(fp.full, cf.full) < 1e-9
            assert _rel(fp.norm_sq, cf.norm_sq) < 1e-9

    def test_ansatz_norm(self, generic_ansatz):
        """|T|^2 depends on h only through h2."""
        expected = ansatz_norm_sq(generic_ansatz.r, generic_ansatz.h[2])
        assert torsion(generic_ansatz).norm_sq == pytest.approx(expected, rel=1e-9)

    def test_energy_levels(self):
        """Both critical levels equal 9 at r = 1; NS lies above RP2 for r > 1."""
        levels = energy_levels(1.0)
        assert levels == {"RP2": 9.0, "NS": 9.0}
        assert energy_levels(2.0)["NS"] > energy_levels(2.0)["RP2"]
        assert energy_levels(0.5)["NS"] < energy_levels(0.5)["RP2"]

    def test_general_reduces_to_ansatz(self, rng):
        """At equal radii the general closed forms are the Ansatz ones."""
        ansatz = AnsatzParams.create(r=1.8, h=tuple(random_unit(rng)))
        a, g = closed_form_ansatz(ansatz), closed_form_general(ansatz.to_general())
        assert _rel(g.tau0, a.tau0) < 1e-9
        assert _rel(g.tau1.coeffs, a.tau1.coeffs) < 1e-9
        assert _rel(g.tau2.coeffs, a.tau2.coeffs) < 1e-9
        assert _rel(g.tau27, a.tau27) < 1e-9

    @pytest.mark.parametrize("radii", [(1.3, 0.8, 1.1), (1.3, -0.8, -1.1), (0.9, 1.2, 1.05), (-1.6, 0.7, -0.6)])
    def test_general_matches_first_principles(self, radii, rng):
        """General closed forms agree with exterior calculus at distinct radii and generic h."""
        r1, r2, r3 = radii
        for _ in range(2):
            params = GeneralParams.create(r1=r1, r2=r2, r3=r3, h=tuple(random_unit(rng)))
            fp, cf = torsion(params), closed_form_general(params)
            assert _rel(fp.tau0, cf.tau0) < 1e-9
            assert _rel(fp.tau1.coeffs, cf.tau1.coeffs) < 1e-9
            assert _rel(fp.tau2.coeffs, cf.tau2.coeffs) < 1e-9
            assert _rel(fp.tau27, cf.tau27) < 1e-9
            assert _rel(fp.norm_sq, cf.norm_sq) < 1e-9

    def test_tau0_closed(self, rng):
        """Closed-form τ0 agrees with exterior calculus for raw (a, D)."""
        for _ in range(3):
            D = np.eye(3) + 0.3 * rng.normal(size=(3, 3))
            if np.linalg.det(D) < 0:
                D[0] *= -1
            params = G2Params.of(rng.uniform(0.5, 2.0), D)
            assert tau0_closed(params) == pytest.approx(torsion(params).tau0, rel=1e-9)

    def test_general_needs_general_params(self, generic_ansatz):
        """closed_form_general rejects other parametrizations."""
        with pytest.raises(UnsupportedCaseError):
            closed_form_general(generic_ansatz)


class TestRho:
    """Tests for the ρ coefficients of |T|^2."""

    def test_energy_is_quadratic_in_h(self, generic_general, rng):
        """|T|^2 = ρ0 h0^2 + ρ1 h1^2 + ρ3 h3^2 + ϱ at any h."""
        rho = fit_rho(generic_general)
        for _ in range(3):
            h = random_unit(rng)
            assert rho.energy(h) == pytest.approx(torsion(generic_general.with_h(h)).norm_sq, rel=1e-9)

    def test_equal_radii(self):
        """ρ0 = ρ1 = ρ3 at equal radii."""
        rho0, rho1, rho3 = rho_values(1.3, 1.3, 1.3)
        assert rho0 == pytest.approx(rho1)
        assert rho1 == pytest.approx(rho3)

    def test_reduced_values(self):
        """Exact reduced values at (2, 2, 1/4) and (2, -1/2, -1)."""
        np.testing.assert_allclose(reduced_rho(2.0, 2.0, 0.25), [3645 / 64, -9 / 8, 3645 / 64], rtol=1e-14)
        np.testing.assert_allclose(reduced_rho(2.0, -0.5, -1.0), [0.0, -99 / 8, -135 / 8], atol=1e-14)

    def test_reduced_matches_f(self):
        """Reduced polynomials are f at r = R^{1/3}, divided by four."""
        for R in ((2.0, 2.0, 0.25), (2.0, -0.5, -1.0)):
            r = np.cbrt(R)
            np.testing.assert_allclose(np.array(rho_values(*r)) / 4, reduced_rho(*R), rtol=1e-12, atol=1e-12)

    def test_fit_matches_f(self):
        """Measured coefficients agree with f(x, y, z) cyclically."""
        r = np.cbrt([2.0, 2.0, 0.25])
        fitted = fit_rho(GeneralParams.create(r1=r[0], r2=r[1], r3=r[2]))
        expected = rho_coefficients(*r)
        assert _rel([fitted.rho0, fitted.rho1, fitted.rho3], [expected.rho0, expected.rho1, expected.rho3]) < 1e-8
        assert fitted.varrho == pytest.approx(expected.varrho, rel=1e-12)

    def test_quadratic_form(self):
        """diag(ρ0, ρ1, 0, ρ3)."""
        rho = rho_coefficients(1.0, 1.0, 1.0)
        np.testing.assert_allclose(np.diag(rho.quadratic_form), [rho.rho0, rho.rho1, 0.0, rho.rho3])

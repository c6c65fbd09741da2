"""Unit tests for sp(2) structure constants and exterior calculus on p."""

import numpy as np
import pytest

from g2sphere.algebra import (
    DIM,
    E123,
    E4567,
    OMEGAS,
    InnerProduct,
    Multivector,
    basis_vector,
    bracket,
    bracket_p,
    ce_differential,
    codifferential,
    contract,
    flat,
    hodge_star,
    index_tuples,
    inner,
    invariant_basis,
    isotropy_invariant,
    norm_sq,
    sharp,
    structure_constants,
    wedge,
)
from g2sphere.exceptions import DefinitenessError, DegreeError
from g2sphere.structures import PHI0


def _random_metric(rng) -> InnerProduct:
    a = rng.normal(size=(DIM, DIM))
    return InnerProduct(a @ a.T + DIM * np.eye(DIM))


def _random_form(rng, degree: int) -> Multivector:
    return Multivector(degree, rng.normal(size=len(index_tuples(degree))))


class TestStructureConstants:
    """Tests for the bracket table of sp(2)."""

    def test_integral_and_antisymmetric(self):
        """Coefficients are integers and [x, y] = -[y, x]."""
        table = structure_constants().full_bracket
        assert table.dtype.kind == "i"
        np.testing.assert_array_equal(table, -table.transpose(1, 0, 2))

    def test_p_bracket_is_projection(self):
        """p_bracket is the p-block of the full table."""
        constants = structure_constants()
        np.testing.assert_array_equal(constants.p_bracket, constants.full_bracket[3:, 3:, 3:])

    def test_isotropy_bracket(self):
        """[v1, v2] = 2 v3."""
        v1, v2 = np.eye(10)[0], np.eye(10)[1]
        np.testing.assert_allclose(bracket(v1, v2), 2 * np.eye(10)[2])

    def test_p1_bracket(self):
        """[e1, e2]_p = 2 e3."""
        np.testing.assert_allclose(bracket_p(basis_vector(1), basis_vector(2)), 2 * basis_vector(3))

    def test_jacobi(self):
        """The full bracket satisfies the Jacobi identity."""
        c = structure_constants().full_bracket
        jac = np.einsum("yzw,xwv->xyzv", c, c)
        total = jac + jac.transpose(1, 2, 0, 3) + jac.transpose(2, 0, 1, 3)
        assert not np.any(total)

    def test_tables_are_read_only(self):
        """Cached tables cannot be modified in place."""
        with pytest.raises(ValueError):
            structure_constants().p_bracket[0, 0, 0] = 1


class TestMultivector:
    """Tests for forms and the wedge and interior products."""

    def test_basis_sorts_with_sign(self):
        """e^{21} = -e^{12}."""
        assert Multivector.basis(2, 1).allclose(-Multivector.basis(1, 2))
        assert Multivector.basis(1, 1).max_abs() == 0.0

    def test_getitem_and_dict(self):
        """Coefficients are addressable by index tuple in any order."""
        form = Multivector.from_dict(2, {(1, 2): 3.0, (5, 4): 2.0})
        assert form[(1, 2)] == 3.0
        assert form[(2, 1)] == -3.0
        assert form[(4, 5)] == -2.0
        assert form.to_dict() == {(1, 2): 3.0, (4, 5): -2.0}

    def test_wrong_size_rejected(self):
        """Coefficient count must match the degree."""
        with pytest.raises(DegreeError):
            Multivector(2, np.zeros(5))
        with pytest.raises(DegreeError):
            Multivector(8, np.zeros(1))

    def test_arithmetic_requires_same_degree(self):
        """Forms of different degree cannot be added."""
        with pytest.raises(DegreeError):
            Multivector.basis(1) + Multivector.basis(1, 2)

    def test_wedge_graded_commutativity(self, rng):
        """α ∧ β = (-1)^{kl} β ∧ α."""
        for k, l in ((1, 1), (1, 2), (2, 3), (3, 3)):
            alpha, beta = _random_form(rng, k), _random_form(rng, l)
            sign = (-1) ** (k * l)
            assert wedge(alpha, beta).allclose(wedge(beta, alpha) * sign, atol=1e-10)

    def test_wedge_associative(self, rng):
        """(α ∧ β) ∧ γ = α ∧ (β ∧ γ)."""
        a, b, c = _random_form(rng, 1), _random_form(rng, 2), _random_form(rng, 3)
        assert wedge(wedge(a, b), c).allclose(wedge(a, wedge(b, c)), atol=1e-10)

    def test_xor_is_wedge(self):
        """The ^ operator wedges."""
        assert (Multivector.basis(1) ^ Multivector.basis(2, 3)).allclose(E123)

    def test_wedge_degree_overflow(self):
        """Wedging past degree 7 raises DegreeError."""
        with pytest.raises(DegreeError):
            wedge(E4567, E4567)

    def test_contract(self):
        """e_1 ⌟ e^{12} = e^2 and e_2 ⌟ e^{12} = -e^1."""
        e12 = Multivector.basis(1, 2)
        assert contract(basis_vector(1), e12).allclose(Multivector.basis(2))
        assert contract(basis_vector(2), e12).allclose(-Multivector.basis(1))

    def test_contract_antiderivation(self, rng):
        """v ⌟ (α ∧ β) = (v ⌟ α) ∧ β + (-1)^k α ∧ (v ⌟ β)."""
        v = rng.normal(size=DIM)
        alpha, beta = _random_form(rng, 2), _random_form(rng, 3)
        left = contract(v, wedge(alpha, beta))
        right = wedge(contract(v, alpha), beta) + wedge(alpha, contract(v, beta))
        assert left.allclose(right, atol=1e-10)


class TestDifferential:
    """Tests for the invariant exterior derivative."""

    def test_d_squared_on_invariant_forms(self, rng):
        """d∘d = 0 on isotropy-invariant forms."""
        for degree in range(6):
            forms = [form for form in invariant_basis() if form.degree == degree]
            mix = sum((form * float(rng.normal()) for form in forms), Multivector.zero(degree))
            assert ce_differential(ce_differential(mix)).max_abs() < 1e-12

    def test_leibniz(self, rng):
        """d(α ∧ β) = dα ∧ β + (-1)^k α ∧ dβ on invariant forms."""
        invariant = invariant_basis()
        alpha = next(f for f in invariant if f.degree == 1)
        beta = OMEGAS[0]
        left = ce_differential(wedge(alpha, beta))
        right = wedge(ce_differential(alpha), beta) - wedge(alpha, ce_differential(beta))
        assert left.allclose(right, atol=1e-12)

    def test_top_degree_rejected(self):
        """A 7-form has no differential."""
        with pytest.raises(DegreeError):
            ce_differential(Multivector.basis(*range(1, 8)))

    def test_invariant_basis_is_invariant(self):
        """Every spanning form is annihilated by the isotropy action."""
        assert all(isotropy_invariant(form) for form in invariant_basis())
        assert not isotropy_invariant(Multivector.basis(4))


class TestMetric:
    """Tests for inner products, the Hodge star and musical maps."""

    def test_rejects_indefinite(self):
        """Non positive definite Gram matrices are rejected."""
        with pytest.raises(DefinitenessError):
            InnerProduct(np.diag([1, 1, 1, 1, 1, 1, -1.0]))
        with pytest.raises(DefinitenessError):
            InnerProduct(np.eye(DIM) + np.triu(np.ones((DIM, DIM)), 1))

    def test_star_of_e123(self):
        """⋆e^{123} = e^{4567} for the identity metric."""
        assert hodge_star(E123, InnerProduct.identity()).allclose(E4567)

    def test_star_involution(self, rng):
        """⋆⋆ = 1 in dimension seven."""
        g = _random_metric(rng)
        for degree in range(DIM + 1):
            alpha = _random_form(rng, degree)
            assert hodge_star(hodge_star(alpha, g), g).allclose(alpha, atol=1e-9)

    def test_star_characterization(self, rng):
        """β ∧ ⋆α = <β, α> vol."""
        g = _random_metric(rng)
        alpha, beta = _random_form(rng, 3), _random_form(rng, 3)
        top = wedge(beta, hodge_star(alpha, g))
        assert top.value() == pytest.approx(inner(beta, alpha, g) * g.vol_coeff, rel=1e-9)

    def test_phi0_norm(self):
        """|φ0|^2 = 7 for the identity metric."""
        assert norm_sq(PHI0, InnerProduct.identity()) == pytest.approx(7.0)

    def test_sharp_flat_inverse(self, rng):
        """sharp and flat are mutually inverse."""
        g = _random_metric(rng)
        v = rng.normal(size=DIM)
        np.testing.assert_allclose(sharp(flat(v, g), g), v, atol=1e-12)
        with pytest.raises(DegreeError):
            sharp(Multivector.basis(1, 2), g)

    def test_codifferential_adjoint(self, rng):
        """<dα, β> = <α, δβ> on invariant forms."""
        g = InnerProduct(np.diag([2.0, 3.0, 5.0, 0.5, 0.5, 0.5, 0.5]))
        alpha = next(f for f in invariant_basis() if f.degree == 2 and f.max_abs() > 0)
        beta = ce_differential(alpha) + wedge(Multivector.basis(1), OMEGAS[1])
        assert inner(ce_differential(alpha), beta, g) == pytest.approx(
            inner(alpha, codifferential(beta, g), g), rel=1e-9, abs=1e-9
        )

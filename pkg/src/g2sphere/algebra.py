"""Lie-algebraic data of sp(2) = sp(1) + p and exterior calculus on p.

The ten basis elements v1, v2, v3, e1, ..., e7 are realized as 8x8 real
matrices (quaternionic 2x2 matrices acting on H^2 by left multiplication):

    v_a = diag(q_a, 0),  e_a = diag(0, q_a),
    e_{3+a} = (1/sqrt 2) [[0, q_a], [q_a, 0]],  e_7 = (1/sqrt 2) [[0, 1], [-1, 0]]

with (q_1, q_2, q_3) = (i, j, k). The bracket is the matrix commutator and
its coefficients are exact integers.

Forms on p are indexed by strictly increasing 1-based tuples, e.g. ``(1, 2, 3)``
for e^{123}, and stored densely over ``itertools.combinations(range(1, 8), k)``.
Wedge and interior product use the determinant convention
(e^{12}(e_1, e_2) = 1, e_1 ⌟ e^{12} = e^2).
"""

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cache, cached_property
from itertools import combinations
from math import comb, sqrt

import numpy as np

from g2sphere.exceptions import DefinitenessError, DegreeError

logger = logging.getLogger(__name__)

DIM = 7
ALGEBRA_DIM = 10
BASIS_LABELS = ("v1", "v2", "v3", "e1", "e2", "e3", "e4", "e5", "e6", "e7")


# ---------------------------------------------------------------------------
# Structure constants
# ---------------------------------------------------------------------------


def _left_mult(a: float, b: float, c: float, d: float) -> np.ndarray:
    """Matrix of x -> q x on H = R^4 for q = a + bi + cj + dk."""
    return np.array(
        [
            [a, -b, -c, -d],
            [b, a, -d, c],
            [c, d, a, -b],
            [d, -c, b, a],
        ],
        dtype=float,
    )


def basis_matrices() -> tuple[np.ndarray, ...]:
    """The ten basis elements of sp(2) as 8x8 real matrices."""
    zero = np.zeros((4, 4))
    one = np.eye(4)
    units = [_left_mult(0, 1, 0, 0), _left_mult(0, 0, 1, 0), _left_mult(0, 0, 0, 1)]

    v = [np.block([[q, zero], [zero, zero]]) for q in units]
    e_low = [np.block([[zero, zero], [zero, q]]) for q in units]
    e_mid = [np.block([[zero, q], [q, zero]]) / sqrt(2) for q in units]
    e7 = np.block([[zero, one], [-one, zero]]) / sqrt(2)
    return (*v, *e_low, *e_mid, e7)


def _coefficients(matrix: np.ndarray, basis: tuple[np.ndarray, ...]) -> np.ndarray:
    # Basis is orthogonal for tr(X Y^t) with |X|^2 = 4
    return np.array([np.trace(matrix @ b.T) / 4.0 for b in basis])


@dataclass(frozen=True, eq=False)
class StructureConstants:
    """Bracket table of sp(2) and its projection onto p.

    ``full_bracket[i, j, k]`` is the coefficient of basis element k in
    [b_i, b_j] for the ordering of ``BASIS_LABELS``; ``p_bracket[a, b, c]`` is
    the coefficient of e_{c+1} in [e_{a+1}, e_{b+1}]_p.
    """

    full_bracket: np.ndarray
    p_bracket: np.ndarray

    @classmethod
    def build(cls) -> "StructureConstants":
        basis = basis_matrices()
        table = np.zeros((ALGEBRA_DIM, ALGEBRA_DIM, ALGEBRA_DIM))
        for i, x in enumerate(basis):
            for j, y in enumerate(basis):
                table[i, j] = _coefficients(x @ y - y @ x, basis)

        exact = np.rint(table).astype(np.int64)
        if not np.allclose(table, exact, atol=1e-12):
            raise RuntimeError("sp(2) structure constants are not integral")

        exact.flags.writeable = False
        p_part = exact[3:, 3:, 3:].copy()
        p_part.flags.writeable = False
        logger.debug("Built sp(2) structure constants")
        return cls(full_bracket=exact, p_bracket=p_part)

    def isotropy_action(self, a: int) -> np.ndarray:
        """Matrix of ad(v_a) restricted to p, columns indexed by e_b (a in 1..3)."""
        return self.full_bracket[a - 1, 3:, 3:].T.astype(float)


@cache
def structure_constants() -> StructureConstants:
    """Cached structure constants of sp(2)."""
    return StructureConstants.build()


def bracket(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bracket of two elements of sp(2) given in the ten-element basis."""
    table = structure_constants().full_bracket
    return np.einsum("i,j,ijk->k", np.asarray(x, float), np.asarray(y, float), table)


def bracket_p(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """p-projection of the bracket of two elements of p (seven components)."""
    table = structure_constants().p_bracket
    return np.einsum("i,j,ijk->k", np.asarray(x, float), np.asarray(y, float), table)


def basis_vector(index: int) -> np.ndarray:
    """Components of e_index (1-based) in p."""
    v = np.zeros(DIM)
    v[index - 1] = 1.0
    return v


# ---------------------------------------------------------------------------
# Index bookkeeping
# ---------------------------------------------------------------------------


@cache
def index_tuples(degree: int) -> tuple[tuple[int, ...], ...]:
    """Strictly increasing 1-based index tuples of the given degree."""
    return tuple(combinations(range(1, DIM + 1), degree))


@cache
def _positions(degree: int) -> dict[tuple[int, ...], int]:
    return {key: pos for pos, key in enumerate(index_tuples(degree))}


def _sort_sign(seq: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Sign of the permutation sorting seq, or 0 when an index repeats."""
    items = list(seq)
    if len(set(items)) != len(items):
        return 0, ()
    sign = 1
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if items[i] > items[j]:
                sign = -sign
    return sign, tuple(sorted(items))


@cache
def _wedge_table(k: int, l: int) -> np.ndarray:
    left, right = index_tuples(k), index_tuples(l)
    target = _positions(k + l)
    table = np.zeros((len(left), len(right), len(target)))
    for i, a in enumerate(left):
        for j, b in enumerate(right):
            sign, merged = _sort_sign(a + b)
            if sign:
                table[i, j, target[merged]] = sign
    logger.debug("Built wedge table for degrees (%d, %d)", k, l)
    return table


@cache
def _contraction_table(k: int) -> np.ndarray:
    source = index_tuples(k)
    target = _positions(k - 1)
    table = np.zeros((DIM, len(source), len(target)))
    for pos, key in enumerate(source):
        for slot, idx in enumerate(key):
            rest = key[:slot] + key[slot + 1 :]
            table[idx - 1, pos, target[rest]] = (-1) ** slot
    return table


@cache
def _complements(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Position of the complement of each k-tuple and the sign of (I, I^c)."""
    target = _positions(DIM - k)
    where = np.zeros(comb(DIM, k), dtype=np.int64)
    signs = np.zeros(comb(DIM, k))
    for pos, key in enumerate(index_tuples(k)):
        rest = tuple(i for i in range(1, DIM + 1) if i not in key)
        sign, _ = _sort_sign(key + rest)
        where[pos] = target[rest]
        signs[pos] = sign
    return where, signs


@cache
def ce_matrix(k: int) -> np.ndarray:
    """Integer matrix of the Chevalley-Eilenberg differential on k-forms.

    dα(X_1, ..., X_{k+1}) = Σ_{i<j} (-1)^{i+j} α([X_i, X_j]_p, X_1, ..^i..^j.., X_{k+1})
    """
    p_bracket = structure_constants().p_bracket
    source = _positions(k)
    rows = index_tuples(k + 1)
    matrix = np.zeros((len(rows), len(source)), dtype=np.int64)
    for row, key in enumerate(rows):
        for i, j in combinations(range(k + 1), 2):
            rest = tuple(key[m] for m in range(k + 1) if m not in (i, j))
            outer = (-1) ** (i + j)
            for c in range(1, DIM + 1):
                coef = p_bracket[key[i] - 1, key[j] - 1, c - 1]
                if coef == 0:
                    continue
                sign, sorted_key = _sort_sign((c, *rest))
                if sign:
                    matrix[row, source[sorted_key]] += outer * sign * coef
    matrix.flags.writeable = False
    logger.debug("Built Chevalley-Eilenberg matrix for degree %d", k)
    return matrix


# ---------------------------------------------------------------------------
# Forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Multivector:
    """Alternating form on p with coefficients in the e-coframe.

    Args:
        degree: Form degree (0..7)
        coeffs: Dense coefficients ordered as ``index_tuples(degree)``
    """

    degree: int
    coeffs: np.ndarray

    # numpy scalars on the left defer to __rmul__
    __array_ufunc__ = None

    def __post_init__(self) -> None:
        if not 0 <= self.degree <= DIM:
            raise DegreeError(f"Form degree must be in 0..{DIM}, got {self.degree}")
        data = np.array(self.coeffs, dtype=float).reshape(-1)
        if data.shape != (comb(DIM, self.degree),):
            raise DegreeError(
                f"Degree {self.degree} form needs {comb(DIM, self.degree)} "
                f"coefficients, got {data.size}"
            )
        data.flags.writeable = False
        object.__setattr__(self, "coeffs", data)

    @classmethod
    def zero(cls, degree: int) -> "Multivector":
        return cls(degree, np.zeros(comb(DIM, degree)))

    @classmethod
    def scalar(cls, value: float) -> "Multivector":
        return cls(0, np.array([value]))

    @classmethod
    def basis(cls, *indices: int, coeff: float = 1.0) -> "Multivector":
        """The monomial coeff * e^{i_1} ∧ ... ∧ e^{i_k}; indices may be unsorted."""
        sign, key = _sort_sign(indices)
        form = np.zeros(comb(DIM, len(indices)))
        if sign:
            form[_positions(len(indices))[key]] = sign * coeff
        return cls(len(indices), form)

    @classmethod
    def from_dict(cls, degree: int, mapping: Mapping[tuple[int, ...], float]) -> "Multivector":
        """Build a form from {index tuple: coefficient}; unsorted keys are reordered with sign."""
        form = np.zeros(comb(DIM, degree))
        positions = _positions(degree)
        for key, value in mapping.items():
            if len(key) != degree:
                raise DegreeError(f"Key {key} does not have degree {degree}")
            sign, sorted_key = _sort_sign(key)
            if sign:
                form[positions[sorted_key]] += sign * value
        return cls(degree, form)

    def to_dict(self, tol: float = 0.0) -> dict[tuple[int, ...], float]:
        """Nonzero coefficients keyed by index tuple."""
        return {
            key: float(value)
            for key, value in zip(index_tuples(self.degree), self.coeffs)
            if abs(value) > tol
        }

    def __getitem__(self, key: tuple[int, ...]) -> float:
        sign, sorted_key = _sort_sign(key)
        if len(key) != self.degree or not sign:
            return 0.0
        return sign * float(self.coeffs[_positions(self.degree)[sorted_key]])

    def _check_same_degree(self, other: "Multivector") -> None:
        if self.degree != other.degree:
            raise DegreeError(f"Cannot combine degree {self.degree} and degree {other.degree} forms")

    def __add__(self, other: "Multivector") -> "Multivector":
        self._check_same_degree(other)
        return Multivector(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "Multivector") -> "Multivector":
        self._check_same_degree(other)
        return Multivector(self.degree, self.coeffs - other.coeffs)

    def __neg__(self) -> "Multivector":
        return Multivector(self.degree, -self.coeffs)

    def __mul__(self, scalar: float) -> "Multivector":
        return Multivector(self.degree, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "Multivector":
        return Multivector(self.degree, self.coeffs / float(scalar))

    def __xor__(self, other: "Multivector") -> "Multivector":
        return wedge(self, other)

    def __repr__(self) -> str:
        terms = ", ".join(f"{k}: {v:.6g}" for k, v in self.to_dict(1e-14).items())
        return f"Multivector(degree={self.degree}, {{{terms}}})"

    def value(self) -> float:
        """Scalar of a 0-form or the e^{1..7} coefficient of a 7-form."""
        if self.degree not in (0, DIM):
            raise DegreeError(f"value() needs a degree 0 or {DIM} form, got {self.degree}")
        return float(self.coeffs[0])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def allclose(self, other: "Multivector", atol: float = 1e-10) -> bool:
        return self.degree == other.degree and bool(
            np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol)
        )


def wedge(alpha: Multivector, beta: Multivector) -> Multivector:
    """Exterior product alpha ∧ beta.

    Raises:
        DegreeError: If deg alpha + deg beta exceeds 7
    """
    total = alpha.degree + beta.degree
    if total > DIM:
        raise DegreeError(f"Wedge of degrees {alpha.degree} and {beta.degree} exceeds {DIM}")
    table = _wedge_table(alpha.degree, beta.degree)
    return Multivector(total, np.einsum("i,j,ijk->k", alpha.coeffs, beta.coeffs, table))


def wedge_all(*forms: Multivector) -> Multivector:
    result = forms[0]
    for form in forms[1:]:
        result = wedge(result, form)
    return result


def contract(v: np.ndarray, alpha: Multivector) -> Multivector:
    """Interior product v ⌟ alpha for a p-vector v (seven components)."""
    if alpha.degree == 0:
        return Multivector.zero(0)
    table = _contraction_table(alpha.degree)
    return Multivector(
        alpha.degree - 1, np.einsum("a,i,aij->j", np.asarray(v, float), alpha.coeffs, table)
    )


def ce_differential(alpha: Multivector) -> Multivector:
    """Invariant exterior derivative from the p-projected bracket.

    Raises:
        DegreeError: If alpha is a 7-form
    """
    if alpha.degree == DIM:
        raise DegreeError("The differential of a top-degree form has no target degree")
    return Multivector(alpha.degree + 1, ce_matrix(alpha.degree) @ alpha.coeffs)


def pullback(alpha: Multivector, matrix: np.ndarray) -> Multivector:
    """Pullback M*alpha for a linear map M of p, (M*alpha)(X, ...) = alpha(MX, ...)."""
    return Multivector(alpha.degree, alpha.coeffs @ compound_matrix(matrix, alpha.degree))


def compound_matrix(matrix: np.ndarray, degree: int) -> np.ndarray:
    """k-th compound: entry (I, J) is det(matrix[I, J])."""
    if degree == 0:
        return np.ones((1, 1))
    idx = np.array(index_tuples(degree)) - 1
    m = np.asarray(matrix, dtype=float)
    minors = m[idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(minors)


def derivation(matrix: np.ndarray, alpha: Multivector) -> Multivector:
    """Extension of an endomorphism A of p to forms as a derivation.

    (A·α)(X_1, ..., X_k) = Σ_i α(X_1, ..., A X_i, ..., X_k)
    """
    a = np.asarray(matrix, dtype=float)
    out: dict[tuple[int, ...], float] = {}
    for key, value in alpha.to_dict().items():
        for slot, idx in enumerate(key):
            for j in range(1, DIM + 1):
                coef = a[idx - 1, j - 1]
                if coef == 0.0:
                    continue
                new_key = key[:slot] + (j,) + key[slot + 1 :]
                out[new_key] = out.get(new_key, 0.0) + value * coef
    return Multivector.from_dict(alpha.degree, out)


def isotropy_invariant(alpha: Multivector, atol: float = 1e-10) -> bool:
    """Whether alpha is annihilated by ad(v_1), ad(v_2), ad(v_3)."""
    constants = structure_constants()
    return all(
        derivation(constants.isotropy_action(a), alpha).max_abs() <= atol for a in (1, 2, 3)
    )


# ---------------------------------------------------------------------------
# Metric
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InnerProduct:
    """Inner product on p with its inverse and volume coefficient.

    Raises:
        DefinitenessError: If gram is not symmetric positive definite
    """

    gram: np.ndarray
    gram_inv: np.ndarray = field(init=False, repr=False)
    vol_coeff: float = field(init=False)

    def __post_init__(self) -> None:
        gram = np.array(self.gram, dtype=float)
        if gram.shape != (DIM, DIM):
            raise ValueError(f"Gram matrix must be {DIM}x{DIM}, got {gram.shape}")
        if not np.allclose(gram, gram.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(gram).max())):
            raise DefinitenessError("Gram matrix is not symmetric")
        gram = (gram + gram.T) / 2
        try:
            np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as e:
            raise DefinitenessError("Gram matrix is not positive definite") from e
        gram.flags.writeable = False
        inverse = np.linalg.inv(gram)
        inverse.flags.writeable = False
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "gram_inv", inverse)
        object.__setattr__(self, "vol_coeff", float(np.sqrt(np.linalg.det(gram))))

    @classmethod
    def identity(cls) -> "InnerProduct":
        return cls(np.eye(DIM))

    @cached_property
    def _form_grams(self) -> dict[int, np.ndarray]:
        return {}

    def form_gram(self, degree: int) -> np.ndarray:
        """Gram matrix of the induced inner product on k-forms (compound of gram_inv)."""
        cache = self._form_grams
        if degree not in cache:
            cache[degree] = compound_matrix(self.gram_inv, degree)
        return cache[degree]

    def volume_form(self) -> Multivector:
        return Multivector(DIM, np.array([self.vol_coeff]))


def inner(alpha: Multivector, beta: Multivector, g: InnerProduct) -> float:
    """Induced inner product of two forms of equal degree."""
    if alpha.degree != beta.degree:
        raise DegreeError(f"Cannot pair degree {alpha.degree} with degree {beta.degree}")
    return float(alpha.coeffs @ g.form_gram(alpha.degree) @ beta.coeffs)


def norm_sq(alpha: Multivector, g: InnerProduct) -> float:
    return inner(alpha, alpha, g)


def hodge_star(alpha: Multivector, g: InnerProduct) -> Multivector:
    """Hodge star with orientation vol = vol_coeff e^{1..7}.

    Characterized by beta ∧ ⋆alpha = <beta, alpha>_g vol.
    """
    k = alpha.degree
    where, signs = _complements(k)
    mixed = g.form_gram(k) @ alpha.coeffs
    out = np.zeros(comb(DIM, DIM - k))
    out[where] = g.vol_coeff * signs * mixed
    return Multivector(DIM - k, out)


def codifferential(alpha: Multivector, g: InnerProduct) -> Multivector:
    """Invariant codifferential, (-1)^k ⋆d⋆ on k-forms in dimension 7."""
    sign = -1.0 if alpha.degree % 2 else 1.0
    return sign * hodge_star(ce_differential(hodge_star(alpha, g)), g)


def sharp(alpha: Multivector, g: InnerProduct) -> np.ndarray:
    """Vector metrically dual to a 1-form."""
    if alpha.degree != 1:
        raise DegreeError(f"sharp needs a 1-form, got degree {alpha.degree}")
    return g.gram_inv @ alpha.coeffs


def flat(v: np.ndarray, g: InnerProduct) -> Multivector:
    """1-form metrically dual to a p-vector."""
    return Multivector(1, g.gram @ np.asarray(v, float))


# ---------------------------------------------------------------------------
# Distinguished forms
# ---------------------------------------------------------------------------

OMEGA1 = Multivector.from_dict(2, {(4, 7): 1.0, (5, 6): 1.0})
OMEGA2 = Multivector.from_dict(2, {(4, 6): 1.0, (5, 7): -1.0})
OMEGA3 = Multivector.from_dict(2, {(4, 5): 1.0, (6, 7): 1.0})
OMEGAS = (OMEGA1, OMEGA2, OMEGA3)
E123 = Multivector.basis(1, 2, 3)
E4567 = Multivector.basis(4, 5, 6, 7)


def coframe(index: int) -> Multivector:
    """The 1-form e^index."""
    return Multivector.basis(index)


def invariant_basis() -> list[Multivector]:
    """Spanning set of Ad(Sp(1))-invariant forms: e^I ∧ {1, ω_1, ω_2, ω_3, e^{4567}}."""
    fibre = [Multivector.scalar(1.0), *OMEGAS, E4567]
    forms = []
    for k in range(4):
        for key in combinations((1, 2, 3), k):
            base = Multivector.basis(*key)
            forms.extend(wedge(base, extra) for extra in fibre)
    return forms

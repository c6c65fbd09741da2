"""Validated parameter sets for invariant G2-structures."""

from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from g2sphere.exceptions import ParameterDomainError
from g2sphere.quaternion import to_unit, upsilon

Quat = tuple[float, float, float, float]
Convention = Literal["intro", "general"]


class _Params(BaseModel):
    model_config = {"frozen": True}  # Parameters are values

    @classmethod
    def create(cls, **values: Any):
        """Construct and validate, reporting failures as ParameterDomainError."""
        try:
            return cls(**values)
        except ValidationError as e:
            raise ParameterDomainError(_first_message(e)) from e


def _first_message(error: ValidationError) -> str:
    details = error.errors()
    if not details:
        return str(error)
    first = details[0]
    where = ".".join(str(part) for part in first.get("loc", ()))
    return f"{where}: {first['msg']}" if where else first["msg"]


class G2Params(_Params):
    """Point (a, D) of R+ x GL+(3, R) parametrizing invariant G2-structures.

    Args:
        a: Positive scale of e^{123}
        D: 3x3 matrix with positive determinant

    Raises:
        ValidationError: If a <= 0 or det D <= 0
    """

    kind: Literal["g2params"] = "g2params"
    a: float = Field(gt=0)
    D: tuple[tuple[float, float, float], tuple[float, float, float], tuple[float, float, float]]

    @field_validator("D")
    @classmethod
    def validate_determinant(cls, v):
        det = float(np.linalg.det(np.array(v, dtype=float)))
        if not np.isfinite(det) or det <= 0:
            raise ValueError(f"det D must be positive, got {det:.6g}")
        return v

    @classmethod
    def of(cls, a: float, D: np.ndarray) -> "G2Params":
        return cls.create(a=float(a), D=tuple(tuple(float(x) for x in row) for row in np.asarray(D)))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.D, dtype=float)

    @property
    def coefficient_matrix(self) -> np.ndarray:
        """E = D^{-1}, the coefficients of e^j ∧ ω_i."""
        return np.linalg.inv(self.matrix)

    def to_g2params(self) -> "G2Params":
        return self


class AnsatzParams(_Params):
    """Ansatz family: scale r > 0 and a unit quaternion h.

    The structure is Φ(r, Υ(h̄)), with metric r^2 on p1+p2+p3 and 1/r on p4.
    """

    kind: Literal["ansatz"] = "ansatz"
    r: float = Field(gt=0)
    h: Quat = (1.0, 0.0, 0.0, 0.0)

    @field_validator("h", mode="before")
    @classmethod
    def validate_unit(cls, v):
        try:
            return tuple(float(x) for x in to_unit(v))
        except ParameterDomainError as e:
            raise ValueError(str(e)) from e

    @property
    def quaternion(self) -> np.ndarray:
        return np.array(self.h)

    def with_h(self, h) -> "AnsatzParams":
        return AnsatzParams.create(r=self.r, h=tuple(h))

    def to_g2params(self) -> G2Params:
        return G2Params.of(self.r, upsilon(self.quaternion).T)

    def to_general(self) -> "GeneralParams":
        """Same structure in the general convention, r_i = r^{1/3}."""
        s = float(np.cbrt(self.r))
        return GeneralParams.create(r1=s, r2=s, r3=s, h=self.h, convention="general")

    def variation_scales(self) -> np.ndarray:
        return np.full(3, self.r)


class GeneralParams(_Params):
    """Family (r1, r2, r3, h) with r1 r2 r3 > 0.

    ``convention="general"`` uses coefficients r1^2/(r2 r3) and (r1 r2 r3)^3 e^{123}
    (metric diag(r_k^6) on p1+p2+p3, (r1 r2 r3)^{-1} on p4); ``"intro"`` uses
    r2 r3/r1^2 and e^{123}/(r1 r2 r3)^3. The two agree under r_i -> 1/r_i.
    """

    kind: Literal["general"] = "general"
    r1: float
    r2: float
    r3: float
    h: Quat = (1.0, 0.0, 0.0, 0.0)
    convention: Convention = "general"

    @field_validator("h", mode="before")
    @classmethod
    def validate_unit(cls, v):
        try:
            return tuple(float(x) for x in to_unit(v))
        except ParameterDomainError as e:
            raise ValueError(str(e)) from e

    @model_validator(mode="after")
    def validate_radii(self) -> "GeneralParams":
        product = self.r1 * self.r2 * self.r3
        if not np.isfinite(product) or product <= 0:
            raise ValueError(f"r1*r2*r3 must be positive, got {product:.6g}")
        return self

    @property
    def radii(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.r3])

    @property
    def quaternion(self) -> np.ndarray:
        return np.array(self.h)

    def with_h(self, h) -> "GeneralParams":
        return self.model_copy(update={"h": tuple(float(x) for x in to_unit(h))})

    def to_convention(self, convention: Convention) -> "GeneralParams":
        """Same structure expressed in the other convention."""
        if convention == self.convention:
            return self
        inv = 1.0 / self.radii
        return GeneralParams.create(r1=inv[0], r2=inv[1], r3=inv[2], h=self.h, convention=convention)

    def general_radii(self) -> np.ndarray:
        """Radii in the general convention."""
        return self.radii if self.convention == "general" else 1.0 / self.radii

    def scale_and_coefficients(self) -> tuple[float, np.ndarray]:
        """(a, c) with φ = a^3 e^{123} + Σ (Υ(h) diag(c))_ij e^j ∧ ω_i."""
        r1, r2, r3 = self.general_radii()
        c = np.array([r1**2 / (r2 * r3), r2**2 / (r1 * r3), r3**2 / (r1 * r2)])
        return float(r1 * r2 * r3), c

    def to_g2params(self) -> G2Params:
        a, c = self.scale_and_coefficients()
        E = upsilon(self.quaternion) @ np.diag(c)
        return G2Params.of(a, np.linalg.inv(E))

    def variation_scales(self) -> np.ndarray:
        """Factors s_k relating ∂k_k to (div T)^♯ components, s_k = r_k^3 (general)."""
        return self.general_radii() ** 3

    def is_ansatz(self, atol: float = 1e-12) -> bool:
        r = self.radii
        return bool(np.allclose(r, r[0], rtol=0.0, atol=atol * max(1.0, abs(r[0]))))


AnyParams = G2Params | AnsatzParams | GeneralParams


def load_params(payload: dict[str, Any]) -> AnyParams:
    """Build parameters from the JSON schema used by the CLI.

    Args:
        payload: Mapping with "kind" in {"g2params", "ansatz", "general"} and
            the fields of that kind

    Returns:
        Validated parameter model

    Raises:
        ParameterDomainError: If the kind is unknown or validation fails
    """
    kind = payload.get("kind")
    models: dict[str, type[_Params]] = {
        "g2params": G2Params,
        "ansatz": AnsatzParams,
        "general": GeneralParams,
    }
    if kind not in models:
        raise ParameterDomainError(f"Unknown parameter kind {kind!r}")
    return models[kind].create(**payload)


def dump_params(params: AnyParams) -> dict[str, Any]:
    return params.model_dump(mode="json")

"""Numerical settings."""

from pydantic import BaseModel, Field, model_validator


class Settings(BaseModel):
    """Numerical settings shared by the library and the CLI.

    Args:
        tolerance: Default comparison tolerance for checks (default: 1e-8)
        zero_eigen_rel: Relative threshold for zero Hessian eigenvalues; an
            eigenvalue counts toward nullity when |λ| <= zero_eigen_rel * max(1, ||H||)
            (default: 1e-7)
        drift_renormalize: Quaternion norm drift above which inputs are
            renormalized (default: 1e-12)
        drift_reject: Quaternion norm drift above which inputs are rejected
            (default: 1e-6)
        flow_dt: Default RK4 step (default: 1e-3)
        flow_t_max: Default flow horizon (default: 10.0)
        scan_r_min: Lower end of the scanned r range (default: 0.4)
        scan_r_max: Upper end of the scanned r range (default: 2.2)
        scan_r_steps: Number of r grid points (default: 64)
        scan_h2_steps: Number of h2 grid points in [0, 1] (default: 32)
        fd_step: Finite-difference step for numeric Hessians (default: 1e-3)
        jobs: Worker processes for scan and verify (default: 1)

    Raises:
        ValidationError: If settings are invalid
    """

    tolerance: float = Field(default=1e-8, gt=0)
    zero_eigen_rel: float = Field(default=1e-7, gt=0)
    drift_renormalize: float = Field(default=1e-12, gt=0)
    drift_reject: float = Field(default=1e-6, gt=0)

    flow_dt: float = Field(default=1e-3, gt=0)
    flow_t_max: float = Field(default=10.0, gt=0)

    # Grid covers the squashed (0.7368) and round (1.2599) radii
    scan_r_min: float = Field(default=0.4, gt=0)
    scan_r_max: float = Field(default=2.2, gt=0)
    scan_r_steps: int = Field(default=64, ge=2)
    scan_h2_steps: int = Field(default=32, ge=2)

    fd_step: float = Field(default=1e-3, gt=0)
    jobs: int = Field(default=1, gt=0)

    model_config = {"frozen": True}  # Settings shouldn't change after creation

    @classmethod
    def from_env(cls, tolerance_var: str = "G2_TOL", jobs_var: str = "G2_JOBS") -> "Settings":
        """Create Settings from environment variables.

        Supported variables:
        - G2_TOL (or custom var name): default comparison tolerance
        - G2_JOBS (or custom var name): worker processes

        Args:
            tolerance_var: Environment variable name for the tolerance (default: "G2_TOL")
            jobs_var: Environment variable name for the worker count (default: "G2_JOBS")

        Returns:
            Settings instance, with defaults for unset variables

        Raises:
            ValueError: If a variable is set but cannot be parsed

        Examples:
            # Looser tolerance for exploratory scans
            G2_TOL="1e-6"
            settings = Settings.from_env()
        """
        import os

        overrides: dict[str, float | int] = {}

        tol = os.getenv(tolerance_var)
        if tol:
            try:
                overrides["tolerance"] = float(tol)
            except ValueError as e:
                raise ValueError(f"{tolerance_var} must be a float, got {tol!r}") from e

        jobs = os.getenv(jobs_var)
        if jobs:
            try:
                overrides["jobs"] = int(jobs)
            except ValueError as e:
                raise ValueError(f"{jobs_var} must be an integer, got {jobs!r}") from e

        return cls(**overrides)

    @model_validator(mode="after")
    def validate_ranges(self) -> "Settings":
        """Ensure paired bounds are ordered."""
        if self.drift_renormalize >= self.drift_reject:
            raise ValueError(
                f"drift_renormalize ({self.drift_renormalize}) must be smaller "
                f"than drift_reject ({self.drift_reject})"
            )
        if self.scan_r_min >= self.scan_r_max:
            raise ValueError(
                f"scan_r_min ({self.scan_r_min}) must be smaller than "
                f"scan_r_max ({self.scan_r_max})"
            )
        return self


DEFAULT_SETTINGS = Settings()

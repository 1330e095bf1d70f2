"""Schemas for the validation suite parameter files."""

from importlib import resources
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

RE_TOLERANCE = 0.02


class ValidationSuiteError(Exception):
    """Raised when a validation suite cannot run (missing or malformed inputs)."""

    pass


class VolumeErrorCase(BaseModel):
    """One cell of a rotating-volume error table.

    Attributes:
        geometry: Body shape; "bunny" reads ``mesh``.
        n: Cells across the body.
        s: Super-sampling factor.
        steps: Rotation steps the volume is averaged over.
        mesh: Mesh file for the "bunny" geometry.
    """

    model_config = ConfigDict(extra="forbid")

    geometry: Literal["cube", "bunny", "blade"] = "cube"
    n: int = Field(..., ge=4, le=80)
    s: int = Field(..., ge=0, le=3)
    steps: int = Field(100, ge=1)
    mesh: Optional[Path] = None

    @model_validator(mode="after")
    def check_mesh(self) -> "VolumeErrorCase":
        if self.geometry == "cube" and self.n % 2:
            raise ValueError(f"cube resolution must be even, got {self.n}")
        return self


class SettlingCase(BaseModel):
    """One oil of the settling-sphere experiment.

    Attributes:
        name: Case label (E1 .. E4).
        reynolds: Labeled Reynolds number, checked against the parameters.
        fluid_density: Oil density in kg/m^3.
        viscosity: Dynamic viscosity in Pa s.
        terminal_velocity: Measured terminal settling velocity in m/s.
        tolerance: Accepted relative error of the maximum settling velocity.
    """

    model_config = ConfigDict(extra="forbid")

    name: str
    reynolds: float = Field(..., gt=0.0)
    fluid_density: float = Field(..., gt=0.0)
    viscosity: float = Field(..., gt=0.0)
    terminal_velocity: float = Field(..., gt=0.0)
    tolerance: float = Field(..., gt=0.0)


class SettlingSuite(BaseModel):
    """Shared geometry of the settling-sphere cases.

    Attributes:
        version: File format version.
        provenance: Source of the parameters.
        sphere_diameter: Sphere diameter in m.
        sphere_density: Sphere density in kg/m^3.
        container: Container size in m (x, y, z).
        release_height: Initial height of the sphere center above the bottom in m.
        gravity: Gravitational acceleration in m/s^2.
        grid: Full-scale lattice extents.
        lattice_velocity: Lattice velocity of the terminal speed, fixes dt.
        supersampling: Super-sampling factor of the sphere.
        cases: The oils.
    """

    model_config = ConfigDict(extra="forbid")

    version: int
    provenance: str
    sphere_diameter: float = Field(..., gt=0.0)
    sphere_density: float = Field(..., gt=0.0)
    container: tuple[float, float, float]
    release_height: float = Field(..., gt=0.0)
    gravity: tuple[float, float, float]
    grid: tuple[int, int, int]
    lattice_velocity: float = Field(..., gt=0.0, lt=0.1)
    supersampling: int = Field(1, ge=0)
    cases: list[SettlingCase]

    @model_validator(mode="after")
    def check_reynolds(self) -> "SettlingSuite":
        for case in self.cases:
            derived = self.reynolds_of(case)
            if abs(derived - case.reynolds) > RE_TOLERANCE * case.reynolds:
                raise ValueError(
                    f"case {case.name}: parameters give Re={derived:.3f}, "
                    f"labeled Re={case.reynolds}"
                )
        return self

    def reynolds_of(self, case: SettlingCase) -> float:
        """rho_f u d / mu from the case parameters."""
        return case.fluid_density * case.terminal_velocity * self.sphere_diameter / case.viscosity

    def case(self, name: str) -> SettlingCase:
        for case in self.cases:
            if case.name.lower() == name.lower():
                return case
        names = [c.name for c in self.cases]
        raise KeyError(f"Unknown settling case {name!r}; choose one of {names}")


def load_settling_suite(path: Optional[str | Path] = None) -> SettlingSuite:
    """Load the settling suite parameters (the bundled file by default).

    Raises:
        ValidationSuiteError: If the file is missing or invalid.
    """
    try:
        if path is None:
            source = resources.files("psmflow.data").joinpath("settling_cases.json")
            text = source.read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return SettlingSuite.model_validate_json(text)
    except (OSError, ValidationError) as exc:
        raise ValidationSuiteError(f"cannot load settling parameters: {exc}") from exc

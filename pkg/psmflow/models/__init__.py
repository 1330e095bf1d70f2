"""State types for the lattice, geometry, bodies and domain."""

from psmflow.models.body import BodyForces, DynamicMotion, PrescribedMotion, RigidBody
from psmflow.models.domain import BoundaryKind, Domain, FaceBoundary, StepReport
from psmflow.models.fields import (
    Coverage,
    FractionField,
    InvalidStateError,
    MacroscopicFields,
    ObjectVelocityField,
    PdfField,
    RelaxationParams,
)
from psmflow.models.mesh import GeometryField, Pose, TriangleMesh
from psmflow.models.stencil import D2Q9, D3Q19, Stencil, get_stencil

__all__ = [
    "BodyForces",
    "BoundaryKind",
    "Coverage",
    "D2Q9",
    "D3Q19",
    "Domain",
    "DynamicMotion",
    "FaceBoundary",
    "FractionField",
    "GeometryField",
    "InvalidStateError",
    "MacroscopicFields",
    "ObjectVelocityField",
    "PdfField",
    "Pose",
    "PrescribedMotion",
    "RelaxationParams",
    "RigidBody",
    "Stencil",
    "StepReport",
    "TriangleMesh",
    "get_stencil",
]

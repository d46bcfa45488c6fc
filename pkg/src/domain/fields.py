"""Discrete fields on a Geometry and the potentials built from them."""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.domain.geometry import Geometry, GeometrySpec, build_geometry
from src.my_util import fingerprint
from src.my_util.errors import SupportViolationError
from src.my_util.my_io import read_array_bundle, write_array_bundle

logger = logging.getLogger(__name__)


class Support(Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    TORUS = "torus"


@dataclass(frozen=True, eq=False)
class GridField:
    """
    Real or complex values on one node set of a Geometry.

    Interior fields may carry a boundary `trace`; torus fields default to the
    geometry's zero-extension torus unless `shape` names another periodic grid.
    """

    geometry: Geometry
    values: np.ndarray
    support: Support = Support.INTERIOR
    trace: Optional[np.ndarray] = None
    shape: Optional[Tuple[int, ...]] = None
    name: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if self.support is Support.TORUS:
            shape = self.shape or self.geometry.torus_shape
            values = values.reshape(shape)
            object.__setattr__(self, "shape", tuple(shape))
        else:
            values = values.ravel()
            expected = (
                self.geometry.interior_count
                if self.support is Support.INTERIOR
                else self.geometry.boundary_count
            )
            if values.size != expected:
                raise ValueError(
                    f"{self.support.value} field needs {expected} values, got {values.size}"
                )
        object.__setattr__(self, "values", values)
        if self.trace is not None:
            if self.support is not Support.INTERIOR:
                raise ValueError("Only interior fields carry a boundary trace")
            trace = np.asarray(self.trace).ravel()
            if trace.size != self.geometry.boundary_count:
                raise ValueError(
                    f"trace needs {self.geometry.boundary_count} values, got {trace.size}"
                )
            object.__setattr__(self, "trace", trace)

    @property
    def is_complex(self) -> bool:
        return bool(np.iscomplexobj(self.values))

    def with_values(self, values: np.ndarray, trace: Optional[np.ndarray] = None) -> "GridField":
        return replace(self, values=values, trace=trace)

    def with_trace(self, trace: np.ndarray) -> "GridField":
        return replace(self, trace=trace)

    def scaled(self, alpha: complex) -> "GridField":
        trace = None if self.trace is None else alpha * self.trace
        return replace(self, values=alpha * self.values, trace=trace)

    def export(self, path: Union[str, Path]) -> Path:
        header = {
            "support": self.support.value,
            "spacing": self.geometry.h,
            "name": self.name,
            "geometry": self.geometry.spec.model_dump(),
        }
        json_path = write_array_bundle(path, self.values, header)
        if self.trace is not None:
            trace_path = Path(json_path).with_name(Path(json_path).stem + "_trace")
            write_array_bundle(trace_path, self.trace, {"support": Support.BOUNDARY.value})
        return json_path

    @classmethod
    def load(cls, path: Union[str, Path], geometry: Optional[Geometry] = None) -> "GridField":
        values, meta = read_array_bundle(path)
        if geometry is None:
            geometry = build_geometry(GeometrySpec.model_validate(meta["geometry"]))
        json_path = Path(path).with_suffix(".json")
        trace_json = json_path.with_name(json_path.stem + "_trace.json")
        trace = read_array_bundle(trace_json)[0] if trace_json.exists() else None
        support = Support(meta["support"])
        shape = tuple(meta["shape"]) if support is Support.TORUS else None
        return cls(geometry, values, support, trace=trace, shape=shape, name=meta.get("name", ""))


def interior_field(geometry: Geometry, values: np.ndarray, name: str = "") -> GridField:
    return GridField(geometry, values, Support.INTERIOR, name=name)


def boundary_field(geometry: Geometry, values: np.ndarray, name: str = "") -> GridField:
    return GridField(geometry, values, Support.BOUNDARY, name=name)


def zero_field(geometry: Geometry, support: Support = Support.INTERIOR, dtype: type = float) -> GridField:
    if support is Support.INTERIOR:
        size: Union[int, Tuple[int, ...]] = geometry.interior_count
    elif support is Support.BOUNDARY:
        size = geometry.boundary_count
    else:
        size = geometry.torus_shape
    return GridField(geometry, np.zeros(size, dtype=dtype), support)


@dataclass(frozen=True, eq=False)
class Potential:
    """A real interior potential with sup-norm budget κ and background q₀."""

    field: GridField
    kappa: float
    background: float = 0.0
    label: str = ""

    def __post_init__(self) -> None:
        if self.field.support is not Support.INTERIOR:
            raise SupportViolationError("A potential lives on interior nodes")
        if self.field.is_complex:
            raise ValueError("A potential must be real-valued")
        peak = float(np.max(np.abs(self.field.values))) if self.field.values.size else 0.0
        if peak > self.kappa * (1.0 + 1e-12):
            raise ValueError(f"max |q| = {peak:.6g} exceeds budget κ = {self.kappa:.6g}")

    @property
    def geometry(self) -> Geometry:
        return self.field.geometry

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @cached_property
    def fingerprint(self) -> str:
        return fingerprint(self.field.values)

    def difference(self, other: "Potential") -> GridField:
        return interior_field(self.geometry, self.values - other.values, name="dq")

    @classmethod
    def constant(cls, geometry: Geometry, value: float, kappa: Optional[float] = None) -> "Potential":
        values = np.full(geometry.interior_count, float(value))
        budget = abs(value) if kappa is None else kappa
        return cls(interior_field(geometry, values, name="q0"), budget, background=float(value))


def admissible_pair(q1: Potential, q2: Potential, tol: float = 0.0) -> bool:
    """True when q₁ − q₂ vanishes on every Ω₁ node."""
    shell = q1.geometry.omega1_mask
    return bool(np.all(np.abs(q1.values[shell] - q2.values[shell]) <= tol))


def bump_potential(
    geometry: Geometry,
    amplitude: float,
    radius: Optional[float] = None,
    center: Optional[Sequence[float]] = None,
    background: float = 0.0,
    kappa: Optional[float] = None,
) -> Potential:
    """
    Background plus a cos² bump compactly supported inside Ω₀.

    Defaults centre the bump in Ω₀ with radius 90% of the smallest half-width.
    """
    bounds = np.asarray(geometry.omega0_bounds)
    mid = bounds.mean(axis=1) if center is None else np.asarray(center, dtype=float)
    if radius is None:
        radius = 0.9 * float(np.min(bounds[:, 1] - bounds[:, 0])) / 2.0
    r = np.linalg.norm(geometry.interior_points - mid, axis=1) / radius
    bump = np.where(r < 1.0, amplitude * np.cos(0.5 * np.pi * r) ** 2, 0.0)
    outside = (bump != 0.0) & geometry.omega1_mask
    if outside.any():
        raise SupportViolationError(
            f"Bump reaches {int(outside.sum())} Ω₁ nodes; shrink radius {radius:.4g}"
        )
    budget = abs(background) + abs(amplitude) if kappa is None else kappa
    logger.debug(f"Bump potential amplitude={amplitude} radius={radius:.4g} centre={mid}")
    return Potential(interior_field(geometry, background + bump, name="q"), budget, background)

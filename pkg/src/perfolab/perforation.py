"""Hole construction: one capacity-matched ball per interior lattice cube.

For a grid level h, every cube of side 1/h whose closure lies in the open
domain receives a concentric ball of radius 1/(2h) (the inscribed
reference ball) and a hole ball whose condenser capacity inside the
reference ball equals the measure's mass on the cube.  Cubes straddling
the boundary are skipped; zero-mass cubes keep a radius-0 record so the
index bookkeeping matches the interior cube list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .measures import Box, MeasureSpec, Rect, mass_on_box
from .operators import EllipticOperator
from .capacity import hole_radius

__all__ = [
    "GridLevel",
    "Hole",
    "HoleFamily",
    "HolesReport",
    "interior_cubes",
    "build_holes",
    "holes_report",
]


@dataclass(frozen=True)
class GridLevel:
    """Interior cube indices of the 1/h lattice, lexicographically sorted."""

    h: int
    indices: tuple[tuple[int, int], ...]

    def boxes(self) -> tuple[Box, ...]:
        return tuple(Box(self.h, i) for i in self.indices)


@dataclass(frozen=True)
class Hole:
    index: tuple[int, int]
    center: tuple[float, float]
    radius: float
    mass: float


@dataclass(frozen=True)
class HoleFamily:
    h: int
    holes: tuple[Hole, ...]
    operator_fingerprint: str

    @property
    def reference_radius(self) -> float:
        return 0.5 / self.h

    def positive(self) -> tuple[Hole, ...]:
        return tuple(hole for hole in self.holes if hole.radius > 0.0)

    def total_mass(self) -> float:
        return sum(hole.mass for hole in self.holes)

    def to_json(self) -> str:
        payload = {
            "h": self.h,
            "operator": self.operator_fingerprint,
            "holes": [
                {
                    "i": list(hole.index),
                    "center": list(hole.center),
                    "radius": hole.radius,
                    "mass": hole.mass,
                }
                for hole in self.holes
            ],
        }
        return json.dumps(payload, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "HoleFamily":
        payload = json.loads(text)
        holes = tuple(
            Hole(
                index=tuple(entry["i"]),
                center=tuple(entry["center"]),
                radius=float(entry["radius"]),
                mass=float(entry["mass"]),
            )
            for entry in payload["holes"]
        )
        return HoleFamily(h=int(payload["h"]), holes=holes, operator_fingerprint=payload["operator"])


@dataclass(frozen=True)
class HolesReport:
    count: int
    positive_count: int
    min_radius: float
    max_radius: float
    total_capacity: float
    mesh_spacing: float
    resolvable: bool


def _strict_range(h: int, lo: float, hi: float) -> range:
    """Integers i with i/h > lo and (i+1)/h < hi, with a 1e-9 touch guard."""
    i_min = math.floor(h * lo + 1e-9) + 1
    i_max = math.floor(h * hi - 1e-9) - 1
    return range(i_min, i_max + 1)


def interior_cubes(domain: Rect, h: int) -> GridLevel:
    """Lattice cubes of side 1/h compactly contained in the open rectangle."""
    if h < 1:
        raise ValueError("grid level h must be a positive integer")
    xs = _strict_range(h, domain.x0, domain.x1)
    ys = _strict_range(h, domain.y0, domain.y1)
    indices = tuple((i1, i2) for i1 in xs for i2 in ys)
    return GridLevel(h=h, indices=indices)


def build_holes(
    domain: Rect,
    mu: MeasureSpec,
    op: EllipticOperator | None = None,
    h: int = 4,
    inversion_tol: float = 1e-6,
) -> HoleFamily:
    """Capacity-match one hole per interior cube to the cube's measure mass."""
    op = op or EllipticOperator.laplace()
    grid = interior_cubes(domain, h)
    ref_radius = 0.5 / h
    holes = []
    for idx in grid.indices:
        box = Box(h, idx)
        mass = mass_on_box(mu, box)
        if mass > 0.0:
            rho = hole_radius(mass, ref_radius, op, tol=inversion_tol, center=box.center)
        else:
            rho = 0.0
        holes.append(Hole(index=idx, center=box.center, radius=rho, mass=mass))
    return HoleFamily(h=h, holes=tuple(holes), operator_fingerprint=op.fingerprint())


def holes_report(family: HoleFamily, mesh_spacing: float) -> HolesReport:
    """Summary statistics plus the resolvability verdict for a mesh spacing.

    A family is resolvable when every positive hole radius spans at least
    two mesh cells.
    """
    positive = family.positive()
    radii = [hole.radius for hole in positive]
    return HolesReport(
        count=len(family.holes),
        positive_count=len(positive),
        min_radius=min(radii) if radii else 0.0,
        max_radius=max(radii) if radii else 0.0,
        total_capacity=family.total_mass(),
        mesh_spacing=mesh_spacing,
        resolvable=all(r >= 2.0 * mesh_spacing for r in radii),
    )

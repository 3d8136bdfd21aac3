"""Solvers for the perforated, relaxed, and corrector problems.

Three variational problems share the P1 machinery:

* the Dirichlet problem on the perforated domain (zero on the outer
  boundary and on every hole, zero-extended into the holes),
* the relaxed problem, where the measure enters as an absorption term
  (stiffness plus measure-weighted mass),
* the per-hole corrector, equal to 1 outside the reference balls, 0 in
  the holes, and the local equilibrium profile in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np
import scipy.sparse as sp

from .errors import GeometryError, ResolutionError
from .measures import MeasureSpec, Rect, _density_is_zero
from .mesh import (
    Field,
    Mesh,
    SolveStats,
    assemble_load,
    assemble_mass,
    assemble_segment_mass,
    assemble_stiffness,
    constrained_solve,
)
from .operators import EllipticOperator
from .perforation import HoleFamily

__all__ = [
    "loads",
    "classify_nodes",
    "solve_dirichlet_perforated",
    "solve_relaxed",
    "corrector_field",
    "energy_functional",
    "field_metrics",
    "FieldMetrics",
    "NODE_INTERIOR",
    "NODE_BOUNDARY",
    "NODE_HOLE",
]

NODE_INTERIOR = 0
NODE_BOUNDARY = 1
NODE_HOLE = 2


# --------------------------------------------------------------------------
# load catalog
# --------------------------------------------------------------------------


def _load_constant(value: float):
    def f(x, y):
        return np.full(np.broadcast(x, y).shape, float(value))

    return f


def _load_product_sine(domain: Rect, amplitude: float = 1.0):
    """amplitude * sin(pi (x-x0)/w) * sin(pi (y-y0)/h); vanishes on the boundary."""

    def f(x, y):
        return (
            amplitude
            * np.sin(np.pi * (np.asarray(x, float) - domain.x0) / domain.width)
            * np.sin(np.pi * (np.asarray(y, float) - domain.y0) / domain.height)
        )

    return f


def _load_bump(cx: float, cy: float, width: float, amplitude: float = 1.0):
    def f(x, y):
        r2 = (np.asarray(x, float) - cx) ** 2 + (np.asarray(y, float) - cy) ** 2
        return amplitude * np.exp(-r2 / width**2)

    return f


loads = SimpleNamespace(
    constant=_load_constant,
    product_sine=_load_product_sine,
    bump=_load_bump,
)


# --------------------------------------------------------------------------
# node classification
# --------------------------------------------------------------------------


def classify_nodes(
    mesh: Mesh, holes: HoleFamily | None = None, pin_nearest: bool = False
) -> np.ndarray:
    """One code per node: interior, domain boundary, or hole-constrained.

    Hole nodes are those strictly inside a positive hole ball.  With
    ``pin_nearest`` a hole too small to capture any node pins the single
    nearest node instead (experimental: it changes the effective capacity).
    """
    codes = np.full(mesh.n_nodes, NODE_INTERIOR, dtype=np.int8)
    codes[mesh.boundary_mask()] = NODE_BOUNDARY
    if holes is None:
        return codes
    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    s = mesh.spacing
    under_resolved = []
    for hole in holes.positive():
        cx, cy = hole.center
        r = hole.radius
        # local bounding-box scan
        i0 = max(0, int((cx - r - mesh.rect.x0) / s) - 1)
        i1 = min(mesh.nx, int((cx + r - mesh.rect.x0) / s) + 2)
        j0 = max(0, int((cy - r - mesh.rect.y0) / s) - 1)
        j1 = min(mesh.ny, int((cy + r - mesh.rect.y0) / s) + 2)
        cols = np.arange(i0, i1 + 1)
        rows = np.arange(j0, j1 + 1)
        ids = (rows[:, None] * (mesh.nx + 1) + cols[None, :]).ravel()
        inside = np.hypot(x[ids] - cx, y[ids] - cy) < r
        if inside.any():
            codes[ids[inside]] = NODE_HOLE
        elif pin_nearest:
            codes[ids[np.argmin(np.hypot(x[ids] - cx, y[ids] - cy))]] = NODE_HOLE
        else:
            under_resolved.append(hole.index)
        if r < 2.0 * s and not pin_nearest:
            under_resolved.append(hole.index)
    if under_resolved:
        raise ResolutionError(
            f"holes {sorted(set(under_resolved))} are under-resolved at spacing {s:g} "
            "(radius must span two cells; pass pin_nearest to override)"
        )
    return codes


# --------------------------------------------------------------------------
# solves
# --------------------------------------------------------------------------


def solve_dirichlet_perforated(
    mesh: Mesh,
    holes: HoleFamily | None,
    op: EllipticOperator,
    f,
    pin_nearest: bool = False,
    rtol: float = 1e-10,
    backend: str = "auto",
    stiffness: sp.csr_matrix | None = None,
) -> tuple[Field, SolveStats]:
    """Dirichlet problem on the domain minus the holes, zero-extended.

    Zero is imposed on the outer boundary and on every node inside a hole
    ball; the remaining SPD system is solved by preconditioned CG to the
    requested relative residual.
    """
    codes = classify_nodes(mesh, holes, pin_nearest=pin_nearest)
    K = stiffness if stiffness is not None else assemble_stiffness(mesh, op)
    b = assemble_load(mesh, f)
    fixed = codes != NODE_INTERIOR
    u, stats = constrained_solve(K, b, fixed, 0.0, rtol=rtol, backend=backend)
    return Field(mesh, u), stats


def measure_mass_matrix(mesh: Mesh, mu: MeasureSpec, restrict=None) -> sp.csr_matrix | None:
    """Matrix of  integral u v dmu  for the diffuse components, or None if zero."""
    M = None
    if not _density_is_zero(mu.density):
        M = assemble_mass(mesh, weight=mu.density, restrict=restrict)
    if mu.segments:
        Mseg = assemble_segment_mass(mesh, mu.segments, restrict=restrict)
        M = Mseg if M is None else M + Mseg
    return M


def solve_relaxed(
    mesh: Mesh,
    mu0: MeasureSpec,
    op: EllipticOperator,
    f,
    rtol: float = 1e-10,
    backend: str = "auto",
    stiffness: sp.csr_matrix | None = None,
) -> tuple[Field, SolveStats]:
    """Measure-damped problem: stiffness plus the mass term of the measure.

    Point atoms are rejected: a point has zero capacity in the plane, so
    an atomic part never constrains fields of finite energy -- only the
    diffuse part of the measure acts in the limit problem.  Decompose the
    measure and pass its diffuse part.
    """
    if mu0.has_atoms:
        raise ValueError(
            "measure has point atoms; atoms carry zero capacity in 2-D and do not "
            "act on the relaxed problem -- pass decompose(mu).mu0"
        )
    K = stiffness if stiffness is not None else assemble_stiffness(mesh, op)
    M = measure_mass_matrix(mesh, mu0)
    A = K if M is None else K + M
    b = assemble_load(mesh, f)
    fixed = mesh.boundary_mask()
    u, stats = constrained_solve(A, b, fixed, 0.0, rtol=rtol, backend=backend)
    return Field(mesh, u), stats


def corrector_field(
    mesh: Mesh,
    holes: HoleFamily,
    op: EllipticOperator,
    pin_nearest: bool = False,
    rtol: float = 1e-10,
) -> Field:
    """The field equal to 1 outside the reference balls and 0 in the holes.

    Inside each reference ball the local equilibrium profile is solved on
    the global mesh restricted to the ball (independent local systems).
    """
    # validate hole resolution up front (same rule as the perforated solve)
    classify_nodes(mesh, holes, pin_nearest=pin_nearest)
    w = np.ones(mesh.n_nodes)
    if not holes.positive():
        return Field(mesh, w)
    K = assemble_stiffness(mesh, op)
    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    s = mesh.spacing
    R = holes.reference_radius
    for hole in holes.positive():
        cx, cy = hole.center
        i0 = max(0, int((cx - R - mesh.rect.x0) / s) - 2)
        i1 = min(mesh.nx, int((cx + R - mesh.rect.x0) / s) + 3)
        j0 = max(0, int((cy - R - mesh.rect.y0) / s) - 2)
        j1 = min(mesh.ny, int((cy + R - mesh.rect.y0) / s) + 3)
        cols = np.arange(i0, i1 + 1)
        rows = np.arange(j0, j1 + 1)
        ids = (rows[:, None] * (mesh.nx + 1) + cols[None, :]).ravel()
        dist = np.hypot(x[ids] - cx, y[ids] - cy)
        in_ball = dist < R
        in_hole = dist < hole.radius
        if not in_hole.any():
            if pin_nearest:
                in_hole[np.argmin(dist)] = True
            else:  # classify_nodes above would have raised already
                continue
        K_sub = K[ids][:, ids].tocsr()
        fixed = ~in_ball | in_hole
        values = np.where(in_hole, 0.0, 1.0)
        local, _ = constrained_solve(K_sub, np.zeros(len(ids)), fixed, values, rtol=rtol)
        w[ids[in_ball]] = local[in_ball]
    return Field(mesh, np.clip(w, 0.0, 1.0))


# --------------------------------------------------------------------------
# functionals and metrics
# --------------------------------------------------------------------------


def energy_functional(
    u: Field,
    mu: MeasureSpec | None,
    op: EllipticOperator,
    stiffness: sp.csr_matrix | None = None,
) -> float:
    """Energy form of the operator plus the measure integral of u squared.

    Atoms are allowed here: the P1 interpolant has point values, so an atom
    contributes its mass times the squared interpolated value.
    """
    K = stiffness if stiffness is not None else assemble_stiffness(u.mesh, op)
    total = float(u.values @ (K @ u.values))
    if mu is None:
        return total
    M = measure_mass_matrix(u.mesh, mu)
    if M is not None:
        total += float(u.values @ (M @ u.values))
    for atom in mu.atoms:
        total += atom.mass * float(u.at(atom.x, atom.y)[0]) ** 2
    return total


@dataclass(frozen=True)
class FieldMetrics:
    l2: float
    h1_semi: float
    linf: float


def field_metrics(
    u: Field,
    v: Field,
    mass: sp.csr_matrix | None = None,
    stiffness: sp.csr_matrix | None = None,
) -> FieldMetrics:
    """L2 norm, plain-gradient seminorm, and max nodal gap of u - v.

    Same-mesh differences are integrated element-exactly.  When the meshes
    differ (same rectangle required), v is interpolated onto u's mesh as a
    P1 field first, which adds that interpolation's O(s^2) error to the
    reported numbers.
    """
    if u.mesh == v.mesh:
        d = u.values - v.values
    else:
        if u.mesh.rect != v.mesh.rect:
            raise GeometryError("fields live on different rectangles")
        d = u.values - v.at(u.mesh.nodes[:, 0], u.mesh.nodes[:, 1])
    M = mass if mass is not None else assemble_mass(u.mesh)
    K = stiffness if stiffness is not None else assemble_stiffness(u.mesh, None)
    return FieldMetrics(
        l2=math.sqrt(max(float(d @ (M @ d)), 0.0)),
        h1_semi=math.sqrt(max(float(d @ (K @ d)), 0.0)),
        linf=float(np.abs(d).max()) if len(d) else 0.0,
    )

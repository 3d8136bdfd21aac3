"""Condenser capacities, equilibrium potentials, and boundary distributions.

Capacity of a condenser (V, U) is the minimum of the operator's energy
form over fields equal to 1 on V and 0 outside U.  Discretely, nodes whose
coordinates lie in the closure of V are pinned to 1, nodes outside the
open set U are pinned to 0, and the pinned P1 system is solved.  The
residual of the unconstrained stiffness operator at the pinned solution
yields the inner and outer equilibrium distributions, whose common total
mass equals the discrete energy exactly (up to solver tolerance) -- the
discrete counterpart of the continuum identity for condenser measures.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, GeometryError, ResolutionError
from .measures import MeasureSpec, Rect, mass_on_rect
from .mesh import (
    Field,
    Mesh,
    assemble_mass,
    assemble_segment_mass,
    assemble_stiffness,
    constrained_solve,
)
from .operators import EllipticOperator

__all__ = [
    "Disk",
    "DiskUnion",
    "Intersection",
    "CapacitaryPotential",
    "cap_concentric_closed_form",
    "cap_variational",
    "capacitary_potential",
    "mu_capacity",
    "hole_radius",
    "boundary_average",
    "poincare_modulus_estimate",
    "smooth_random_fields",
]

CAPACITY_RTOL = 1e-12  # solver tolerance for local condenser systems


# --------------------------------------------------------------------------
# constraint-set geometry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("disk radius must be >= 0")

    def contains(self, x, y):
        """Closure membership."""
        return np.hypot(np.asarray(x) - self.center[0], np.asarray(y) - self.center[1]) <= self.radius

    def contains_open(self, x, y):
        return np.hypot(np.asarray(x) - self.center[0], np.asarray(y) - self.center[1]) < self.radius

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def bounding_square(self) -> Rect:
        cx, cy = self.center
        r = self.radius
        return Rect(cx - r, cy - r, cx + r, cy + r)

    def anchor(self) -> tuple[float, float]:
        return self.center


@dataclass(frozen=True)
class DiskUnion:
    disks: tuple[Disk, ...]

    def __post_init__(self):
        object.__setattr__(self, "disks", tuple(self.disks))

    def contains(self, x, y):
        out = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for d in self.disks:
            out |= d.contains(x, y)
        return out

    @property
    def diameter(self) -> float:
        if not self.disks:
            return 0.0
        lo_x = min(d.center[0] - d.radius for d in self.disks)
        hi_x = max(d.center[0] + d.radius for d in self.disks)
        lo_y = min(d.center[1] - d.radius for d in self.disks)
        hi_y = max(d.center[1] + d.radius for d in self.disks)
        return math.hypot(hi_x - lo_x, hi_y - lo_y)

    def anchor(self) -> tuple[float, float]:
        if not self.disks:
            return (0.0, 0.0)
        return self.disks[0].center


@dataclass(frozen=True)
class Intersection:
    """Set intersection of two constraint regions (e.g. holes clipped to a disk)."""

    a: object
    b: object

    def contains(self, x, y):
        return np.logical_and(_contains_closed(self.a, x, y), _contains_closed(self.b, x, y))

    @property
    def diameter(self) -> float:
        return min(_diameter(self.a), _diameter(self.b))

    def anchor(self) -> tuple[float, float]:
        return self.a.anchor() if hasattr(self.a, "anchor") else (0.0, 0.0)


def _contains_closed(region, x, y):
    if isinstance(region, Rect):
        return region.contains_closed(x, y)
    return region.contains(x, y)


def _contains_open(region, x, y):
    if isinstance(region, Rect):
        return region.contains_open(x, y)
    return region.contains_open(x, y)


def _diameter(region) -> float:
    return region.diameter


def _bounding_square(region) -> Rect:
    if isinstance(region, Rect):
        side = max(region.width, region.height)
        cx, cy = region.center
        return Rect(cx - side / 2, cy - side / 2, cx + side / 2, cy + side / 2)
    if isinstance(region, Disk):
        return region.bounding_square()
    raise TypeError(f"outer set must be a Disk or Rect, got {type(region).__name__}")


def _inside_open(inner, outer) -> bool:
    """Closure of inner contained in the open outer set (exact per catalog pair)."""
    if isinstance(inner, DiskUnion):
        return all(_inside_open(d, outer) for d in inner.disks)
    if isinstance(inner, Intersection):
        return _inside_open(inner.a, outer) or _inside_open(inner.b, outer)
    if isinstance(inner, Disk):
        cx, cy = inner.center
        if isinstance(outer, Disk):
            dist = math.hypot(cx - outer.center[0], cy - outer.center[1])
            return dist + inner.radius < outer.radius
        if isinstance(outer, Rect):
            return (
                cx - inner.radius > outer.x0
                and cx + inner.radius < outer.x1
                and cy - inner.radius > outer.y0
                and cy + inner.radius < outer.y1
            )
    if isinstance(inner, Rect):
        corners = [(inner.x0, inner.y0), (inner.x1, inner.y0), (inner.x0, inner.y1), (inner.x1, inner.y1)]
        return all(bool(_contains_open(outer, x, y)) for x, y in corners)
    raise TypeError(f"unsupported inner region {type(inner).__name__}")


def _subset(inner, outer) -> bool:
    """Non-strict containment (closure of inner within closure of outer)."""
    if isinstance(inner, DiskUnion):
        return all(_subset(d, outer) for d in inner.disks)
    if isinstance(inner, Intersection):
        return _subset(inner.a, outer) or _subset(inner.b, outer)
    if isinstance(inner, Disk):
        cx, cy = inner.center
        if isinstance(outer, Disk):
            dist = math.hypot(cx - outer.center[0], cy - outer.center[1])
            return dist + inner.radius <= outer.radius + 1e-12
        if isinstance(outer, Rect):
            return (
                cx - inner.radius >= outer.x0 - 1e-12
                and cx + inner.radius <= outer.x1 + 1e-12
                and cy - inner.radius >= outer.y0 - 1e-12
                and cy + inner.radius <= outer.y1 + 1e-12
            )
    if isinstance(inner, Rect):
        corners = [(inner.x0, inner.y0), (inner.x1, inner.y0), (inner.x0, inner.y1), (inner.x1, inner.y1)]
        return all(bool(_contains_closed(outer, x, y)) for x, y in corners)
    raise TypeError(f"unsupported inner region {type(inner).__name__}")


# --------------------------------------------------------------------------
# closed forms
# --------------------------------------------------------------------------


def cap_concentric_closed_form(rho: float, r: float, n: int = 2) -> float:
    """Harmonic capacity of concentric balls B_rho inside B_r.

    2*pi / log(r/rho) in the plane, 4*pi / (1/rho - 1/r) in space; an empty
    hole has zero capacity.
    """
    if n not in (2, 3):
        raise ValueError("dimension n must be 2 or 3")
    if rho < 0 or r <= 0 or rho >= r:
        raise ValueError(f"need 0 <= rho < r, got rho={rho:g}, r={r:g}")
    if rho == 0.0:
        return 0.0
    if n == 2:
        return 2.0 * math.pi / math.log(r / rho)
    return 4.0 * math.pi / (1.0 / rho - 1.0 / r)


# --------------------------------------------------------------------------
# variational solves
# --------------------------------------------------------------------------


def _condenser_system(V, U, op: EllipticOperator, resolution: float, allow_pin: bool):
    if not _inside_open(V, U):
        raise GeometryError("inner set must be compactly contained in the outer set")
    box = _bounding_square(U)
    n_cells = max(2, math.ceil(box.width / resolution - 1e-9))
    mesh = Mesh(box, n_cells, n_cells)
    s = mesh.spacing
    diam_v = _diameter(V)
    if diam_v < 4.0 * s and not allow_pin:
        raise ResolutionError(
            f"inner set diameter {diam_v:g} under-resolved at spacing {s:g} "
            "(need at least 4 cells across)"
        )
    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    fixed1 = np.asarray(_contains_closed(V, x, y), bool)
    if not fixed1.any():
        if not allow_pin:
            raise ResolutionError("no mesh node falls inside the inner set")
        ax, ay = V.anchor()
        fixed1[np.argmin(np.hypot(x - ax, y - ay))] = True
    fixed0 = ~np.asarray(_contains_open(U, x, y), bool)
    if (fixed1 & fixed0).any():
        raise GeometryError("inner and outer constraint sets overlap on mesh nodes")
    K = assemble_stiffness(mesh, op)
    fixed = fixed1 | fixed0
    values = np.where(fixed1, 1.0, 0.0)
    u, stats = constrained_solve(K, np.zeros(mesh.n_nodes), fixed, values, rtol=CAPACITY_RTOL)
    return mesh, K, u, fixed1, fixed0, stats


def cap_variational(
    V, U, op: EllipticOperator | None = None, resolution: float = None, allow_pin: bool = False
) -> float:
    """Discrete condenser capacity of V in U for the operator's energy form.

    Conforming P1 minimization; the value converges to the capacity from
    above under mesh refinement, up to the first-order geometric error of
    pinning by node containment.  ``allow_pin`` permits an under-resolved
    inner set by pinning the single node nearest its anchor.
    """
    op = op or EllipticOperator.laplace()
    if resolution is None:
        resolution = _diameter(U) / 128.0
    _, K, u, _, _, _ = _condenser_system(V, U, op, resolution, allow_pin=allow_pin)
    return float(u @ (K @ u))


@dataclass
class CapacitaryPotential:
    """Equilibrium potential of a condenser with its boundary mass vectors.

    ``gamma`` lives on the pinned-to-1 nodes (inner distribution), ``nu``
    on the pinned-to-0 nodes (outer distribution); both sum to the
    capacity.  ``w`` is clamped to [0, 1] for storage; energy and residual
    identities are computed before clamping.
    """

    w: Field
    gamma: np.ndarray
    nu: np.ndarray
    cap_value: float
    inner_mask: np.ndarray
    outer_mask: np.ndarray

    @property
    def mesh(self) -> Mesh:
        return self.w.mesh


def capacitary_potential(
    V,
    U,
    op: EllipticOperator | None = None,
    resolution: float = None,
    allow_pin: bool = False,
) -> CapacitaryPotential:
    """Equilibrium potential of V with respect to U plus its distributions."""
    op = op or EllipticOperator.laplace()
    if resolution is None:
        resolution = _diameter(U) / 128.0
    mesh, K, u, fixed1, fixed0, _ = _condenser_system(V, U, op, resolution, allow_pin)
    residual = K @ u
    gamma = np.where(fixed1, residual, 0.0)
    nu = np.where(fixed0, -residual, 0.0)
    cap = float(u @ residual)
    w = Field(mesh, np.clip(u, 0.0, 1.0))
    return CapacitaryPotential(w=w, gamma=gamma, nu=nu, cap_value=cap, inner_mask=fixed1, outer_mask=fixed0)


def boundary_average(u, pot: CapacitaryPotential) -> float:
    """Weighted average of u against the outer distribution of the condenser.

    A convex combination of nodal values on the outer boundary; reproduces
    constants exactly.
    """
    values = u.values if isinstance(u, Field) else np.asarray(u, float)
    if values.shape != (pot.mesh.n_nodes,):
        raise ValueError("field is not defined on the potential's mesh")
    total = float(pot.nu.sum())
    if total <= 0.0:
        raise ValueError("degenerate potential: outer distribution has no mass")
    return float(pot.nu @ values) / total


def mu_capacity(
    E,
    A,
    mu: MeasureSpec | None,
    op: EllipticOperator | None = None,
    resolution: float = None,
    infinite_on_E: bool = False,
) -> float:
    """Measure-weighted capacity of E in A.

    Minimum of  energy(u) + integral_E u^2 dmu  over u equal to 1 outside
    A -- a single positive semidefinite solve in v = u - 1.  With the
    infinity flag the measure is replaced by the hard constraint u = 0 on
    E, which reproduces the plain condenser capacity (and is solved as the
    identical discrete system).
    """
    op = op or EllipticOperator.laplace()
    if resolution is None:
        resolution = _diameter(A) / 128.0
    if E is None or (isinstance(E, DiskUnion) and not E.disks):
        return 0.0
    if not _subset(E, A):
        raise GeometryError("E must be contained in A")
    if infinite_on_E:
        return cap_variational(E, A, op, resolution)
    if mu is None:
        mu = MeasureSpec()
    x_probe = np.array([a.x for a in mu.atoms])
    y_probe = np.array([a.y for a in mu.atoms])
    if len(x_probe) and bool(np.any(_contains_closed(E, x_probe, y_probe))):
        raise ValueError(
            "mu has atoms on E; point masses do not enter the quadratic form "
            "(use the infinity flag for hard constraints)"
        )
    box = _bounding_square(A)
    n_cells = max(2, math.ceil(box.width / resolution - 1e-9))
    mesh = Mesh(box, n_cells, n_cells)
    K = assemble_stiffness(mesh, op)
    from .measures import _density_is_zero

    M = None
    if not _density_is_zero(mu.density):
        M = assemble_mass(mesh, weight=mu.density, restrict=_Region(E))
    if mu.segments:
        Mseg = assemble_segment_mass(mesh, mu.segments, restrict=_Region(E))
        M = Mseg if M is None else M + Mseg
    if M is None:
        return 0.0
    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    fixed = ~np.asarray(_contains_open(A, x, y), bool)
    ones = np.ones(mesh.n_nodes)
    v, _ = constrained_solve(K + M, -(M @ ones), fixed, 0.0, rtol=CAPACITY_RTOL)
    u = ones + v
    return float(v @ (K @ v) + u @ (M @ u))


class _Region:
    """Adapter giving any constraint region the indicator interface."""

    def __init__(self, region):
        self.region = region

    def contains(self, x, y):
        return _contains_closed(self.region, x, y)


# --------------------------------------------------------------------------
# capacity inversion
# --------------------------------------------------------------------------

_radius_cache: dict = {}
_radius_lock = threading.Lock()


def hole_radius(
    target: float,
    r: float,
    op: EllipticOperator | None = None,
    tol: float = 1e-6,
    center: tuple[float, float] = (0.0, 0.0),
    resolution: float = None,
) -> float:
    """Radius rho with cap(B_rho, B_r) equal to the target, in [0, r).

    Exact inversion of the plane closed form when the coefficient is a
    scalar multiple of the identity; monotone bisection on the variational
    capacity otherwise (solved on a local mesh around ``center`` so that
    spatially varying coefficients are sampled where the condenser sits).
    """
    op = op or EllipticOperator.laplace()
    if math.isinf(target):
        raise ValueError("infinite target capacity: no ball of finite radius matches it")
    if target < 0:
        raise ValueError("target capacity must be >= 0")
    if r <= 0:
        raise ValueError("reference radius must be > 0")
    if target == 0.0:
        return 0.0
    scale = op.constant_scale_or_none()
    if scale is not None:
        return r * math.exp(-2.0 * math.pi * scale / target)

    key = (op.fingerprint(), center if op.varies_in_space else None, r, target, tol, resolution)
    with _radius_lock:
        if key in _radius_cache:
            return _radius_cache[key]
    res = resolution if resolution is not None else r / 64.0
    outer = Disk(center, r)

    def cap_at(rho: float) -> float:
        return cap_variational(Disk(center, rho), outer, op, res, allow_pin=True)

    # The discrete capacity is a step function of rho (nodes are captured in
    # jumps), so bisection alone cannot reach fine tolerances.  Bracket the
    # target between adjacent capture steps, then invert the scalar model
    # 1/cap = a + b*log(1/rho), which is exact for coefficients proportional
    # to the identity.  The result is accurate to the discretization of the
    # underlying capacity evaluations, not to machine precision.
    lo, hi = 1e-6 * r, r * (1.0 - 1e-9)
    cap_lo = cap_at(lo)
    cap_hi = cap_at(hi)
    if target <= cap_lo:
        pair = ((lo, cap_lo), (hi, cap_hi))
    elif target >= cap_hi:
        raise ConvergenceFailure(
            f"target capacity {target:g} exceeds the largest representable hole's {cap_hi:g}"
        )
    else:
        result = None
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            c = cap_at(mid)
            if abs(c - target) <= tol * max(target, 1e-12):
                result = mid
                break
            if c < target:
                lo, cap_lo = mid, c
            else:
                hi, cap_hi = mid, c
            if hi - lo <= 0.25 * _mesh_spacing_for(outer, res):
                break
        if result is not None:
            with _radius_lock:
                _radius_cache[key] = result
            return result
        pair = ((lo, cap_lo), (hi, cap_hi))
    (r_a, c_a), (r_b, c_b) = pair
    while c_a == c_b and r_a > 1e-9 * r:  # both probes on one capture step
        r_a *= 0.5
        c_a = cap_at(r_a)
    x_a, x_b = math.log(r / r_a), math.log(r / r_b)
    if c_a <= 0 or c_b <= 0 or c_a == c_b:
        raise ConvergenceFailure(f"capacity inversion failed for target {target:g}")
    b = (1.0 / c_b - 1.0 / c_a) / (x_b - x_a)
    a = 1.0 / c_a - b * x_a
    x_t = (1.0 / target - a) / b
    rho = min(max(r * math.exp(-x_t), 0.0), r * (1.0 - 1e-9))
    with _radius_lock:
        _radius_cache[key] = rho
    return rho


def _mesh_spacing_for(outer: Disk, resolution: float) -> float:
    side = outer.bounding_square().width
    return side / max(2, math.ceil(side / resolution - 1e-9))


# --------------------------------------------------------------------------
# oscillation modulus of the cube averages
# --------------------------------------------------------------------------


def smooth_random_fields(seed: int, count: int, center: tuple[float, float], halfwidth: float):
    """Deterministic corpus of smooth test fields on a cube, constant first.

    Each non-constant member is a short random cosine series with
    frequencies on the cube scale; the corpus is reproducible from the
    seed alone and independent of any mesh.
    """
    rng = np.random.default_rng(seed)
    cx, cy = center
    fields = [lambda x, y: np.ones(np.broadcast(x, y).shape)]
    for _ in range(max(0, count - 1)):
        n_modes = 3
        amps = rng.normal(0.0, 1.0, n_modes)
        ks = rng.integers(0, 4, size=(n_modes, 2))
        ks[np.all(ks == 0, axis=1), 0] = 1
        phases = rng.uniform(0.0, 2.0 * math.pi, size=(n_modes, 2))

        def u(x, y, amps=amps, ks=ks, phases=phases):
            x = (np.asarray(x, float) - cx) / halfwidth
            y = (np.asarray(y, float) - cy) / halfwidth
            out = np.zeros(np.broadcast(x, y).shape)
            for a, (k1, k2), (p1, p2) in zip(amps, ks, phases):
                out += a * np.cos(0.5 * math.pi * k1 * x + p1) * np.cos(0.5 * math.pi * k2 * y + p2)
            return out

        fields.append(u)
    return fields


def poincare_modulus_estimate(
    mu: MeasureSpec,
    r: float,
    center: tuple[float, float],
    op: EllipticOperator | None = None,
    corpus_size: int = 32,
    cells: int = 96,
    seed: int = 0,
) -> float:
    """Empirical modulus of the measure-weighted cube oscillation bound.

    Builds the ball radius the perforation would assign to the cube of
    half-side r around the center, forms the condenser average M over the
    outer distribution, and returns the supremum over a deterministic
    corpus of smooth fields of

        ||u - M u||_{L^2_mu(cube)} / ||grad u||_{L^2(cube)}.

    A zero-mass cube returns 0 (the weighted numerator vanishes for any
    average convention).
    """
    op = op or EllipticOperator.laplace()
    cube = Rect.cube(center, r)
    if mu.atoms_in(cube):
        raise ValueError("cube carries atoms; the weighted oscillation bound needs an atom-free measure")
    mass = mass_on_rect(mu, cube)
    if mass == 0.0:
        return 0.0
    rho = hole_radius(mass, r, op, center=center)
    pot = capacitary_potential(
        Disk(center, rho), Disk(center, r), op, resolution=2.0 * r / cells, allow_pin=True
    )
    mesh = pot.mesh
    from .measures import _density_is_zero

    M = None
    if not _density_is_zero(mu.density):
        M = assemble_mass(mesh, weight=mu.density, restrict=cube)
    if mu.segments:
        Mseg = assemble_segment_mass(mesh, mu.segments, restrict=cube)
        M = Mseg if M is None else M + Mseg
    if M is None:
        return 0.0
    K = assemble_stiffness(mesh, None)
    worst = 0.0
    for f in smooth_random_fields(seed, corpus_size, center, r):
        nodal = np.asarray(f(mesh.nodes[:, 0], mesh.nodes[:, 1]), float)
        d = nodal - boundary_average(nodal, pot)
        den2 = float(d @ (K @ d))
        if den2 <= 1e-24:
            continue  # constants contribute zero by construction
        num2 = float(d @ (M @ d))
        worst = max(worst, math.sqrt(max(num2, 0.0) / den2))
    return worst

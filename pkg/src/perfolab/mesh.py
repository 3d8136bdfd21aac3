"""Structured triangular meshes, P1 assembly, and the SPD solver.

The mesh is a uniform grid over a rectangle, each cell split into two
triangles with the diagonal direction alternating by cell parity to avoid
a preferred direction.  Assembly is vectorized over elements; systems are
solved by preconditioned conjugate gradients (Jacobi for small systems,
an algebraic-multigrid V-cycle for large ones).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceFailure
from .measures import Rect, Segment, _gauss_rule, _segment_clip

__all__ = [
    "Mesh",
    "Field",
    "SolveStats",
    "assemble_stiffness",
    "assemble_mass",
    "assemble_load",
    "assemble_segment_mass",
    "solve_spd",
    "constrained_solve",
]

AMG_THRESHOLD = 100_000  # unknowns; above this Jacobi-PCG is too slow at rtol 1e-10
_ASSEMBLY_CHUNK = 400_000  # elements per assembly batch, bounds peak memory


class Mesh:
    """Uniform grid on a closed rectangle, two triangles per cell.

    Nodes are numbered row-major (x fastest).  Cell (i, j) with i + j even
    splits along the SW-NE diagonal, otherwise along SE-NW.
    """

    def __init__(self, rect: Rect, nx: int, ny: int):
        if nx < 1 or ny < 1:
            raise ValueError("mesh needs at least one cell per direction")
        sx = rect.width / nx
        sy = rect.height / ny
        if abs(sx - sy) > 1e-9 * max(sx, sy):
            raise ValueError(f"non-square cells: spacing {sx:g} x {sy:g}")
        self.rect = rect
        self.nx = int(nx)
        self.ny = int(ny)
        self.spacing = sx
        xs = rect.x0 + sx * np.arange(nx + 1)
        ys = rect.y0 + sy * np.arange(ny + 1)
        X, Y = np.meshgrid(xs, ys, indexing="xy")
        self.nodes = np.column_stack([X.ravel(), Y.ravel()])
        self.n_nodes = (nx + 1) * (ny + 1)
        self.triangles = self._build_triangles()

    @classmethod
    def from_spacing(cls, rect: Rect, spacing: float) -> "Mesh":
        nx = round(rect.width / spacing)
        ny = round(rect.height / spacing)
        if nx < 1 or ny < 1:
            raise ValueError("spacing larger than the domain")
        if abs(nx * spacing - rect.width) > 1e-9 * rect.width or abs(
            ny * spacing - rect.height
        ) > 1e-9 * rect.height:
            raise ValueError(
                f"spacing {spacing:g} does not divide the side lengths "
                f"{rect.width:g} x {rect.height:g}"
            )
        return cls(rect, nx, ny)

    def _build_triangles(self) -> np.ndarray:
        nx, ny = self.nx, self.ny
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        i = i.ravel()
        j = j.ravel()
        sw = j * (nx + 1) + i
        se = sw + 1
        nw = sw + (nx + 1)
        ne = nw + 1
        even = (i + j) % 2 == 0
        t = np.empty((2 * nx * ny, 3), dtype=np.int32)
        # even cells: diagonal SW-NE -> (sw, se, ne), (sw, ne, nw)
        # odd cells:  diagonal SE-NW -> (sw, se, nw), (se, ne, nw)
        t[0::2, 0] = sw
        t[0::2, 1] = se
        t[0::2, 2] = np.where(even, ne, nw)
        t[1::2, 0] = np.where(even, sw, se)
        t[1::2, 1] = ne
        t[1::2, 2] = nw
        return t

    # -- node sets ----------------------------------------------------------

    def boundary_mask(self) -> np.ndarray:
        x = self.nodes[:, 0]
        y = self.nodes[:, 1]
        eps = 1e-12 * max(self.rect.width, self.rect.height)
        return (
            (np.abs(x - self.rect.x0) <= eps)
            | (np.abs(x - self.rect.x1) <= eps)
            | (np.abs(y - self.rect.y0) <= eps)
            | (np.abs(y - self.rect.y1) <= eps)
        )

    # -- point location and interpolation ------------------------------------

    def locate(self, px: np.ndarray, py: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Containing triangle index and barycentric weights for points.

        Points outside the rectangle are clamped to the nearest cell.
        """
        s = self.spacing
        fx = (np.asarray(px, float) - self.rect.x0) / s
        fy = (np.asarray(py, float) - self.rect.y0) / s
        i = np.clip(np.floor(fx).astype(np.int64), 0, self.nx - 1)
        j = np.clip(np.floor(fy).astype(np.int64), 0, self.ny - 1)
        xi = fx - i
        eta = fy - j
        cell = j * self.nx + i
        even = (i + j) % 2 == 0
        upper = np.where(even, eta > xi, xi + eta > 1.0)
        tri = 2 * cell + upper
        v = self.triangles[tri]
        x1 = self.nodes[v[:, 0], 0]
        y1 = self.nodes[v[:, 0], 1]
        x2 = self.nodes[v[:, 1], 0]
        y2 = self.nodes[v[:, 1], 1]
        x3 = self.nodes[v[:, 2], 0]
        y3 = self.nodes[v[:, 2], 1]
        det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
        l2 = ((np.asarray(px) - x1) * (y3 - y1) - (x3 - x1) * (np.asarray(py) - y1)) / det
        l3 = ((x2 - x1) * (np.asarray(py) - y1) - (np.asarray(px) - x1) * (y2 - y1)) / det
        l1 = 1.0 - l2 - l3
        return tri, np.stack([l1, l2, l3], axis=-1)

    def interpolate(self, values: np.ndarray, px, py) -> np.ndarray:
        px = np.atleast_1d(np.asarray(px, float))
        py = np.atleast_1d(np.asarray(py, float))
        tri, lam = self.locate(px, py)
        v = self.triangles[tri]
        return np.einsum("pk,pk->p", values[v], lam)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Mesh)
            and self.rect == other.rect
            and self.nx == other.nx
            and self.ny == other.ny
        )

    def __repr__(self) -> str:
        return f"Mesh({self.rect}, {self.nx}x{self.ny}, s={self.spacing:g})"


@dataclass
class Field:
    """Continuous piecewise-linear scalar field given by nodal values."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError("field values must be one real per mesh node")

    def at(self, px, py) -> np.ndarray:
        return self.mesh.interpolate(self.values, px, py)

    def save_csv(self, path) -> None:
        """Header row nx,ny,spacing,ox,oy then one grid row of values per line."""
        m = self.mesh
        with open(path, "w") as fh:
            fh.write(f"{m.nx},{m.ny},{m.spacing!r},{m.rect.x0!r},{m.rect.y0!r}\n")
            grid = self.values.reshape(m.ny + 1, m.nx + 1)
            for row in grid:
                fh.write(",".join(repr(v) for v in row) + "\n")

    def save_binary(self, path) -> None:
        """Little-endian: int64 nx, ny; float64 spacing, ox, oy; float64 values row-major."""
        m = self.mesh
        with open(path, "wb") as fh:
            np.array([m.nx, m.ny], dtype="<i8").tofile(fh)
            np.array([m.spacing, m.rect.x0, m.rect.y0], dtype="<f8").tofile(fh)
            self.values.astype("<f8").tofile(fh)

    @staticmethod
    def load_csv(path) -> "Field":
        with open(path) as fh:
            head = fh.readline().strip().split(",")
            nx, ny = int(head[0]), int(head[1])
            spacing, ox, oy = float(head[2]), float(head[3]), float(head[4])
            vals = np.loadtxt(fh, delimiter=",").reshape(-1)
        rect = Rect(ox, oy, ox + nx * spacing, oy + ny * spacing)
        return Field(Mesh(rect, nx, ny), vals)

    @staticmethod
    def load_binary(path) -> "Field":
        with open(path, "rb") as fh:
            nx, ny = np.fromfile(fh, dtype="<i8", count=2)
            spacing, ox, oy = np.fromfile(fh, dtype="<f8", count=3)
            vals = np.fromfile(fh, dtype="<f8", count=(nx + 1) * (ny + 1))
        rect = Rect(ox, oy, ox + nx * spacing, oy + ny * spacing)
        return Field(Mesh(rect, int(nx), int(ny)), vals)


@dataclass
class SolveStats:
    iterations: int
    relative_residual: float
    wall_time: float


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------


def _element_geometry(mesh: Mesh, tri_slice: slice):
    v = mesh.triangles[tri_slice]
    p = mesh.nodes[v]  # (E, 3, 2)
    x = p[:, :, 0]
    y = p[:, :, 1]
    # b_i = y_j - y_k, c_i = x_k - x_j (cyclic)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    return v, x, y, b, c, area


def _accumulate(blocks, n_nodes: int) -> sp.csr_matrix:
    total = None
    for rows, cols, data in blocks:
        part = sp.coo_matrix(
            (data.ravel(), (rows.ravel(), cols.ravel())), shape=(n_nodes, n_nodes)
        ).tocsr()
        total = part if total is None else total + part
    total.sum_duplicates()
    return total


def assemble_stiffness(mesh: Mesh, op=None) -> sp.csr_matrix:
    """Stiffness matrix of the form  integral (A grad u).(grad v).

    ``op`` is an EllipticOperator or None for the plain Laplace form.  The
    coefficient is sampled at element centroids (exact for constant A).
    """

    def blocks():
        n_el = mesh.triangles.shape[0]
        for start in range(0, n_el, _ASSEMBLY_CHUNK):
            sl = slice(start, min(start + _ASSEMBLY_CHUNK, n_el))
            v, x, y, b, c, area = _element_geometry(mesh, sl)
            if op is None or op.is_laplace:
                a11 = a22 = 1.0
                a12 = 0.0
            else:
                cx = x.mean(axis=1)
                cy = y.mean(axis=1)
                a11, a12, a22 = op.coeff_at(cx, cy)
                a11 = a11[:, None, None]
                a12 = a12[:, None, None]
                a22 = a22[:, None, None]
            bb = b[:, :, None] * b[:, None, :]
            cc = c[:, :, None] * c[:, None, :]
            bc = b[:, :, None] * c[:, None, :] + c[:, :, None] * b[:, None, :]
            k = (a11 * bb + a12 * bc + a22 * cc) / (4.0 * area)[:, None, None]
            rows = np.broadcast_to(v[:, :, None], k.shape)
            cols = np.broadcast_to(v[:, None, :], k.shape)
            yield rows, cols, k

    return _accumulate(blocks(), mesh.n_nodes)


def assemble_mass(mesh: Mesh, weight=None, restrict=None) -> sp.csr_matrix:
    """Mass matrix  integral w u v, with w sampled at edge midpoints.

    ``weight`` is a callable w(x, y) or None for the exact unit-weight P1
    matrix.  ``restrict`` is an optional indicator region (an object with a
    ``contains`` method); quadrature points outside it contribute nothing.
    The midpoint rule is exact for quadratic integrands, so for constant
    weight this is the exact P1 mass matrix.
    """

    def blocks():
        n_el = mesh.triangles.shape[0]
        for start in range(0, n_el, _ASSEMBLY_CHUNK):
            sl = slice(start, min(start + _ASSEMBLY_CHUNK, n_el))
            v, x, y, b, c, area = _element_geometry(mesh, sl)
            # edge midpoints m01, m02, m12 (m_ab between local nodes a, b)
            mx = np.stack([(x[:, 0] + x[:, 1]) / 2, (x[:, 0] + x[:, 2]) / 2, (x[:, 1] + x[:, 2]) / 2], axis=1)
            my = np.stack([(y[:, 0] + y[:, 1]) / 2, (y[:, 0] + y[:, 2]) / 2, (y[:, 1] + y[:, 2]) / 2], axis=1)
            if weight is None:
                g = np.ones_like(mx)
            else:
                g = np.asarray(weight(mx, my), float)
                g = np.broadcast_to(g, mx.shape).copy()
            if restrict is not None:
                g = g * restrict.contains(mx, my)
            scale = (area / 12.0)[:, None, None]
            m = np.empty((v.shape[0], 3, 3))
            m[:, 0, 1] = m[:, 1, 0] = g[:, 0]
            m[:, 0, 2] = m[:, 2, 0] = g[:, 1]
            m[:, 1, 2] = m[:, 2, 1] = g[:, 2]
            m[:, 0, 0] = g[:, 0] + g[:, 1]
            m[:, 1, 1] = g[:, 0] + g[:, 2]
            m[:, 2, 2] = g[:, 1] + g[:, 2]
            m *= scale
            rows = np.broadcast_to(v[:, :, None], m.shape)
            cols = np.broadcast_to(v[:, None, :], m.shape)
            yield rows, cols, m

    return _accumulate(blocks(), mesh.n_nodes)


def assemble_load(mesh: Mesh, f) -> np.ndarray:
    """Load vector  integral f v  by the edge-midpoint rule."""
    out = np.zeros(mesh.n_nodes)
    n_el = mesh.triangles.shape[0]
    for start in range(0, n_el, _ASSEMBLY_CHUNK):
        sl = slice(start, min(start + _ASSEMBLY_CHUNK, n_el))
        v, x, y, b, c, area = _element_geometry(mesh, sl)
        mx = np.stack([(x[:, 0] + x[:, 1]) / 2, (x[:, 0] + x[:, 2]) / 2, (x[:, 1] + x[:, 2]) / 2], axis=1)
        my = np.stack([(y[:, 0] + y[:, 1]) / 2, (y[:, 0] + y[:, 2]) / 2, (y[:, 1] + y[:, 2]) / 2], axis=1)
        fv = np.broadcast_to(np.asarray(f(mx, my), float), mx.shape)
        scale = area / 6.0
        contrib = np.stack(
            [
                scale * (fv[:, 0] + fv[:, 1]),
                scale * (fv[:, 0] + fv[:, 2]),
                scale * (fv[:, 1] + fv[:, 2]),
            ],
            axis=1,
        )
        np.add.at(out, v.ravel(), contrib.ravel())
    return out


def _segment_breakpoints(mesh: Mesh, seg: Segment, t0: float, t1: float) -> np.ndarray:
    """Parameter breakpoints where the segment crosses grid or diagonal lines."""
    s = mesh.spacing
    pts = [t0, t1]
    dx = seg.x1 - seg.x0
    dy = seg.y1 - seg.y0

    def add_crossings(value0: float, dvalue: float, origin: float):
        # crossings of value0 + t*dvalue = origin + k*s
        if dvalue == 0.0:
            return
        lo = value0 + min(t0 * dvalue, t1 * dvalue)
        hi = value0 + max(t0 * dvalue, t1 * dvalue)
        k0 = int(np.floor((lo - origin) / s)) - 1
        k1 = int(np.ceil((hi - origin) / s)) + 1
        for k in range(k0, k1 + 1):
            t = (origin + k * s - value0) / dvalue
            if t0 < t < t1:
                pts.append(t)

    add_crossings(seg.x0, dx, mesh.rect.x0)
    add_crossings(seg.y0, dy, mesh.rect.y0)
    # diagonal families x - y = const and x + y = const
    add_crossings(seg.x0 - seg.y0, dx - dy, mesh.rect.x0 - mesh.rect.y0)
    add_crossings(seg.x0 + seg.y0, dx + dy, mesh.rect.x0 + mesh.rect.y0)
    arr = np.unique(np.asarray(pts))
    return arr[(arr >= t0) & (arr <= t1)]


def assemble_segment_mass(mesh: Mesh, segments, restrict=None) -> sp.csr_matrix:
    """Matrix of  sum_seg ell * integral_seg u v dl  (4-point Gauss per piece).

    Each segment is split at every grid-line and diagonal crossing so the
    quadratic integrand u*v is polynomial on each piece, making the rule
    exact.  ``restrict`` optionally masks quadrature points outside a region.
    """
    gx, gw = _gauss_rule(4)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    mesh_rect = Rect(
        mesh.rect.x0, mesh.rect.y0, np.nextafter(mesh.rect.x1, np.inf), np.nextafter(mesh.rect.y1, np.inf)
    )
    for seg in segments:
        if seg.linear_density == 0:
            continue
        clip = _segment_clip(seg, mesh_rect)
        if clip is None:
            continue
        ts = _segment_breakpoints(mesh, seg, clip[0], clip[1])
        if len(ts) < 2:
            continue
        t_lo = ts[:-1]
        t_hi = ts[1:]
        keep = t_hi - t_lo > 1e-14
        t_lo, t_hi = t_lo[keep], t_hi[keep]
        # Gauss points for every piece: (pieces, 4)
        tq = t_lo[:, None] + (t_hi - t_lo)[:, None] * gx[None, :]
        px, py = seg.point_at(tq.ravel())
        tri, lam = mesh.locate(px, py)
        w = ((t_hi - t_lo)[:, None] * gw[None, :]).ravel() * seg.length * seg.linear_density
        if restrict is not None:
            w = w * restrict.contains(px, py)
        v = mesh.triangles[tri]  # (P, 3)
        outer = lam[:, :, None] * lam[:, None, :] * w[:, None, None]
        rows.append(np.broadcast_to(v[:, :, None], outer.shape).ravel())
        cols.append(np.broadcast_to(v[:, None, :], outer.shape).ravel())
        data.append(outer.ravel())
    if not rows:
        return sp.csr_matrix((mesh.n_nodes, mesh.n_nodes))
    mat = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_nodes, mesh.n_nodes),
    ).tocsr()
    mat.sum_duplicates()
    return mat


# --------------------------------------------------------------------------
# solver
# --------------------------------------------------------------------------


def _make_preconditioner(A: sp.csr_matrix, backend: str):
    n = A.shape[0]
    if backend == "auto":
        backend = "amg" if n >= AMG_THRESHOLD else "jacobi"
    if backend == "jacobi":
        d = A.diagonal().copy()
        d[d == 0.0] = 1.0
        inv = 1.0 / d
        return lambda r: inv * r
    if backend == "amg":
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(A, max_coarse=200)
        M = ml.aspreconditioner(cycle="V")
        return lambda r: M @ r
    raise ValueError(f"unknown solver backend {backend!r}")


def solve_spd(
    A: sp.csr_matrix,
    b: np.ndarray,
    rtol: float = 1e-10,
    backend: str = "auto",
    maxiter: int | None = None,
) -> tuple[np.ndarray, SolveStats]:
    """Preconditioned CG for a symmetric positive definite system.

    Convergence criterion: two-norm of the true residual below rtol*|b|.
    Iteration cap defaults to 50*sqrt(n).
    """
    t_start = time.perf_counter()
    n = A.shape[0]
    nb = float(np.linalg.norm(b))
    if nb == 0.0 or n == 0:
        return np.zeros(n), SolveStats(0, 0.0, time.perf_counter() - t_start)
    if maxiter is None:
        maxiter = max(200, int(50 * np.sqrt(n)))
    apply_m = _make_preconditioner(A, backend)
    x = np.zeros(n)
    r = b.copy()
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    it = 0
    target = rtol * nb
    while it < maxiter:
        if np.linalg.norm(r) <= target:
            break
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        if np.linalg.norm(r) <= target:
            break
        z = apply_m(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    true_res = float(np.linalg.norm(b - A @ x)) / nb
    elapsed = time.perf_counter() - t_start
    if true_res > rtol * 10:
        raise ConvergenceFailure(
            f"PCG stalled: relative residual {true_res:.3e} after {it} iterations "
            f"(target {rtol:.1e}, n={n})"
        )
    return x, SolveStats(it, true_res, elapsed)


def constrained_solve(
    K: sp.csr_matrix,
    load: np.ndarray,
    fixed_mask: np.ndarray,
    fixed_values: np.ndarray | float = 0.0,
    rtol: float = 1e-10,
    backend: str = "auto",
) -> tuple[np.ndarray, SolveStats]:
    """Solve K u = load with u prescribed on the fixed nodes.

    Reduces to the free-node block; returns the full nodal vector with the
    prescribed values in place.
    """
    n = K.shape[0]
    u = np.zeros(n)
    if np.isscalar(fixed_values):
        u[fixed_mask] = fixed_values
    else:
        u[fixed_mask] = np.asarray(fixed_values)[fixed_mask]
    free = ~fixed_mask
    if not free.any():
        return u, SolveStats(0, 0.0, 0.0)
    rhs = load - K @ u
    A_ff = K[free][:, free].tocsr()
    x, stats = solve_spd(A_ff, rhs[free], rtol=rtol, backend=backend)
    u[free] = x
    return u, stats

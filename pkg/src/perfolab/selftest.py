"""Built-in verification battery and the calibrated property measurements.

The measurement functions quantify the three inequality properties the
lab relies on (measure-weighted field bounds by potential norms, outer
average comparability across hole radii, and the cube-scale average
Poincare bound).  Their suprema over the reference corpus are committed
to ``calibration.py``; the battery asserts each inequality with a 2x
margin on the committed constant, alongside exactness and convergence
checks for the solvers.
"""

from __future__ import annotations

import math

import numpy as np

from . import calibration
from .capacity import (
    Disk,
    boundary_average,
    cap_concentric_closed_form,
    cap_variational,
    capacitary_potential,
    hole_radius,
    mu_capacity,
    smooth_random_fields,
)
from .measures import (
    Checkerboard,
    Constant,
    MeasureSpec,
    Radial,
    Rect,
    kato_norm,
    mass_on_rect,
)
from .mesh import Field, Mesh, assemble_mass, assemble_stiffness
from .operators import EllipticOperator
from .pde import field_metrics, loads, measure_mass_matrix, solve_dirichlet_perforated, solve_relaxed

__all__ = [
    "measure_kato_poincare_ratio",
    "measure_average_comparability_ratio",
    "measure_cube_poincare_ratio",
    "proposition_suite",
    "run_selftest",
]

_CENTER = (0.5, 0.5)


# --------------------------------------------------------------------------
# calibrated property measurements
# --------------------------------------------------------------------------


def _corpus_measures() -> list[MeasureSpec]:
    return [
        MeasureSpec(density=Constant(3.0)),
        MeasureSpec(density=Checkerboard(1.0, 4.0, 4)),
        MeasureSpec(density=Radial(2.0, _CENTER, 1.0)),
    ]


def measure_kato_poincare_ratio(
    n_fields: int = calibration.CORPUS_SIZE, seed: int = calibration.CORPUS_SEED
) -> float:
    """Supremum of  (u^2 mass on A) / (kato_norm(A) * gradient energy on B_R).

    Fields vanish on the boundary circle of B_R (smooth corpus members
    multiplied by a parabolic cutoff in the distance to the center).
    """
    R = 0.45
    A = Rect.cube(_CENTER, 0.28)
    mesh = Mesh(Rect.cube(_CENTER, R), 108, 108)
    K = assemble_stiffness(mesh, None)
    dist = np.hypot(mesh.nodes[:, 0] - _CENTER[0], mesh.nodes[:, 1] - _CENTER[1])
    cutoff = np.clip(1.0 - (dist / R) ** 2, 0.0, None)
    worst = 0.0
    for mu in _corpus_measures():
        kato = kato_norm(mu, A, 2)
        M = measure_mass_matrix(mesh, mu, restrict=A)
        for f in smooth_random_fields(seed, n_fields, _CENTER, R):
            u = np.asarray(f(mesh.nodes[:, 0], mesh.nodes[:, 1]), float) * cutoff
            den = kato * float(u @ (K @ u))
            if den <= 1e-24:
                continue
            worst = max(worst, float(u @ (M @ u)) / den)
    return worst


def measure_average_comparability_ratio(r: float = 0.3) -> float:
    """Max over hole radii rho <= r/2 of  M^rho(phi) / M^{r/2}(phi).

    One fixed nonnegative, deliberately asymmetric test field.  For the
    pure Laplacian the outer distribution of concentric disks is rotation
    invariant whatever the hole radius, so the ratio is 1 up to mesh
    effects; an anisotropic coefficient is swept as well so the calibrated
    constant reflects a non-degenerate comparison.
    """

    def phi(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return 0.2 + (x - 0.2) ** 2 + 0.5 * np.exp(-((x - 0.55) ** 2 + (y - 0.42) ** 2) / 0.02)

    q = 0.5
    rhos = [q * r / 8, q * r / 4, q * r / 2, q * r]
    worst = 0.0
    for op in (EllipticOperator.laplace(), EllipticOperator.constant_matrix(1.4, 0.25, 0.85)):
        averages = []
        for rho in rhos:
            pot = capacitary_potential(Disk(_CENTER, rho), Disk(_CENTER, r), op, resolution=2 * r / 128)
            vals = phi(pot.mesh.nodes[:, 0], pot.mesh.nodes[:, 1])
            averages.append(boundary_average(vals, pot))
        reference = averages[-1]
        worst = max(worst, max(a / reference for a in averages))
    return worst


def measure_cube_poincare_ratio(
    n_fields: int = calibration.CORPUS_SIZE, seed: int = calibration.CORPUS_SEED
) -> float:
    """Supremum of  |u - M u|_{L2(cube)} / (r |grad u|_{L2(cube)}).

    Cubes of half-side r in {0.2, 0.1, 0.05}, condenser radii rho in
    {r/4, r/2}; the corpus is re-scaled to each cube.
    """
    worst = 0.0
    for r in (0.2, 0.1, 0.05):
        mesh = Mesh(Rect.cube(_CENTER, r), 64, 64)
        K = assemble_stiffness(mesh, None)
        M = assemble_mass(mesh)
        fields = [
            np.asarray(f(mesh.nodes[:, 0], mesh.nodes[:, 1]), float)
            for f in smooth_random_fields(seed, n_fields, _CENTER, r)
        ]
        for rho in (r / 4, r / 2):
            pot = capacitary_potential(Disk(_CENTER, rho), Disk(_CENTER, r), resolution=2 * r / 64)
            for u in fields:
                d = u - boundary_average(u, pot)
                den2 = float(u @ (K @ u))
                if den2 <= 1e-24:
                    continue
                worst = max(worst, math.sqrt(max(float(d @ (M @ d)), 0.0) / den2) / r)
    return worst


# --------------------------------------------------------------------------
# measure-weighted capacity property suite
# --------------------------------------------------------------------------


def proposition_suite(n_configs: int = 20, seed: int = 11, tolerance: float = 0.03, log=None):
    """Randomized checks of the six set-function properties of the
    measure-weighted capacity (emptiness, monotonicity in the set,
    subadditivity, antitonicity in the ambient set, the two-sided operator
    comparison through alpha, and continuity along increasing sets).

    Returns the number of property evaluations; raises AssertionError on
    the first violation beyond the discretization tolerance.
    """
    rng = np.random.default_rng(seed)
    lap = EllipticOperator.laplace()
    aniso = EllipticOperator.constant_matrix(1.4, 0.25, 0.85)
    checked = 0
    for k in range(n_configs):
        cx = 0.5 + rng.uniform(-0.05, 0.05)
        cy = 0.5 + rng.uniform(-0.05, 0.05)
        R_A = rng.uniform(0.3, 0.4)
        A = Disk((cx, cy), R_A)
        B = Disk((cx, cy), R_A + rng.uniform(0.05, 0.08))
        r_e = rng.uniform(0.04, 0.08)
        off = rng.uniform(0.0, 0.12)
        ang = rng.uniform(0, 2 * math.pi)
        e_center = (cx + off * math.cos(ang), cy + off * math.sin(ang))
        E = Disk(e_center, r_e)
        F_center = (cx - (off + 0.06) * math.cos(ang), cy - (off + 0.06) * math.sin(ang))
        F = Disk(F_center, rng.uniform(0.03, 0.05))
        dens = [Constant(rng.uniform(5.0, 80.0)), Checkerboard(rng.uniform(2, 20), rng.uniform(20, 60), 4)][k % 2]
        mu = MeasureSpec(density=dens)
        op = [lap, aniso][(k // 2) % 2]
        res = 2 * B.radius / 96

        def cap(E_, A_, op_=op):
            return mu_capacity(E_, A_, mu, op_, res)

        c_empty = mu_capacity(None, A, mu, op, res)
        assert c_empty == 0.0, f"config {k}: empty set capacity {c_empty}"
        c_e = cap(E, A)
        c_big = cap(Disk(e_center, r_e * 1.5), A)
        assert c_e <= c_big * (1 + tolerance), f"config {k}: not monotone in the set"
        from .capacity import DiskUnion

        c_union = cap(DiskUnion((E, F)), A)
        c_f = cap(F, A)
        assert c_union <= (c_e + c_f) * (1 + tolerance), f"config {k}: not subadditive"
        c_in_b = cap(E, B)
        assert c_e >= c_in_b * (1 - tolerance), f"config {k}: not antitone in the ambient set"
        c_lap = cap(E, A, lap)
        c_op = cap(E, A, aniso)
        alpha = aniso.alpha
        assert alpha * c_lap <= c_op * (1 + tolerance) and c_op <= c_lap / alpha * (
            1 + tolerance
        ), f"config {k}: two-sided operator comparison fails"
        caps_up = [cap(Disk(e_center, r_e * (1 - 2.0 ** (-j))), A) for j in (1, 4, 12)]
        assert caps_up == sorted(caps_up), f"config {k}: not monotone along increasing sets"
        assert caps_up[-1] <= c_e * (1 + tolerance) and caps_up[-1] >= c_e * (
            1 - tolerance
        ) - 1e-12, f"config {k}: sup along increasing sets misses the limit"
        checked += 7
        if log:
            log(f"config {k + 1}/{n_configs} ok")
    return checked


# --------------------------------------------------------------------------
# the battery
# --------------------------------------------------------------------------


def _check_closed_form_capacity() -> str:
    exact = cap_concentric_closed_form(0.25, 0.5, 2)
    got = cap_variational(Disk((0, 0), 0.25), Disk((0, 0), 0.5), resolution=0.5 / 128)
    rel = abs(got - exact) / exact
    assert rel <= 0.02, f"condenser capacity off by {rel:.2%}"
    return f"discrete {got:.4f} vs closed form {exact:.4f} ({rel:.2%})"


def _check_manufactured_solutions() -> str:
    dom = Rect(0.0, 0.0, 1.0, 1.0)
    errs = {}
    for n in (32, 64):
        mesh = Mesh(dom, n, n)
        exact = np.sin(np.pi * mesh.nodes[:, 0]) * np.sin(np.pi * mesh.nodes[:, 1])
        f_d = loads.product_sine(dom, 2 * math.pi**2)
        u_d, _ = solve_dirichlet_perforated(mesh, None, EllipticOperator.laplace(), f_d)
        c = 40.0
        f_r = loads.product_sine(dom, 2 * math.pi**2 + c)
        u_r, _ = solve_relaxed(mesh, MeasureSpec(density=Constant(c)), EllipticOperator.laplace(), f_r)
        m = field_metrics(u_d, Field(mesh, exact))
        mr = field_metrics(u_r, Field(mesh, exact))
        errs[n] = (m.l2, mr.l2)
    order_d = math.log2(errs[32][0] / errs[64][0])
    order_r = math.log2(errs[32][1] / errs[64][1])
    assert order_d >= 1.8 and order_r >= 1.8, f"orders {order_d:.2f}, {order_r:.2f} below 1.8"
    return f"L2 orders: perforated-path {order_d:.2f}, relaxed-path {order_r:.2f}"


def _check_distribution_identity() -> str:
    geometries = [
        (Disk((0.5, 0.5), 0.2), Disk((0.5, 0.5), 0.45)),
        (Disk((0.45, 0.5), 0.15), Rect(0.1, 0.1, 0.9, 0.9)),
        (Rect(0.4, 0.42, 0.6, 0.58), Disk((0.5, 0.5), 0.4)),
    ]
    worst = 0.0
    for V, U in geometries:
        pot = capacitary_potential(V, U, resolution=0.8 / 96)
        g, n, c = pot.gamma.sum(), pot.nu.sum(), pot.cap_value
        worst = max(worst, abs(g - c) / c, abs(n - c) / c)
        assert pot.gamma.min() >= -1e-12 * c and pot.nu.min() >= -1e-12 * c, "negative distribution mass"
    assert worst <= 1e-8, f"distribution identity violated at {worst:.2e}"
    return f"gamma/nu/capacity agree to {worst:.2e} on {len(geometries)} geometries"


def _check_inversion_identity() -> str:
    worst = 0.0
    ops = [EllipticOperator.laplace(), EllipticOperator.scalar_field(Constant(2.5))]
    for op in ops:
        scale = op.constant_scale_or_none()
        # targets scale with the coefficient so the radius stays representable
        for t in (1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4):
            target = scale * t
            rho = hole_radius(target, 0.5, op)
            back = scale * cap_concentric_closed_form(rho, 0.5, 2)
            worst = max(worst, abs(back - target) / target)
    assert worst <= 1e-6, f"inversion identity off by {worst:.2e}"
    return f"capacity of inverted radius within {worst:.2e} over 6 decades"


def _check_kato_poincare() -> str:
    got = measure_kato_poincare_ratio()
    bound = 2.0 * calibration.LEMMA12_C
    assert got <= bound, f"ratio {got:.4f} exceeds 2x calibrated constant {calibration.LEMMA12_C:.4f}"
    return f"sup ratio {got:.4f} <= {bound:.4f}"


def _check_average_comparability() -> str:
    got = measure_average_comparability_ratio()
    bound = 2.0 * calibration.LEMMA22_C
    assert got <= bound, f"ratio {got:.4f} exceeds 2x calibrated constant {calibration.LEMMA22_C:.4f}"
    return f"max average ratio {got:.4f} <= {bound:.4f}"


def _check_cube_poincare() -> str:
    got = measure_cube_poincare_ratio()
    bound = 2.0 * calibration.LEMMA23_C
    assert got <= bound, f"ratio {got:.4f} exceeds 2x calibrated constant {calibration.LEMMA23_C:.4f}"
    return f"sup ratio {got:.4f} <= {bound:.4f}"


def _check_proposition_suite() -> str:
    checked = proposition_suite(n_configs=6)
    return f"{checked} property evaluations on randomized configurations"


def _check_operator_validation() -> str:
    try:
        EllipticOperator.scalar_field(Checkerboard(0.0, 1.0, 4))
        raise AssertionError("degenerate coefficient accepted")
    except ValueError:
        pass
    try:
        EllipticOperator.constant_matrix(1.0, 2.0, 1.0)
        raise AssertionError("indefinite matrix accepted")
    except ValueError:
        pass
    return "degenerate coefficients rejected at construction"


CHECKS = (
    ("closed-form-capacity", _check_closed_form_capacity),
    ("manufactured-solutions", _check_manufactured_solutions),
    ("distribution-identity", _check_distribution_identity),
    ("inversion-identity", _check_inversion_identity),
    ("weighted-field-bound", _check_kato_poincare),
    ("average-comparability", _check_average_comparability),
    ("cube-average-poincare", _check_cube_poincare),
    ("capacity-property-suite", _check_proposition_suite),
    ("operator-validation", _check_operator_validation),
)


def run_selftest(log=print) -> bool:
    """Run every check; one PASS/FAIL line each; True when all pass."""
    ok = True
    for name, fn in CHECKS:
        try:
            detail = fn()
            log(f"PASS {name}: {detail}")
        except AssertionError as exc:
            ok = False
            log(f"FAIL {name}: {exc}")
        except Exception as exc:  # a crash is a failure, not an abort
            ok = False
            log(f"FAIL {name}: {type(exc).__name__}: {exc}")
    return ok

"""Convergence sweeps: perforated solves per level against a fixed reference.

The reference is the measure-damped solution for the diffuse part of the
measure, solved once on the finest mesh of the sweep; the full measure
(atoms included) drives the hole construction at every level.  Rows are
ordered by h regardless of execution order, and levels may run on a small
thread pool (PERFOLAB_THREADS).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .config import ScenarioConfig
from .errors import ResolutionError
from .measures import decompose
from .mesh import Field, Mesh, assemble_mass, assemble_stiffness
from .pde import (
    corrector_field,
    energy_functional,
    field_metrics,
    solve_dirichlet_perforated,
    solve_relaxed,
)
from .perforation import build_holes, holes_report

__all__ = [
    "SweepRow",
    "ConvergenceReport",
    "run_sweep",
    "emit_report",
    "report_to_json",
    "report_from_json",
    "CSV_COLUMNS",
]

CSV_COLUMNS = (
    "h",
    "holes",
    "min_radius",
    "max_radius",
    "spacing",
    "l2_err",
    "rel_l2_err",
    "h1_err",
    "energy",
    "corrector_l2",
    "runtime_ms",
)


@dataclass(frozen=True)
class SweepRow:
    h: int
    holes: int
    min_radius: float
    max_radius: float
    spacing: float
    l2_err: float
    rel_l2_err: float
    h1_err: float
    energy: float
    corrector_l2: float
    runtime_ms: float
    status: str = "ok"


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[SweepRow, ...]
    reference: str
    scenario: str

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))


class _MeshKit:
    """Mesh plus the matrices every level at this spacing shares."""

    def __init__(self, cfg: ScenarioConfig, spacing: float):
        self.mesh = Mesh.from_spacing(cfg.domain, spacing)
        self.stiffness = assemble_stiffness(self.mesh, cfg.operator)
        self.mass = assemble_mass(self.mesh)
        self.lap = (
            self.stiffness
            if cfg.operator.is_laplace
            else assemble_stiffness(self.mesh, None)
        )


def run_sweep(cfg: ScenarioConfig, keep_fields: bool = False, log=None):
    """Run the scenario; returns the report (and solution fields on request).

    Pre-flight: every level's holes must be resolvable on its mesh (or the
    scenario must opt into pin-nearest).  A level that fails during the
    solve phase yields a row marked failed with NaN metrics; the remaining
    levels still run.
    """

    def say(msg: str):
        if log:
            log(msg)

    mu0 = decompose(cfg.measure).mu0
    f = cfg.load.make(cfg.domain)

    families = {h: build_holes(cfg.domain, cfg.measure, cfg.operator, h, cfg.inversion_tol) for h in cfg.h_list}
    problems = []
    for h in cfg.h_list:
        rep = holes_report(families[h], cfg.spacing_for(h))
        if not rep.resolvable and not cfg.pin_nearest:
            problems.append(
                f"h={h}: min radius {rep.min_radius:g} under-resolved at spacing {rep.mesh_spacing:g}"
            )
    if problems:
        raise ResolutionError("; ".join(problems))

    kits: dict[float, _MeshKit] = {}
    for h in cfg.h_list:
        s = cfg.spacing_for(h)
        if s not in kits:
            say(f"assembling spacing {s:g}")
            kits[s] = _MeshKit(cfg, s)

    s_ref = min(cfg.spacing_for(h) for h in cfg.h_list)
    ref_kit = kits[s_ref]
    corrector_only = cfg.mode == "corrector-only"
    if corrector_only:
        u_ref = Field(ref_kit.mesh, np.zeros(ref_kit.mesh.n_nodes))
        ref_norm = math.nan
    else:
        say(f"reference relaxed solve at spacing {s_ref:g}")
        u_ref, ref_stats = solve_relaxed(
            ref_kit.mesh, mu0, cfg.operator, f, rtol=cfg.solver_rtol, stiffness=ref_kit.stiffness
        )
        ref_norm = math.sqrt(max(float(u_ref.values @ (ref_kit.mass @ u_ref.values)), 0.0))
        say(f"reference done ({ref_stats.iterations} iterations)")

    fields: dict[int, Field] = {}

    def run_level(h: int) -> SweepRow:
        t0 = time.perf_counter()
        family = families[h]
        kit = kits[cfg.spacing_for(h)]
        rep = holes_report(family, kit.mesh.spacing)
        try:
            w = corrector_field(kit.mesh, family, cfg.operator, pin_nearest=cfg.pin_nearest)
            dev = w.values - 1.0
            corr_l2 = math.sqrt(max(float(dev @ (kit.mass @ dev)), 0.0))
            if corrector_only:
                l2 = rel = h1 = energy = math.nan
            else:
                u_h, _ = solve_dirichlet_perforated(
                    kit.mesh,
                    family,
                    cfg.operator,
                    f,
                    pin_nearest=cfg.pin_nearest,
                    rtol=cfg.solver_rtol,
                    stiffness=kit.stiffness,
                )
                fields[h] = u_h
                metrics = field_metrics(u_h, u_ref, mass=kit.mass, stiffness=kit.lap)
                l2 = metrics.l2
                rel = metrics.l2 / ref_norm if ref_norm > 0 else math.nan
                h1 = metrics.h1_semi
                energy = energy_functional(u_h, cfg.measure, cfg.operator, stiffness=kit.stiffness)
            status = "ok"
        except Exception as exc:  # failed levels are marked, not fatal
            l2 = rel = h1 = energy = corr_l2 = math.nan
            status = f"failed: {exc}"
        return SweepRow(
            h=h,
            holes=rep.positive_count,
            min_radius=rep.min_radius,
            max_radius=rep.max_radius,
            spacing=kit.mesh.spacing,
            l2_err=l2,
            rel_l2_err=rel,
            h1_err=h1,
            energy=energy,
            corrector_l2=corr_l2,
            runtime_ms=(time.perf_counter() - t0) * 1e3,
            status=status,
        )

    n_threads = max(1, int(os.environ.get("PERFOLAB_THREADS", "1")))
    if n_threads > 1 and len(cfg.h_list) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            rows = tuple(pool.map(run_level, cfg.h_list))
    else:
        rows = tuple(run_level(h) for h in cfg.h_list)

    report = ConvergenceReport(
        rows=rows,
        reference=f"relaxed solve of diffuse part [{mu0.describe()}] at spacing {s_ref:g}",
        scenario=f"mode={cfg.mode} measure=[{cfg.measure.describe()}] operator={cfg.operator.fingerprint()}",
    )
    if keep_fields:
        return report, fields, u_ref
    return report


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _format_cell(name: str, value) -> str:
    if name in ("h", "holes"):
        return str(int(value))
    if name == "runtime_ms":
        return f"{value:.1f}"
    return f"{value:.9e}"


def report_to_csv(report: ConvergenceReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in report.rows:
        d = asdict(row)
        lines.append(",".join(_format_cell(c, d[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def report_to_json(report: ConvergenceReport) -> str:
    payload = {
        "reference": report.reference,
        "scenario": report.scenario,
        "rows": [asdict(row) for row in report.rows],
    }
    return json.dumps(payload, indent=2) + "\n"


def report_from_json(text: str) -> ConvergenceReport:
    payload = json.loads(text)
    rows = tuple(SweepRow(**row) for row in payload["rows"])
    return ConvergenceReport(rows=rows, reference=payload["reference"], scenario=payload["scenario"])


def emit_report(report: ConvergenceReport, fmt: str, path) -> None:
    """Write the report as CSV (fixed formatting) or JSON (round-trips)."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    text = report_to_csv(report) if fmt == "csv" else report_to_json(report)
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc

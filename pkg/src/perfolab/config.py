"""Scenario configuration: INI grammar, validation, defaults.

Sections: [domain], [operator], [measure], [load], [sweep].  Lists are
comma-separated; atoms and segments are semicolon-separated tuples, e.g.
``atoms = (0.51, 0.53, 1); (0.3, 0.3, 2)``.  Parsing collects every
problem it finds and reports them together.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

from .errors import ConfigError
from .measures import Atom, Checkerboard, Constant, MeasureSpec, Radial, Rect, Segment, Zero
from .operators import EllipticOperator

__all__ = ["LoadSpec", "ScenarioConfig", "parse_config", "load_config"]

MODES = ("classic", "singular", "corrector-only")

_KNOWN_KEYS = {
    "domain": {"rect"},
    "operator": {"kind", "a11", "a12", "a22", "field"},
    "measure": {"density", "atoms", "segments"},
    "load": {"kind", "value", "amplitude", "cx", "cy", "width"},
    "sweep": {"h", "spacing", "mode", "seed", "solver_rtol", "inversion_tol", "pin_nearest"},
}


@dataclass(frozen=True)
class LoadSpec:
    kind: str
    params: tuple[tuple[str, float], ...] = ()

    def param(self, name: str, default: float) -> float:
        for key, value in self.params:
            if key == name:
                return value
        return default

    def make(self, domain: Rect):
        from .pde import loads

        if self.kind == "constant":
            return loads.constant(self.param("value", 1.0))
        if self.kind == "product_sine":
            return loads.product_sine(domain, self.param("amplitude", 1.0))
        if self.kind == "bump":
            return loads.bump(
                self.param("cx", domain.center[0]),
                self.param("cy", domain.center[1]),
                self.param("width", 0.1),
                self.param("amplitude", 1.0),
            )
        raise ConfigError([f"unknown load kind {self.kind!r}"])

    def describe(self) -> str:
        ps = ",".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.kind}({ps})"


@dataclass(frozen=True)
class ScenarioConfig:
    domain: Rect = Rect(0.0, 0.0, 1.0, 1.0)
    operator: EllipticOperator = None
    measure: MeasureSpec = MeasureSpec()
    load: LoadSpec = LoadSpec("product_sine", (("amplitude", 1.0),))
    h_list: tuple[int, ...] = (8,)
    spacing: tuple[float, ...] = (1.0 / 256,)  # one per h, or a single shared value
    mode: str = "classic"
    seed: int = 0
    solver_rtol: float = 1e-10
    inversion_tol: float = 1e-6
    pin_nearest: bool = False

    def __post_init__(self):
        if self.operator is None:
            object.__setattr__(self, "operator", EllipticOperator.laplace())

    def spacing_for(self, h: int) -> float:
        if len(self.spacing) == 1:
            return self.spacing[0]
        return self.spacing[self.h_list.index(h)]


def _parse_floats(text: str) -> list[float]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return [_parse_number(p) for p in parts]


def _parse_number(text: str) -> float:
    """A float, or a fraction like 1/1024."""
    text = text.strip()
    m = re.fullmatch(r"([-+0-9.eE]+)\s*/\s*([-+0-9.eE]+)", text)
    if m:
        return float(m.group(1)) / float(m.group(2))
    return float(text)


def _parse_tuples(text: str, arity: int, what: str, problems: list[str]) -> list[tuple]:
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        m = re.fullmatch(r"\(([^)]*)\)", chunk)
        body = m.group(1) if m else chunk
        try:
            vals = _parse_floats(body)
        except ValueError:
            problems.append(f"{what}: cannot parse {chunk!r}")
            continue
        if len(vals) != arity:
            problems.append(f"{what}: expected {arity} numbers, got {len(vals)} in {chunk!r}")
            continue
        out.append(tuple(vals))
    return out


def _parse_density(text: str, problems: list[str]):
    parts = [p.strip() for p in text.split(",")]
    kind = parts[0].lower()
    args = parts[1:]
    try:
        if kind == "zero":
            return Zero()
        if kind == "constant":
            return Constant(_parse_number(args[0]))
        if kind == "radial":
            c, cx, cy, p = (_parse_number(a) for a in args)
            return Radial(c, (cx, cy), p)
        if kind == "checkerboard":
            a, b, k = _parse_number(args[0]), _parse_number(args[1]), int(args[2])
            return Checkerboard(a, b, k)
    except (IndexError, ValueError) as exc:
        problems.append(f"density {text!r}: {exc}")
        return Zero()
    problems.append(f"unknown density kind {kind!r}")
    return Zero()


def _parse_operator(section, problems: list[str]) -> EllipticOperator:
    kind = section.get("kind", "laplace").strip().lower()
    try:
        if kind == "laplace":
            return EllipticOperator.laplace()
        if kind == "matrix":
            return EllipticOperator.constant_matrix(
                _parse_number(section.get("a11", "1")),
                _parse_number(section.get("a12", "0")),
                _parse_number(section.get("a22", "1")),
            )
        if kind == "scalar":
            return EllipticOperator.scalar_field(_parse_density(section.get("field", "constant, 1"), problems))
    except ValueError as exc:
        problems.append(f"operator: {exc}")
        return EllipticOperator.laplace()
    problems.append(f"unknown operator kind {kind!r}")
    return EllipticOperator.laplace()


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario; raises ConfigError listing every problem."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc

    problems: list[str] = []
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            problems.append(f"unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                problems.append(f"unknown key {key!r} in [{section}]")

    # domain
    domain = Rect(0.0, 0.0, 1.0, 1.0)
    if parser.has_option("domain", "rect"):
        vals = _parse_floats(parser["domain"]["rect"])
        if len(vals) != 4 or vals[2] <= vals[0] or vals[3] <= vals[1]:
            problems.append(f"domain rect must be x0, y0, x1, y1 with positive extent")
        else:
            domain = Rect(*vals)

    operator = (
        _parse_operator(parser["operator"], problems)
        if parser.has_section("operator")
        else EllipticOperator.laplace()
    )

    # measure
    density = Zero()
    atoms: list[Atom] = []
    segments: list[Segment] = []
    if parser.has_section("measure"):
        sec = parser["measure"]
        if "density" in sec:
            density = _parse_density(sec["density"], problems)
        for x, y, m in _parse_tuples(sec.get("atoms", ""), 3, "atoms", problems):
            if not domain.contains_open(x, y):
                problems.append(f"atom ({x:g}, {y:g}) outside the open domain")
                continue
            try:
                atoms.append(Atom(x, y, m))
            except ValueError as exc:
                problems.append(f"atom ({x:g}, {y:g}): {exc}")
        for x0, y0, x1, y1, ell in _parse_tuples(sec.get("segments", ""), 5, "segments", problems):
            if not (domain.contains_open(x0, y0) and domain.contains_open(x1, y1)):
                problems.append(f"segment ({x0:g},{y0:g})-({x1:g},{y1:g}) endpoint outside the open domain")
                continue
            try:
                segments.append(Segment(x0, y0, x1, y1, ell))
            except ValueError as exc:
                problems.append(f"segment: {exc}")
    measure = MeasureSpec(density=density, atoms=tuple(atoms), segments=tuple(segments))

    # load
    load = LoadSpec("product_sine", (("amplitude", 1.0),))
    if parser.has_section("load"):
        sec = parser["load"]
        kind = sec.get("kind", "product_sine").strip().lower()
        if kind not in ("constant", "product_sine", "bump"):
            problems.append(f"unknown load kind {kind!r}")
        params = []
        for key in ("value", "amplitude", "cx", "cy", "width"):
            if key in sec:
                try:
                    params.append((key, _parse_number(sec[key])))
                except ValueError:
                    problems.append(f"load {key}: cannot parse {sec[key]!r}")
        load = LoadSpec(kind, tuple(params))

    # sweep
    h_list: tuple[int, ...] = (8,)
    spacing: tuple[float, ...] = (1.0 / 256,)
    mode = "classic"
    seed = 0
    solver_rtol = 1e-10
    inversion_tol = 1e-6
    pin_nearest = False
    if parser.has_section("sweep"):
        sec = parser["sweep"]
        if "h" in sec:
            try:
                h_list = tuple(int(v) for v in _parse_floats(sec["h"]))
            except ValueError:
                problems.append(f"h-list: cannot parse {sec['h']!r}")
        if "spacing" in sec:
            try:
                spacing = tuple(_parse_floats(sec["spacing"]))
            except ValueError:
                problems.append(f"spacing: cannot parse {sec['spacing']!r}")
        mode = sec.get("mode", "classic").strip().lower()
        try:
            seed = int(sec.get("seed", "0"))
        except ValueError:
            problems.append(f"seed must be an integer, got {sec['seed']!r}")
        try:
            solver_rtol = _parse_number(sec.get("solver_rtol", "1e-10"))
            inversion_tol = _parse_number(sec.get("inversion_tol", "1e-6"))
        except ValueError as exc:
            problems.append(f"tolerances: {exc}")
        pin_nearest = sec.get("pin_nearest", "false").strip().lower() in ("1", "true", "yes")

    if any(h < 1 for h in h_list):
        problems.append("h-list entries must be positive integers")
    if any(b <= a for a, b in zip(h_list, h_list[1:])) or len(set(h_list)) != len(h_list):
        problems.append("h-list must be strictly increasing")
    if len(spacing) not in (1, len(h_list)):
        problems.append(f"spacing must be one value or one per h ({len(h_list)} values)")
    if any(s <= 0 for s in spacing):
        problems.append("spacing values must be positive")
    if mode not in MODES:
        problems.append(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "classic" and measure.has_atoms:
        problems.append(
            "classic mode requires an atom-free measure (atoms perforate but their "
            "influence vanishes in the limit; use mode = singular)"
        )
    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(
        domain=domain,
        operator=operator,
        measure=measure,
        load=load,
        h_list=h_list,
        spacing=spacing,
        mode=mode,
        seed=seed,
        solver_rtol=solver_rtol,
        inversion_tol=inversion_tol,
        pin_nearest=pin_nearest,
    )


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())

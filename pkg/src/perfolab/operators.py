"""Symmetric second-order elliptic operators -div(A grad u).

The coefficient field A(x) comes from a small catalog: the identity
(Laplace), a constant symmetric 2x2 matrix, or a scalar field a(x)*I with
a(x) drawn from the same scalar catalog the measures use.  The two-sided
ellipticity constant alpha (alpha |xi|^2 <= xi.A xi <= |xi|^2 / alpha) is
computed at construction from eigenvalues, or from a deterministic sample
grid for spatially varying coefficients, and construction fails when no
alpha > 0 exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["EllipticOperator"]

_SAMPLE_N = 65  # deterministic ellipticity sample grid per axis


@dataclass(frozen=True)
class EllipticOperator:
    kind: str  # "laplace" | "matrix" | "scalar"
    a11: float = 1.0
    a12: float = 0.0
    a22: float = 1.0
    scalar: object = None  # scalar coefficient field a(x), catalog object
    alpha: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.kind not in ("laplace", "matrix", "scalar"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        object.__setattr__(self, "alpha", self._compute_alpha())

    # -- constructors ------------------------------------------------------

    @staticmethod
    def laplace() -> "EllipticOperator":
        return EllipticOperator(kind="laplace")

    @staticmethod
    def constant_matrix(a11: float, a12: float, a22: float) -> "EllipticOperator":
        return EllipticOperator(kind="matrix", a11=float(a11), a12=float(a12), a22=float(a22))

    @staticmethod
    def scalar_field(scalar) -> "EllipticOperator":
        """Isotropic coefficient a(x)*I; ``scalar`` is a density-catalog field."""
        return EllipticOperator(kind="scalar", scalar=scalar)

    # -- ellipticity -------------------------------------------------------

    def _compute_alpha(self) -> float:
        if self.kind == "laplace":
            return 1.0
        if self.kind == "matrix":
            tr = 0.5 * (self.a11 + self.a22)
            disc = math.hypot(0.5 * (self.a11 - self.a22), self.a12)
            lam_min, lam_max = tr - disc, tr + disc
            if lam_min <= 0:
                raise ValueError(f"coefficient matrix not positive definite (lambda_min={lam_min:g})")
            return min(lam_min, 1.0 / lam_max)
        # scalar field: sample on a deterministic grid over the unit square
        xs = np.linspace(0.0, 1.0, _SAMPLE_N)
        vals = np.asarray(self.scalar(xs[:, None], xs[None, :]), float)
        a_min, a_max = float(vals.min()), float(vals.max())
        if a_min <= 0:
            raise ValueError(f"scalar coefficient not uniformly positive (min={a_min:g})")
        return min(a_min, 1.0 / a_max)

    # -- queries -----------------------------------------------------------

    @property
    def is_laplace(self) -> bool:
        return self.kind == "laplace"

    @property
    def varies_in_space(self) -> bool:
        return self.kind == "scalar" and not self.constant_scale_or_none()

    def constant_scale_or_none(self) -> float | None:
        """Return s when A = s*I everywhere, else None.

        Scalar multiples of the identity scale every capacity linearly, so
        the concentric closed forms stay available for them.
        """
        if self.kind == "laplace":
            return 1.0
        if self.kind == "matrix":
            if self.a12 == 0.0 and self.a11 == self.a22:
                return self.a11
            return None
        from .measures import Constant, Zero

        if isinstance(self.scalar, Constant):
            return self.scalar.value
        if isinstance(self.scalar, Zero):  # rejected at construction anyway
            return 0.0
        return None

    def coeff_at(self, x, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coefficient entries (a11, a12, a22) at points; broadcasts."""
        shape = np.broadcast(x, y).shape
        if self.kind == "laplace":
            one = np.ones(shape)
            return one, np.zeros(shape), one
        if self.kind == "matrix":
            return (
                np.full(shape, self.a11),
                np.full(shape, self.a12),
                np.full(shape, self.a22),
            )
        a = np.asarray(self.scalar(x, y), float)
        return a, np.zeros(shape), a.copy()

    def fingerprint(self) -> str:
        if self.kind == "laplace":
            return "laplace"
        if self.kind == "matrix":
            return f"matrix({self.a11:.17g},{self.a12:.17g},{self.a22:.17g})"
        return f"scalar[{self.scalar.describe()}]"

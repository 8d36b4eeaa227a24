"""Domains, boundary data, and problem validation for the equatorial
boundary-layer system.

The unknown pair u = (v, psi) (azimuthal velocity, stream function)
satisfies the coupled degenerate system

    d_z v   + z d_y v   - 1/2 d_y^4 psi  [- psi] = s_psi
    d_z psi + z d_y psi + 1/2 d_y^2 v    [- v]   = s_v

on one of three domains (boundary-layer units):

    quarter plane : y > 0, z > 0,     psi = 0 at z = 0
    strip         : y > 0, 0 < z < H, psi = 0 at z = 0 and psi = Lambda v at z = H
    upper strip   : y > 0, z > H,     v = v_H at z = H

with y = 0 data  v = V(z), psi = Psi(z), d_y psi = Upsilon(z).  The bracketed
zero-order terms select the uniquely solvable variant of the system.  The
unbounded directions are truncated at Ymax (decay rows) and Zmax (transparent
row, see :mod:`eqlayer.operators`).

Admissible y-data must satisfy the corner compatibility conditions

    int_0^1 |Upsilon(z)|^2 / z dz < inf      and
    int_0^1 |V(zeta) - v0(zeta)|^2 / zeta dzeta < inf

which :func:`validate` checks by dyadically refined midpoint quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import SpecificationError

CASE_QUARTER_PLANE = "quarter_plane"  # case I
CASE_STRIP = "strip"                  # case II
CASE_UPPER_STRIP = "upper_strip"      # case III
CASES = (CASE_QUARTER_PLANE, CASE_STRIP, CASE_UPPER_STRIP)

# Truncation defaults: the zero-order variant decays exponentially in both
# variables well inside these extents, and the transparent top row absorbs
# what is left.
DEFAULT_YMAX = 30.0
DEFAULT_ZMAX = 20.0

# Dyadic refinement levels and the stabilization threshold used to classify
# the compatibility integrals as convergent/divergent.
_COMPAT_LEVELS = range(4, 13)
_COMPAT_RTOL = 0.01

_CASE_ALIASES = {
    "i": CASE_QUARTER_PLANE, "1": CASE_QUARTER_PLANE, CASE_QUARTER_PLANE: CASE_QUARTER_PLANE,
    "ii": CASE_STRIP, "2": CASE_STRIP, CASE_STRIP: CASE_STRIP,
    "iii": CASE_UPPER_STRIP, "3": CASE_UPPER_STRIP, CASE_UPPER_STRIP: CASE_UPPER_STRIP,
}


def canonical_case(tag: str) -> str:
    key = str(tag).strip().lower()
    if key not in _CASE_ALIASES:
        raise SpecificationError(f"unknown domain case {tag!r}; use I, II or III")
    return _CASE_ALIASES[key]


def zero_func(x):
    """Zero boundary/source data of any arity."""
    return np.zeros_like(np.asarray(x, dtype=float))


def zero_source(y, z):
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.zeros(np.broadcast(y, z).shape)


@dataclass(frozen=True)
class DomainCase:
    """One of the three z-configurations plus truncation extents."""

    tag: str
    H: float = 0.0
    Zmax: float = DEFAULT_ZMAX
    Ymax: float = DEFAULT_YMAX

    def __post_init__(self):
        object.__setattr__(self, "tag", canonical_case(self.tag))
        if self.Ymax <= 0:
            raise SpecificationError(f"Ymax must be positive, got {self.Ymax}")
        if self.tag == CASE_QUARTER_PLANE and self.Zmax <= 0:
            raise SpecificationError(f"quarter plane needs Zmax > 0, got {self.Zmax}")
        if self.tag == CASE_STRIP and self.H <= 0:
            raise SpecificationError(f"strip needs H > 0, got {self.H}")
        if self.tag == CASE_UPPER_STRIP and not self.Zmax > self.H:
            raise SpecificationError(
                f"upper strip needs Zmax > H, got H={self.H}, Zmax={self.Zmax}")

    def z_interval(self) -> tuple[float, float]:
        if self.tag == CASE_QUARTER_PLANE:
            return (0.0, self.Zmax)
        if self.tag == CASE_STRIP:
            return (0.0, self.H)
        return (self.H, self.Zmax)


class LambdaChoice:
    """Top operator Lambda of the strip case: v-trace -> psi-trace at z = H.

    Menu: ``zero`` (psi = 0), ``scaled`` (psi = c v with c <= 0),
    ``spectral`` (sine-transform multiplier -1/|xi|), or an explicit
    ``matrix`` acting on interior y-node values (how a numerically built
    transparent operator is wired back in).  Every choice yields a
    non-positive quadratic form.
    """

    KINDS = ("zero", "scaled", "spectral", "matrix")

    def __init__(self, kind="zero", scale=0.0, matrix=None):
        if kind not in self.KINDS:
            raise SpecificationError(f"unknown lambda choice {kind!r}")
        if kind == "scaled" and scale > 0:
            raise SpecificationError(
                f"scaled identity requires a non-positive factor, got c={scale}")
        if kind == "matrix":
            if matrix is None:
                raise SpecificationError("matrix lambda choice needs entries")
            matrix = np.asarray(matrix, dtype=float)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise SpecificationError("lambda matrix must be square")
        self.kind = kind
        self.scale = float(scale)
        self.matrix = matrix

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def scaled(cls, c):
        return cls("scaled", scale=c)

    @classmethod
    def spectral(cls):
        return cls("spectral")

    @classmethod
    def from_matrix(cls, entries):
        return cls("matrix", matrix=entries)

    def __repr__(self):
        if self.kind == "scaled":
            return f"LambdaChoice(scaled, c={self.scale})"
        return f"LambdaChoice({self.kind})"


@dataclass(frozen=True)
class BoundaryData:
    """Boundary traces: V, Upsilon, Psi are functions of z; vH of y.

    Fields may be callables or nodal arrays matching the grid; ``None``
    means homogeneous data.
    """

    V: Optional[Callable] = None
    Upsilon: Optional[Callable] = None
    Psi: Optional[Callable] = None
    vH: Optional[Callable] = None
    lambda_choice: LambdaChoice = field(default_factory=LambdaChoice.zero)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid on [0, Ymax] x [z0, z1]."""

    Ny: int
    Nz: int
    hy: float
    hz: float
    y_nodes: np.ndarray
    z_nodes: np.ndarray

    @classmethod
    def build(cls, case: DomainCase, Ny: int, Nz: int) -> "Grid":
        if Ny < 8:
            raise SpecificationError(
                f"Ny must be at least 8 (near-boundary stencil width), got {Ny}")
        if Nz < 4:
            raise SpecificationError(f"Nz must be at least 4, got {Nz}")
        z0, z1 = case.z_interval()
        y = np.linspace(0.0, case.Ymax, Ny + 1)
        z = np.linspace(z0, z1, Nz + 1)
        return cls(Ny=Ny, Nz=Nz, hy=case.Ymax / Ny, hz=(z1 - z0) / Nz,
                   y_nodes=y, z_nodes=z)

    def shape(self) -> tuple[int, int]:
        return (self.Ny + 1, self.Nz + 1)


@dataclass(frozen=True)
class ProblemSpec:
    """Full statement of one solve."""

    case: DomainCase
    bc: BoundaryData = field(default_factory=BoundaryData)
    s_v: Optional[Callable] = None
    s_psi: Optional[Callable] = None
    zero_order: bool = False
    grid: Grid = None

    def __post_init__(self):
        if self.grid is None:
            object.__setattr__(self, "grid", Grid.build(self.case, 64, 64))

    def sample_sources(self):
        """Evaluate (s_psi, s_v) on the tensor grid."""
        Y = self.grid.y_nodes[:, None]
        Z = self.grid.z_nodes[None, :]
        spsi = zero_source(Y, Z) if self.s_psi is None else np.broadcast_to(
            np.asarray(self.s_psi(Y, Z), dtype=float), self.grid.shape()).copy()
        sv = zero_source(Y, Z) if self.s_v is None else np.broadcast_to(
            np.asarray(self.s_v(Y, Z), dtype=float), self.grid.shape()).copy()
        return spsi, sv


def eval_trace(data, nodes):
    """Evaluate boundary data (callable, array, scalar or None) on nodes."""
    nodes = np.asarray(nodes, dtype=float)
    if data is None:
        return np.zeros_like(nodes)
    if callable(data):
        return np.broadcast_to(np.asarray(data(nodes), dtype=float), nodes.shape).astype(float)
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0:
        return np.full_like(nodes, float(arr))
    if arr.shape != nodes.shape:
        raise SpecificationError(
            f"nodal boundary data has shape {arr.shape}, expected {nodes.shape}")
    return arr.copy()


def compat_integral(f) -> tuple[float, bool]:
    """Estimate int_0^1 f by midpoint rule on dyadically refined meshes.

    Returns ``(estimate, converged)``; ``converged`` is False when the two
    finest levels differ by more than 1 percent, the implementation-
    independent signature of a divergent integrand.
    """
    prev = None
    est = 0.0
    converged = False
    for k in _COMPAT_LEVELS:
        m = 2 ** k
        t = (np.arange(m) + 0.5) / m
        est = float(np.sum(f(t)) / m)
        if prev is not None:
            scale = max(abs(est), abs(prev), 1e-300)
            converged = abs(est - prev) <= _COMPAT_RTOL * scale
        prev = est
    return est, converged


@dataclass
class ValidationReport:
    violations: list
    integrals: dict

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(spec: ProblemSpec, v0=None) -> ValidationReport:
    """Check a problem spec; returns violated constraints (empty = valid).

    ``v0`` is the z = 0 trace of v entering the corner compatibility of the
    V data (defaults to zero, the homogeneous convention).
    """
    violations = []
    integrals = {}
    grid, case = spec.grid, spec.case

    # grid consistency
    if not math.isclose(grid.y_nodes[-1], case.Ymax, rel_tol=0, abs_tol=1e-12 * max(1.0, case.Ymax)):
        violations.append(f"grid does not span Ymax: max y = {grid.y_nodes[-1]}")
    hy_all = np.diff(grid.y_nodes)
    hz_all = np.diff(grid.z_nodes)
    if not (np.allclose(hy_all, grid.hy, rtol=1e-12, atol=1e-12)
            and np.allclose(hz_all, grid.hz, rtol=1e-12, atol=1e-12)):
        violations.append("grid spacing is not uniform")
    z0, z1 = case.z_interval()
    if not (math.isclose(grid.z_nodes[0], z0, abs_tol=1e-12 * max(1.0, abs(z0) + 1))
            and math.isclose(grid.z_nodes[-1], z1, abs_tol=1e-12 * z1 if z1 else 1e-12)):
        violations.append(f"grid z-interval [{grid.z_nodes[0]}, {grid.z_nodes[-1]}] "
                          f"does not match case interval [{z0}, {z1}]")

    # compatibility integral for Upsilon: int_0^1 |Upsilon|^2/z dz
    ups = spec.bc.Upsilon
    if ups is not None and callable(ups):
        est, conv = compat_integral(lambda t: np.asarray(ups(t), dtype=float) ** 2 / t)
        integrals["upsilon_compat"] = est
        if not conv:
            violations.append(
                f"Upsilon compatibility integral diverges (estimate {est:.4g})")
    else:
        integrals["upsilon_compat"] = 0.0

    # compatibility integral for V against the z=0 trace v0
    vdat = spec.bc.V
    if (vdat is not None and callable(vdat)) or (v0 is not None):
        vf = vdat if (vdat is not None and callable(vdat)) else zero_func
        v0f = v0 if v0 is not None else zero_func
        est, conv = compat_integral(
            lambda t: (np.asarray(vf(t), dtype=float) - np.asarray(v0f(t), dtype=float)) ** 2 / t)
        integrals["v_compat"] = est
        if not conv:
            violations.append(
                f"V compatibility integral diverges (estimate {est:.4g})")
    else:
        integrals["v_compat"] = 0.0

    # sources must be finite on the grid
    spsi, sv = spec.sample_sources()
    if not (np.all(np.isfinite(spsi)) and np.all(np.isfinite(sv))):
        violations.append("source terms are not finite on the grid")

    if case.tag == CASE_UPPER_STRIP and spec.bc.vH is not None and callable(spec.bc.vH):
        v_at_0 = float(np.asarray(spec.bc.vH(np.array([0.0])))[0])
        if abs(v_at_0) > 1e-10:
            violations.append(f"vH(0) = {v_at_0:.3g} violates the zero-trace class")

    return ValidationReport(violations=violations, integrals=integrals)


def scaling_exponents(alpha: float) -> tuple[float, float, float]:
    """Boundary-layer scaling exponents for the tangency profile Z ~ (-X)^alpha.

    Returns ``(ey, ez, ekman)``: the layer is E^ey wide in y and E^ez tall
    in z, and the attached bottom layer has the standard E^(1/2) Ekman
    thickness for every alpha (ekman = 3(1-alpha)/(2(3-alpha)) + alpha/(3-alpha)
    collapses to 1/2 identically).
    """
    if not 0.0 < alpha <= 1.0:
        raise SpecificationError(f"alpha must lie in (0, 1], got {alpha}")
    ey = 1.0 / (3.0 - alpha)
    ez = alpha / (3.0 - alpha)
    ekman = 3.0 * (1.0 - alpha) / (2.0 * (3.0 - alpha)) + alpha / (3.0 - alpha)
    return ey, ez, ekman

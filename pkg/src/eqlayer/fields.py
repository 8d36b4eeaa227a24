"""Field storage, quadrature, and the weighted energy norms of the
boundary-layer system.

Norms on the pair u = (v, psi):

    ||u||_E0^2    = int |d_y v|^2 + |v/(1+y)|^2 + |d_y^2 psi|^2 + |psi/(1+y^2)|^2
    ||u||_E00^2   = same with weights v/y and psi/y^2 (homogeneous y = 0 traces)
    ||u||_E0~^2   = E0 plus plain L^2 of both components (uniqueness class)

All quadratures are trapezoid; weighted integrands with a y = 0 singularity
use an open-left rule (first cell integrated by its right endpoint) since
the node value 0/0 is undefined while the continuum integral is finite.
Derivatives use the same stencils as the operator assembly: centered in the
interior, second-order one-sided at the y-boundaries.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np

from .domain import Grid
from .errors import PreconditionError, SpecificationError


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar field sampled on the tensor grid, indexed (y-node, z-node)."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != self.grid.shape():
            raise SpecificationError(
                f"field shape {vals.shape} does not match grid {self.grid.shape()}")
        if not np.all(np.isfinite(vals)):
            raise SpecificationError("field contains non-finite entries")


@dataclass(frozen=True, eq=False)
class StatePair:
    """Solution state u = (v, psi) on one shared grid."""

    v: Field
    psi: Field

    def __post_init__(self):
        if self.v.grid is not self.psi.grid and (
                self.v.grid.shape() != self.psi.grid.shape()
                or not np.array_equal(self.v.grid.y_nodes, self.psi.grid.y_nodes)
                or not np.array_equal(self.v.grid.z_nodes, self.psi.grid.z_nodes)):
            raise SpecificationError("v and psi must share one grid")

    @property
    def grid(self) -> Grid:
        return self.v.grid

    @classmethod
    def from_arrays(cls, v, psi, grid) -> "StatePair":
        return cls(Field(np.asarray(v, dtype=float), grid),
                   Field(np.asarray(psi, dtype=float), grid))

    def __add__(self, other):
        return StatePair.from_arrays(self.v.values + other.v.values,
                                     self.psi.values + other.psi.values, self.grid)

    def __sub__(self, other):
        return StatePair.from_arrays(self.v.values - other.v.values,
                                     self.psi.values - other.psi.values, self.grid)

    def __rmul__(self, c):
        return StatePair.from_arrays(c * self.v.values, c * self.psi.values, self.grid)


def trapezoid_weights(n_nodes: int, h: float) -> np.ndarray:
    w = np.full(n_nodes, h)
    w[0] = w[-1] = h / 2.0
    return w


def open_left_weights(n_nodes: int, h: float) -> np.ndarray:
    """Trapezoid on [y1, ymax] plus a right-endpoint rule on the first cell.

    First order on the first cell but node-wise above the closed trapezoid
    weights, which keeps the hard-weighted norm above the regularized one.
    """
    w = trapezoid_weights(n_nodes, h)
    w[0] = 0.0
    w[1] += h / 2.0
    return w


def open_left_weights2(n_nodes: int, h: float) -> np.ndarray:
    """Second-order open-left rule: the first cell uses the midpoint value
    extrapolated from nodes 1 and 2."""
    w = trapezoid_weights(n_nodes, h)
    w[0] = 0.0
    w[1] += h
    w[2] -= h / 2.0
    return w


def dy(values: np.ndarray, hy: float) -> np.ndarray:
    """First y-derivative: centered interior, second-order one-sided ends."""
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * hy)
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * hy)
    out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * hy)
    return out


def dyy(values: np.ndarray, hy: float) -> np.ndarray:
    """Second y-derivative: 3-point interior, second-order one-sided ends."""
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / hy**2
    out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / hy**2
    out[-1] = (2.0 * values[-1] - 5.0 * values[-2] + 4.0 * values[-3] - values[-4]) / hy**2
    return out


def _grid_quad(integrand: np.ndarray, grid: Grid, open_left: bool = False,
               second_order: bool = False) -> float:
    if open_left:
        wy = open_left_weights2(grid.Ny + 1, grid.hy) if second_order \
            else open_left_weights(grid.Ny + 1, grid.hy)
    else:
        wy = trapezoid_weights(grid.Ny + 1, grid.hy)
    wz = trapezoid_weights(grid.Nz + 1, grid.hz)
    return float(wy @ integrand @ wz)


def _norm_sq(u: StatePair, v_weight, psi_weight, open_left: bool, extra_l2: bool) -> float:
    grid = u.grid
    v, psi = u.v.values, u.psi.values
    y = grid.y_nodes[:, None]

    total = _grid_quad(dy(v, grid.hy) ** 2, grid)
    total += _grid_quad(dyy(psi, grid.hy) ** 2, grid)

    if open_left:
        # weighted terms are singular at y = 0; drop the left endpoint
        yw = np.where(y > 0, y, 1.0)
        total += _grid_quad((v / (v_weight(yw))) ** 2, grid, open_left=True)
        total += _grid_quad((psi / (psi_weight(yw))) ** 2, grid, open_left=True)
    else:
        total += _grid_quad((v / v_weight(y)) ** 2, grid)
        total += _grid_quad((psi / psi_weight(y)) ** 2, grid)

    if extra_l2:
        total += _grid_quad(v ** 2, grid) + _grid_quad(psi ** 2, grid)
    return total


def norm_E0(u: StatePair) -> float:
    """Energy norm with regularized weights 1/(1+y), 1/(1+y^2)."""
    return float(np.sqrt(_norm_sq(u, lambda y: 1.0 + y, lambda y: 1.0 + y**2,
                                  open_left=False, extra_l2=False)))


def norm_E00(u: StatePair) -> float:
    """Energy norm with hard weights v/y, psi/y^2 (zero-trace class)."""
    return float(np.sqrt(_norm_sq(u, lambda y: y, lambda y: y**2,
                                  open_left=True, extra_l2=False)))


def norm_E0tilde(u: StatePair) -> float:
    """E0 norm augmented with the plain L^2 of both components."""
    return float(np.sqrt(_norm_sq(u, lambda y: 1.0 + y, lambda y: 1.0 + y**2,
                                  open_left=False, extra_l2=True)))


class DegenerateHardyInput(UserWarning):
    """Signals the 0/0 Hardy ratio of an identically zero field."""


def hardy_ratio(f: Field, order: int = 1) -> float:
    """Quadrature estimate of  int (f/y^order)^2 / int (d_y^order f)^2.

    Certifies the weighted-L^2 embedding of the zero-trace energy class;
    the order-1 ratio is bounded by the classical constant 4.  Requires
    f = 0 at y = 0 (and d_y f = 0 there for order 2).
    """
    if order not in (1, 2):
        raise PreconditionError(f"order must be 1 or 2, got {order}")
    grid = f.grid
    vals = f.values
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    if scale == 0.0:
        warnings.warn("hardy_ratio of the zero field is 0/0; reporting 0",
                      DegenerateHardyInput)
        return 0.0
    tol = 1e-10 * scale
    if np.max(np.abs(vals[0, :])) > tol:
        raise PreconditionError("hardy_ratio requires f = 0 at y = 0")
    if order == 2:
        d1 = dy(vals, grid.hy)
        # a flat trace leaves an O(h^2) one-sided slope; an O(h) threshold
        # separates it from genuinely sloped data
        if np.max(np.abs(d1[0, :])) > grid.hy * np.max(np.abs(d1)):
            raise PreconditionError("order-2 hardy_ratio requires d_y f = 0 at y = 0")

    y = np.where(grid.y_nodes > 0, grid.y_nodes, 1.0)[:, None]
    num = _grid_quad((vals / y**order) ** 2, grid, open_left=True,
                     second_order=True)
    deriv = dy(vals, grid.hy) if order == 1 else dyy(vals, grid.hy)
    den = _grid_quad(deriv ** 2, grid)
    if den == 0.0:
        warnings.warn("hardy_ratio derivative vanishes; reporting 0",
                      DegenerateHardyInput)
        return 0.0
    return float(num / den)


# ---------------------------------------------------------------------------
# CSV serialization: '# key=value' metadata lines, then rows y,z,v,psi
# ---------------------------------------------------------------------------

def write_state_csv(path, u: StatePair, metadata: dict | None = None) -> None:
    grid = u.grid
    meta = {"Ny": grid.Ny, "Nz": grid.Nz,
            "ymax": grid.y_nodes[-1], "zmin": grid.z_nodes[0], "zmax": grid.z_nodes[-1]}
    if metadata:
        meta.update(metadata)
    buf = io.StringIO()
    for key in meta:
        buf.write(f"# {key}={meta[key]}\n")
    buf.write("y,z,v,psi\n")
    for i, yv in enumerate(grid.y_nodes):
        for j, zv in enumerate(grid.z_nodes):
            buf.write(f"{yv:.17g},{zv:.17g},{u.v.values[i, j]:.17g},{u.psi.values[i, j]:.17g}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def read_state_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, dict]:
    """Read back a state CSV; returns (y, z, v, psi, metadata) with v, psi
    shaped (len(unique y), len(unique z))."""
    meta = {}
    rows = []
    with open(path) as fh:
        header = None
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, _, val = body.partition("=")
                    meta[k.strip()] = val.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(c) for c in line.split(",")])
    if header != ["y", "z", "v", "psi"]:
        raise SpecificationError(f"state CSV must have columns y,z,v,psi; got {header}")
    data = np.asarray(rows)
    y = np.unique(data[:, 0])
    z = np.unique(data[:, 1])
    v = data[:, 2].reshape(len(y), len(z))
    psi = data[:, 3].reshape(len(y), len(z))
    return y, z, v, psi, meta

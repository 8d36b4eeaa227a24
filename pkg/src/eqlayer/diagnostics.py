"""Numerical certificates of the system's energy structure.

Per z-slice, E(Z) = int v psi dy obeys (for solutions with sources s and
y = 0 data V, Upsilon, Psi; upper y-boundary homogeneous)

    dE/dZ = 1/2 int (|d_y^2 psi|^2 + |d_y v|^2) dy        [always]
          + int (v^2 + psi^2) dy                          [zero-order variant]
          + z v psi|_0 - 1/2 d_y^3 psi psi|_0
            + 1/2 d_y^2 psi d_y psi|_0 + 1/2 v d_y v|_0   [boundary flux]
          + int (s_psi psi + s_v v) dy                    [source pairing]

With homogeneous data and zero sources only the first line survives, the
monotonicity statement dE/dZ >= 0 of the uniqueness argument; the flux and
pairing terms are evaluated from the solution's own traces so they vanish
identically in that regime.  ``dE_rhs`` is the full identity (exact in the
continuum for every admissible solve), ``dE_bulk`` the derivative terms
alone.

The bilinear profile Q(Z) = int v^W psi^V dy generalizes E (E is its
quadratic form) and carries the continuity estimate behind the transparent
operator.  The interior Caccioppoli check bounds fourth/third y-derivatives
on interior windows by the energy norm plus a weighted-L^2 surrogate of the
dual norm of d_y^2 s (exact dual norms are not grid-computable; the
surrogate is labeled as such in reports).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import ProblemSpec
from .errors import PreconditionError, SpecificationError
from .fields import (StatePair, dy, dyy, norm_E0, trapezoid_weights)
from .operators import DIFFUSION_COEFF


def _dy3_onesided(col: np.ndarray, hy: float) -> float:
    """Second-order one-sided third derivative at the first node."""
    c = np.array([-2.5, 9.0, -12.0, 7.0, -1.5])
    return float(c @ col[:5]) / hy**3


def _dy2_onesided(col: np.ndarray, hy: float) -> float:
    c = np.array([2.0, -5.0, 4.0, -1.0])
    return float(c @ col[:4]) / hy**2


def _dy1_onesided(col: np.ndarray, hy: float) -> float:
    c = np.array([-1.5, 2.0, -0.5])
    return float(c @ col[:3]) / hy


@dataclass(eq=False)
class EnergyProfile:
    z_nodes: np.ndarray
    E_values: np.ndarray
    dE_fd: np.ndarray
    dE_rhs: np.ndarray
    dE_bulk: np.ndarray
    flux: np.ndarray
    source_pairing: np.ndarray

    def interior_mismatch(self, margin: int = 2) -> float:
        """Relative L^2 gap between dE_fd and dE_rhs away from the z-ends
        (one-sided z-stencils there pollute the identity)."""
        sl = slice(margin, len(self.z_nodes) - margin)
        num = float(np.linalg.norm(self.dE_fd[sl] - self.dE_rhs[sl]))
        den = max(float(np.linalg.norm(self.dE_rhs[sl])), 1e-300)
        return num / den

    def min_dE_fd(self, margin: int = 2) -> float:
        sl = slice(margin, len(self.z_nodes) - margin)
        return float(np.min(self.dE_fd[sl]))

    def write_csv(self, path, metadata=None) -> None:
        meta = {"n_z": len(self.z_nodes)}
        if metadata:
            meta.update(metadata)
        with open(path, "w") as fh:
            for key in meta:
                fh.write(f"# {key}={meta[key]}\n")
            fh.write("z,E,dE_fd,dE_rhs\n")
            for j, zv in enumerate(self.z_nodes):
                fh.write(f"{zv:.17g},{self.E_values[j]:.17g},"
                         f"{self.dE_fd[j]:.17g},{self.dE_rhs[j]:.17g}\n")


def _slice_quantities(u: StatePair):
    grid = u.grid
    v, psi = u.v.values, u.psi.values
    wy = trapezoid_weights(grid.Ny + 1, grid.hy)
    dyv = dy(v, grid.hy)
    dyypsi = dyy(psi, grid.hy)
    return grid, v, psi, wy, dyv, dyypsi


def energy_profile(u: StatePair, variant: bool = False,
                   spec: Optional[ProblemSpec] = None) -> EnergyProfile:
    """Slice energy E(Z), centered-difference dE_fd, and the identity RHS.

    ``variant`` adds the zero-order L^2 terms.  Passing the spec supplies
    the source pairing; boundary flux is always computed from the
    solution's own y = 0 traces (zero for homogeneous data).
    """
    grid, v, psi, wy, dyv, dyypsi = _slice_quantities(u)
    z = grid.z_nodes
    hy = grid.hy

    E = wy @ (v * psi)
    dE_fd = np.empty_like(E)
    dE_fd[1:-1] = (E[2:] - E[:-2]) / (2 * grid.hz)
    dE_fd[0] = (-3 * E[0] + 4 * E[1] - E[2]) / (2 * grid.hz)
    dE_fd[-1] = (3 * E[-1] - 4 * E[-2] + E[-3]) / (2 * grid.hz)

    bulk = DIFFUSION_COEFF * (wy @ (dyypsi**2 + dyv**2))
    if variant:
        bulk = bulk + wy @ (v**2 + psi**2)

    flux = np.zeros_like(E)
    for j in range(len(z)):
        vc, pc = v[:, j], psi[:, j]
        flux[j] = (z[j] * vc[0] * pc[0]
                   - DIFFUSION_COEFF * _dy3_onesided(pc, hy) * pc[0]
                   + DIFFUSION_COEFF * _dy2_onesided(pc, hy) * _dy1_onesided(pc, hy)
                   + DIFFUSION_COEFF * vc[0] * _dy1_onesided(vc, hy))

    pairing = np.zeros_like(E)
    if spec is not None:
        spsi, sv = spec.sample_sources()
        pairing = wy @ (spsi * psi + sv * v)

    return EnergyProfile(z_nodes=z.copy(), E_values=E, dE_fd=dE_fd,
                         dE_rhs=bulk + flux + pairing, dE_bulk=bulk,
                         flux=flux, source_pairing=pairing)


@dataclass(eq=False)
class BilinearProfile:
    z_nodes: np.ndarray
    Q_values: np.ndarray
    dQ_fd: np.ndarray
    dQ_rhs: np.ndarray


def q_profile(uV: StatePair, uW: StatePair, variant: bool = True) -> BilinearProfile:
    """Bilinear slice profile Q(Z) = int v^W psi^V dy and its derivative
    identity (derivative terms at weight 1/2, zero-order terms at 1).

    With uW = uV this reduces exactly to the energy profile of
    :func:`energy_profile` for homogeneous-data solves.
    """
    if uV.grid.shape() != uW.grid.shape():
        raise SpecificationError("q_profile needs both states on one grid")
    grid = uV.grid
    wy = trapezoid_weights(grid.Ny + 1, grid.hy)
    vV, pV = uV.v.values, uV.psi.values
    vW, pW = uW.v.values, uW.psi.values

    Q = wy @ (vW * pV)
    dQ_fd = np.empty_like(Q)
    dQ_fd[1:-1] = (Q[2:] - Q[:-2]) / (2 * grid.hz)
    dQ_fd[0] = (-3 * Q[0] + 4 * Q[1] - Q[2]) / (2 * grid.hz)
    dQ_fd[-1] = (3 * Q[-1] - 4 * Q[-2] + Q[-3]) / (2 * grid.hz)

    rhs = DIFFUSION_COEFF * (wy @ (dyy(pV, grid.hy) * dyy(pW, grid.hy)
                                   + dy(vV, grid.hy) * dy(vW, grid.hy)))
    if variant:
        rhs = rhs + wy @ (vV * vW + pV * pW)
    return BilinearProfile(z_nodes=grid.z_nodes.copy(), Q_values=Q,
                           dQ_fd=dQ_fd, dQ_rhs=rhs)


def trace_half_norm(trace: np.ndarray, Ymax: float) -> float:
    """Discrete H^(1/2)-type surrogate norm of an interior-node trace."""
    from scipy.fft import dst
    t = np.asarray(trace, dtype=float)
    xi = np.arange(1, len(t) + 1) * np.pi / Ymax
    coeff = dst(t, type=1, norm="ortho")
    return float(np.sqrt(np.sum(np.sqrt(1.0 + xi**2) * coeff**2)))


def dual_norm_surrogate(g_psi: np.ndarray, g_v: np.ndarray, grid) -> float:
    """Weighted-L^2 surrogate of the energy-dual norm of a source pair.

    Pairing s_psi against psi/(1+y^2) and s_v against v/(1+y) bounds the
    duality bracket; exact dual norms are not grid-computable, so reports
    label this value a surrogate.
    """
    y = grid.y_nodes[:, None]
    wy = trapezoid_weights(grid.Ny + 1, grid.hy)
    wz = trapezoid_weights(grid.Nz + 1, grid.hz)
    q = wy @ (((1.0 + y**2) * g_psi)**2) @ wz + wy @ (((1.0 + y) * g_v)**2) @ wz
    return float(np.sqrt(q))


@dataclass(eq=False)
class CaccioppoliReport:
    y0: float
    z1: float
    lhs: float
    rhs_energy_sq: float
    rhs_dual_sq: float

    @property
    def ratio(self) -> float:
        return self.lhs / max(self.rhs_energy_sq + self.rhs_dual_sq, 1e-300)


def caccioppoli_check(u: StatePair, spec: ProblemSpec, y0: float, z1: float) -> CaccioppoliReport:
    """Interior-regularity ratio: high-derivative window integral over the
    energy norm plus the dual surrogate of d_y^2 s.

    LHS = int_{y>y0, z<z1} |d_y^4 psi|^2 + |d_y^3 v|^2 via centered interior
    stencils; needs y0 >= 4 hy of room.
    """
    grid = u.grid
    if y0 < 4 * grid.hy:
        raise PreconditionError(
            f"y0={y0} too small: interior third/fourth-derivative stencils "
            f"need y0 >= 4 hy = {4 * grid.hy}")
    v, psi = u.v.values, u.psi.values
    hy = grid.hy

    d4psi = np.zeros_like(psi)
    d4psi[2:-2] = (psi[:-4] - 4 * psi[1:-3] + 6 * psi[2:-2]
                   - 4 * psi[3:-1] + psi[4:]) / hy**4
    d3v = np.zeros_like(v)
    d3v[2:-2] = (-v[:-4] + 2 * v[1:-3] - 2 * v[3:-1] + v[4:]) / (2 * hy**3)

    in_y = grid.y_nodes >= y0
    in_z = grid.z_nodes <= z1
    in_y[:2] = in_y[-2:] = False
    wy = trapezoid_weights(grid.Ny + 1, grid.hy) * in_y
    wz = trapezoid_weights(grid.Nz + 1, grid.hz) * in_z
    lhs = float(wy @ (d4psi**2 + d3v**2) @ wz)

    spsi, sv = spec.sample_sources()
    d2spsi = np.zeros_like(spsi)
    d2spsi[1:-1] = (spsi[2:] - 2 * spsi[1:-1] + spsi[:-2]) / hy**2
    d2sv = np.zeros_like(sv)
    d2sv[1:-1] = (sv[2:] - 2 * sv[1:-1] + sv[:-2]) / hy**2

    return CaccioppoliReport(y0=y0, z1=z1, lhs=lhs,
                             rhs_energy_sq=norm_E0(u) ** 2,
                             rhs_dual_sq=dual_norm_surrogate(d2spsi, d2sv, grid) ** 2)


def write_report(path, entries: dict) -> None:
    """Flat key=value diagnostics file, insertion-ordered."""
    with open(path, "w") as fh:
        for key, val in entries.items():
            if isinstance(val, float):
                fh.write(f"{key}={val:.17g}\n")
            else:
                fh.write(f"{key}={val}\n")

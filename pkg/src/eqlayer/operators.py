"""Sparse finite-difference assembly of the transport-diffusion system.

Unknown ordering is [all v nodes; all psi nodes], row-major over
(y-index, z-index).  Interior v-rows discretize

    d_z v + z d_y v - 1/2 d_y^4 psi [- psi] = s_psi

and interior psi-rows

    d_z psi + z d_y psi + 1/2 d_y^2 v [- v] = s_v.

Stencils: d_y^2 (1,-2,1)/hy^2; d_y^4 (1,-4,6,-4,1)/hy^4; z d_y centered;
d_z centered in the interior and first-order one-sided at z-interval
endpoints where no boundary row replaces the equation.  The d_y^4 rows next
to the y-boundaries are closed ghost-free by eliminating the ghost node
with the one-sided d_y psi condition.

Boundary rows:
    y = 0    : v = V, psi = Psi, one-sided d_y psi = Upsilon
    y = Ymax : v = 0, psi = 0, one-sided d_y psi = 0
    z rows   : quarter plane  -> psi = 0 at z = 0, transparent row at Zmax
               strip          -> psi = 0 at z = 0, psi - Lambda v = 0 at H
               upper strip    -> v = v_H at z = H, transparent row at Zmax

The transparent truncation row applies the sine-transform multiplier of
:func:`eqlayer.spectral.transparent_multiplier`; it is exact on the full
line and an approximation on the quarter plane (refine by raising Zmax).

``adapted_interfaces`` lists interior heights where the d_z rows switch to
one-sided (v-equation downward, psi-equation upward).  With that row
assignment the matrix tiles exactly into a strip block below each interface
and an upper-strip block above it, which is what makes the discrete
domain-splitting identity exact up to factorization roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domain import (CASE_QUARTER_PLANE, CASE_STRIP, CASE_UPPER_STRIP,
                     BoundaryData, DomainCase, Grid, LambdaChoice, ProblemSpec,
                     eval_trace, validate)
from .errors import AssemblyError, PreconditionError, SpecificationError
from .fields import Field, StatePair
from .spectral import (fourier_multiplier_matrix, lambda_exact,
                       sine_multiplier_matrix, transparent_multiplier)

DIFFUSION_COEFF = 0.5

ROW_KINDS = (
    "interior_v", "interior_psi",
    "bc_y0_v", "bc_y0_psi", "bc_y0_dpsi",
    "bc_ymax_v", "bc_ymax_psi", "bc_ymax_dpsi",
    "bc_z_psi0", "bc_z_v", "bc_z_transparent", "bc_z_lambda", "bc_z_pin",
)
K = {name: code for code, name in enumerate(ROW_KINDS)}


@dataclass(eq=False)
class DiscreteOperator:
    """Assembled sparse system with per-row bookkeeping."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    row_kind: np.ndarray       # int codes into ROW_KINDS
    grid: Grid
    case_tag: str
    zero_order: bool
    n_scalar: int              # unknowns per component
    meta: dict = field(default_factory=dict)

    def kind_names(self) -> np.ndarray:
        return np.asarray(ROW_KINDS)[self.row_kind]

    def split_state(self, x: np.ndarray) -> StatePair:
        shape = self.grid.shape()
        v = x[:self.n_scalar].reshape(shape)
        psi = x[self.n_scalar:].reshape(shape)
        return StatePair.from_arrays(v, psi, self.grid)

    def pack_state(self, u: StatePair) -> np.ndarray:
        return np.concatenate([u.v.values.ravel(), u.psi.values.ravel()])

    def count_bc_y0(self) -> int:
        """Number of conditions imposed per z-line of the y = 0 boundary."""
        Nz = self.grid.Nz
        j = max(1, Nz // 2)
        iv0 = 0 * (Nz + 1) + j
        ip0 = self.n_scalar + iv0
        ip1 = self.n_scalar + 1 * (Nz + 1) + j
        count = int(self.row_kind[iv0] == K["bc_y0_v"])
        count += int(self.row_kind[ip0] == K["bc_y0_psi"])
        count += int(self.row_kind[ip1] == K["bc_y0_dpsi"])
        return count

    def dump_coordinates(self, path) -> None:
        """Write the matrix in (row, col, value) coordinate text format."""
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# shape={self.matrix.shape[0]}x{self.matrix.shape[1]} "
                     f"nnz={coo.nnz} case={self.case_tag}\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {v:.17g}\n")


class _Builder:
    def __init__(self, n_rows):
        self.rows = []
        self.cols = []
        self.vals = []
        self.rhs = np.zeros(n_rows)
        self.kind = np.full(n_rows, -1, dtype=np.int16)

    def add(self, r, c, v):
        r, c, v = np.broadcast_arrays(r, c, v)
        self.rows.append(np.ravel(r).astype(np.int64))
        self.cols.append(np.ravel(c).astype(np.int64))
        self.vals.append(np.ravel(v).astype(float))

    def tag(self, r, code):
        rr = np.ravel(np.asarray(r, dtype=np.int64))
        taken = self.kind[rr] != -1
        if np.any(taken):
            bad = rr[taken][0]
            raise AssemblyError(
                f"row {bad} assigned twice ({ROW_KINDS[self.kind[bad]]} then {ROW_KINDS[code]})")
        self.kind[rr] = code

    def finish(self, n):
        if np.any(self.kind == -1):
            missing = int(np.flatnonzero(self.kind == -1)[0])
            raise AssemblyError(f"row {missing} has no equation (missing condition)")
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        vals = np.concatenate(self.vals)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _dz_groups(j_eq, j_up, j_down):
    """Partition equation lines by their d_z stencil."""
    j_eq = list(j_eq)
    up = [j for j in j_eq if j in j_up]
    down = [j for j in j_eq if j in j_down and j not in j_up]
    centered = [j for j in j_eq if j not in j_up and j not in j_down]
    return centered, up, down


def interface_indices(grid: Grid, heights) -> list[int]:
    """z-node indices of splitting interfaces; each must hit a node with at
    least one equation line on each side."""
    out = []
    for zval in heights:
        j = int(round((zval - grid.z_nodes[0]) / grid.hz))
        if not (2 <= j <= grid.Nz - 2) or abs(grid.z_nodes[j] - zval) > 1e-9 * max(1.0, abs(zval)):
            raise AssemblyError(
                f"interface height {zval} does not hit a z-node in the "
                f"interior band [2 hz, Zmax - 2 hz]")
        out.append(j)
    return out


def assemble(spec: ProblemSpec, adapted_interfaces=(), cap_matrix=None) -> DiscreteOperator:
    """Build the sparse operator and right-hand side for one problem spec.

    ``cap_matrix`` replaces the spectral multiplier in the transparent
    truncation row (used when capping a layer with an operator built on the
    domain above it).
    """
    report = validate(spec)
    if not report.ok:
        raise SpecificationError("invalid problem spec: " + "; ".join(report.violations))

    grid, case = spec.grid, spec.case
    Ny, Nz, hy, hz = grid.Ny, grid.Nz, grid.hy, grid.hz
    z = grid.z_nodes
    theta = 1.0 if spec.zero_order else 0.0
    N = (Ny + 1) * (Nz + 1)
    b = _Builder(2 * N)

    def iv(i, j):
        return np.asarray(i) * (Nz + 1) + np.asarray(j)

    def ipsi(i, j):
        return N + iv(i, j)

    Vdat = eval_trace(spec.bc.V, z)
    Psidat = eval_trace(spec.bc.Psi, z)
    Upsdat = eval_trace(spec.bc.Upsilon, z)
    spsi, sv = spec.sample_sources()
    adapted = interface_indices(grid, adapted_interfaces)

    tag = case.tag
    bottom_is_psi0 = tag in (CASE_QUARTER_PLANE, CASE_STRIP)
    bottom_is_vdata = tag == CASE_UPPER_STRIP
    top_is_transparent = tag in (CASE_QUARTER_PLANE, CASE_UPPER_STRIP)

    ii = np.arange(1, Ny)                      # interior y-nodes
    i_bulk = np.arange(2, Ny - 1)              # full 5-point / psi-equation range

    # ----- v-equation rows (the s_psi equation) -----------------------------
    j_v = range(0, Nz + 1) if not bottom_is_vdata else range(1, Nz + 1)
    cen, up, down = _dz_groups(j_v, {0} if not bottom_is_vdata else set(),
                               {Nz, *adapted})
    for jlist, mode in ((cen, "centered"), (up, "up"), (down, "down")):
        if not jlist:
            continue
        I, J = np.meshgrid(ii, np.asarray(jlist), indexing="ij")
        R = iv(I, J)
        if mode == "centered":
            b.add(R, iv(I, J + 1), 1.0 / (2 * hz))
            b.add(R, iv(I, J - 1), -1.0 / (2 * hz))
        elif mode == "up":
            b.add(R, iv(I, J + 1), 1.0 / hz)
            b.add(R, iv(I, J), -1.0 / hz)
        else:
            b.add(R, iv(I, J), 1.0 / hz)
            b.add(R, iv(I, J - 1), -1.0 / hz)
        ZJ = z[J]
        b.add(R, iv(I + 1, J), ZJ / (2 * hy))
        b.add(R, iv(I - 1, J), -ZJ / (2 * hy))
        if theta:
            b.add(R, ipsi(I, J), -theta)
        b.tag(R, K["interior_v"])
        b.rhs[np.ravel(R)] += np.ravel(spsi[I, J])

    # d_y^4 psi in the v-equation, over every line carrying a v-equation
    j_all = np.asarray(sorted(cen + up + down))
    c4 = -DIFFUSION_COEFF / hy**4
    if len(i_bulk):
        I, J = np.meshgrid(i_bulk, j_all, indexing="ij")
        R = iv(I, J)
        for off, w in ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)):
            b.add(R, ipsi(I + off, J), c4 * w)
    # near-boundary rows: ghost-free one-sided 7-node stencil, third order
    # (the y-profiles steepen toward y = 0, so the closure gets one more
    # node than plain second order would need); the boundary data enters
    # only through the psi / d_y psi rows
    ONESIDED4 = ((-1, 17.0 / 6.0), (0, -14.0), (1, 57.0 / 2.0), (2, -92.0 / 3.0),
                 (3, 37.0 / 2.0), (4, -6.0), (5, 5.0 / 6.0))
    Rlo = iv(1, j_all)
    for off, w in ONESIDED4:
        b.add(Rlo, ipsi(1 + off, j_all), c4 * w)
    Rhi = iv(Ny - 1, j_all)
    for off, w in ONESIDED4:
        b.add(Rhi, ipsi(Ny - 1 - off, j_all), c4 * w)

    # ----- psi-equation rows (the s_v equation) ------------------------------
    # Above a psi data row the first equation line is one-sided DOWN: a
    # fully centered d_z chain between value rows decouples the odd/even
    # z-parities (weakly damped checkerboard), and the downward stencil is
    # also what couples the z = 0 data into the chain at low frequency.
    # Above a v data line (upper strip, adapted interfaces) the psi slot
    # holds the equation itself, one-sided UP.
    j_p = range(1, Nz) if not bottom_is_vdata else range(0, Nz)
    up_lines = ({0} if bottom_is_vdata else set()) | set(adapted)
    down_lines = {1} if bottom_is_psi0 else set()
    cen, up, down = _dz_groups(j_p, up_lines, down_lines)
    psi_eq_lines = np.asarray(sorted(cen + up + down))
    c2 = DIFFUSION_COEFF / hy**2
    for jlist, mode in ((cen, "centered"), (up, "up"), (down, "down")):
        if not jlist:
            continue
        I, J = np.meshgrid(i_bulk, np.asarray(jlist), indexing="ij")
        R = ipsi(I, J)
        if mode == "centered":
            b.add(R, ipsi(I, J + 1), 1.0 / (2 * hz))
            b.add(R, ipsi(I, J - 1), -1.0 / (2 * hz))
        elif mode == "up":
            b.add(R, ipsi(I, J + 1), 1.0 / hz)
            b.add(R, ipsi(I, J), -1.0 / hz)
        else:
            b.add(R, ipsi(I, J), 1.0 / hz)
            b.add(R, ipsi(I, J - 1), -1.0 / hz)
        ZJ = z[J]
        b.add(R, ipsi(I + 1, J), ZJ / (2 * hy))
        b.add(R, ipsi(I - 1, J), -ZJ / (2 * hy))
        for off, w in ((-1, 1.0), (0, -2.0), (1, 1.0)):
            b.add(R, iv(I + off, J), c2 * w)
        if theta:
            b.add(R, iv(I, J), -theta)
        b.tag(R, K["interior_psi"])
        b.rhs[np.ravel(R)] += np.ravel(sv[I, J])

    # ----- y-boundary rows ----------------------------------------------------
    jj = np.arange(Nz + 1)
    r = iv(0, jj)
    b.add(r, r, 1.0)
    b.tag(r, K["bc_y0_v"])
    b.rhs[r] = Vdat
    r = iv(Ny, jj)
    b.add(r, r, 1.0)
    b.tag(r, K["bc_ymax_v"])
    r = ipsi(0, jj)
    b.add(r, r, 1.0)
    b.tag(r, K["bc_y0_psi"])
    b.rhs[np.ravel(r)] = Psidat
    r = ipsi(Ny, jj)
    b.add(r, r, 1.0)
    b.tag(r, K["bc_ymax_psi"])

    # one-sided d_y psi rows, on every line carrying a psi-equation
    r = ipsi(1, psi_eq_lines)
    b.add(r, ipsi(0, psi_eq_lines), -3.0 / (2 * hy))
    b.add(r, ipsi(1, psi_eq_lines), 4.0 / (2 * hy))
    b.add(r, ipsi(2, psi_eq_lines), -1.0 / (2 * hy))
    b.tag(r, K["bc_y0_dpsi"])
    b.rhs[np.ravel(r)] = Upsdat[psi_eq_lines]
    r = ipsi(Ny - 1, psi_eq_lines)
    b.add(r, ipsi(Ny, psi_eq_lines), 3.0 / (2 * hy))
    b.add(r, ipsi(Ny - 1, psi_eq_lines), -4.0 / (2 * hy))
    b.add(r, ipsi(Ny - 2, psi_eq_lines), 1.0 / (2 * hy))
    b.tag(r, K["bc_ymax_dpsi"])

    # ----- z-boundary rows ------------------------------------------------------
    if bottom_is_psi0:
        r = ipsi(ii, 0)
        b.add(r, r, 1.0)
        b.tag(r, K["bc_z_psi0"])
    else:
        vH = eval_trace(spec.bc.vH, grid.y_nodes)
        r = iv(ii, 0)
        b.add(r, r, 1.0)
        b.tag(r, K["bc_z_v"])
        b.rhs[np.ravel(r)] = vH[ii]

    if top_is_transparent:
        if cap_matrix is not None:
            M = np.asarray(cap_matrix, dtype=float)
            if M.shape != (Ny - 1, Ny - 1):
                raise AssemblyError(
                    f"cap matrix has shape {M.shape}, expected {(Ny - 1, Ny - 1)}")
        else:
            M = sine_multiplier_matrix(
                Ny, case.Ymax,
                lambda xi: transparent_multiplier(xi, zero_order=spec.zero_order,
                                                  kappa=DIFFUSION_COEFF))
        r = ipsi(ii, Nz)
        b.add(r, r, 1.0)
        IL, LL = np.meshgrid(ii, ii, indexing="ij")
        b.add(ipsi(IL, Nz), iv(LL, Nz), -M)
        b.tag(r, K["bc_z_transparent"])
    else:
        choice = spec.bc.lambda_choice
        r = ipsi(ii, Nz)
        b.add(r, r, 1.0)
        if choice.kind == "scaled":
            b.add(r, iv(ii, Nz), -choice.scale)
        elif choice.kind == "spectral":
            M = sine_multiplier_matrix(Ny, case.Ymax,
                                       lambda xi: transparent_multiplier(xi))
            IL, LL = np.meshgrid(ii, ii, indexing="ij")
            b.add(ipsi(IL, Nz), iv(LL, Nz), -M)
        elif choice.kind == "matrix":
            M = choice.matrix
            if M.shape != (Ny - 1, Ny - 1):
                raise AssemblyError(
                    f"lambda matrix has shape {M.shape}, expected {(Ny - 1, Ny - 1)}")
            IL, LL = np.meshgrid(ii, ii, indexing="ij")
            b.add(ipsi(IL, Nz), iv(LL, Nz), -M)
        b.tag(r, K["bc_z_lambda"])

    A = b.finish(2 * N)
    return DiscreteOperator(matrix=A, rhs=b.rhs, row_kind=b.kind, grid=grid,
                            case_tag=tag, zero_order=spec.zero_order, n_scalar=N,
                            meta={"adapted_interfaces": tuple(adapted)})


# ---------------------------------------------------------------------------
# Periodic-in-y variant (oracle comparisons on the full line)
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PeriodicOperator:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    Ny: int
    Nz: int
    period: float
    z_nodes: np.ndarray
    zero_order: bool

    def split_state(self, x):
        n = self.Ny * (self.Nz + 1)
        v = x[:n].reshape(self.Ny, self.Nz + 1)
        psi = x[n:].reshape(self.Ny, self.Nz + 1)
        return v, psi


def assemble_periodic(period, Ny, Zmax, Nz, psi_bottom=None, s_psi=None, s_v=None,
                      zero_order=False) -> PeriodicOperator:
    """Assemble the system on a periodic y-line, z in [0, Zmax].

    Rows: psi data row at z = 0, transparent FFT row at z = Zmax, interior
    equations elsewhere with the same stencils as the quarter-plane path.
    For the plain system the constant-in-y v mode is annihilated by
    transport alone, so one top v-equation is replaced by a mean pin
    matching the oracle's zero-mean convention.
    """
    hy = period / Ny
    hz = Zmax / Nz
    y = np.arange(Ny) * hy
    z = np.linspace(0.0, Zmax, Nz + 1)
    theta = 1.0 if zero_order else 0.0
    N = Ny * (Nz + 1)
    b = _Builder(2 * N)

    def iv(i, j):
        return (np.asarray(i) % Ny) * (Nz + 1) + np.asarray(j)

    def ipsi(i, j):
        return N + iv(i, j)

    Y, Z = np.meshgrid(y, z, indexing="ij")
    spsi = np.zeros((Ny, Nz + 1)) if s_psi is None else np.asarray(s_psi(Y, Z), dtype=float)
    sv = np.zeros((Ny, Nz + 1)) if s_v is None else np.asarray(s_v(Y, Z), dtype=float)
    psi0 = np.zeros(Ny) if psi_bottom is None else (
        np.asarray(psi_bottom(y), dtype=float) if callable(psi_bottom)
        else np.asarray(psi_bottom, dtype=float))

    ii = np.arange(Ny)
    # the plain system annihilates the constant-in-y v mode; pin it instead
    # of emitting the (0, Nz) one-sided v-equation
    pin_mean = not zero_order
    ii_down = np.arange(1, Ny) if pin_mean else ii

    # v-equation on every line; up at j=0, down at j=Nz
    for ilist, jlist, mode in ((ii, list(range(1, Nz)), "centered"),
                               (ii, [0], "up"), (ii_down, [Nz], "down")):
        I, J = np.meshgrid(ilist, np.asarray(jlist), indexing="ij")
        R = iv(I, J)
        if mode == "centered":
            b.add(R, iv(I, J + 1), 1.0 / (2 * hz))
            b.add(R, iv(I, J - 1), -1.0 / (2 * hz))
        elif mode == "up":
            b.add(R, iv(I, J + 1), 1.0 / hz)
            b.add(R, iv(I, J), -1.0 / hz)
        else:
            b.add(R, iv(I, J), 1.0 / hz)
            b.add(R, iv(I, J - 1), -1.0 / hz)
        ZJ = z[J]
        b.add(R, iv(I + 1, J), ZJ / (2 * hy))
        b.add(R, iv(I - 1, J), -ZJ / (2 * hy))
        c4 = -DIFFUSION_COEFF / hy**4
        for off, w in ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)):
            b.add(R, ipsi(I + off, J), c4 * w)
        if theta:
            b.add(R, ipsi(I, J), -theta)
        b.tag(R, K["interior_v"])
        b.rhs[np.ravel(R)] += np.ravel(spsi[I, J])

    # psi-equation on interior lines; one-sided DOWN at the first line to
    # couple the z-parities and the z = 0 data (see the quarter-plane path)
    for jlist, mode in (([1], "down"), (list(range(2, Nz)), "centered")):
        if not jlist:
            continue
        I, J = np.meshgrid(ii, np.asarray(jlist), indexing="ij")
        R = ipsi(I, J)
        if mode == "down":
            b.add(R, ipsi(I, J), 1.0 / hz)
            b.add(R, ipsi(I, J - 1), -1.0 / hz)
        else:
            b.add(R, ipsi(I, J + 1), 1.0 / (2 * hz))
            b.add(R, ipsi(I, J - 1), -1.0 / (2 * hz))
        ZJ = z[J]
        b.add(R, ipsi(I + 1, J), ZJ / (2 * hy))
        b.add(R, ipsi(I - 1, J), -ZJ / (2 * hy))
        c2 = DIFFUSION_COEFF / hy**2
        for off, w in ((-1, 1.0), (0, -2.0), (1, 1.0)):
            b.add(R, iv(I + off, J), c2 * w)
        if theta:
            b.add(R, iv(I, J), -theta)
        b.tag(R, K["interior_psi"])
        b.rhs[np.ravel(R)] += np.ravel(sv[I, J])

    # z = 0 data row
    r = ipsi(ii, 0)
    b.add(r, r, 1.0)
    b.tag(r, K["bc_z_psi0"])
    b.rhs[np.ravel(r)] = psi0

    # transparent cap at z = Zmax
    M = fourier_multiplier_matrix(
        Ny, period, lambda xi: transparent_multiplier(xi, zero_order=zero_order,
                                                      kappa=DIFFUSION_COEFF))
    r = ipsi(ii, Nz)
    b.add(r, r, 1.0)
    IL, LL = np.meshgrid(ii, ii, indexing="ij")
    b.add(ipsi(IL, Nz), iv(LL, Nz), -M)
    b.tag(r, K["bc_z_transparent"])

    if pin_mean:
        row = int(iv(0, Nz))
        b.add(np.full(Ny, row), iv(ii, Nz), 1.0)
        b.tag(np.array([row]), K["bc_z_pin"])
        b.rhs[row] = 0.0

    A = b.finish(2 * N)
    return PeriodicOperator(matrix=A, rhs=b.rhs, Ny=Ny, Nz=Nz, period=period,
                            z_nodes=z, zero_order=zero_order)


# ---------------------------------------------------------------------------
# Structural transport / diffusion operators (property tests)
# ---------------------------------------------------------------------------

def transport_matrix(grid: Grid) -> sp.csr_matrix:
    """Cross-wise transport T: (v, psi) -> ((d_z + z d_y) psi, (d_z + z d_y) v).

    Pure centered interior stencils (boundary rows left empty); exactly
    skew-symmetric on vectors supported away from all boundaries.
    """
    Ny, Nz, hy, hz = grid.Ny, grid.Nz, grid.hy, grid.hz
    z = grid.z_nodes
    N = (Ny + 1) * (Nz + 1)

    def iv(i, j):
        return np.asarray(i) * (Nz + 1) + np.asarray(j)

    I, J = np.meshgrid(np.arange(1, Ny), np.arange(1, Nz), indexing="ij")
    rows, cols, vals = [], [], []

    def add(r, c, v):
        r, c, v = np.broadcast_arrays(r, c, v)
        rows.append(np.ravel(r))
        cols.append(np.ravel(c))
        vals.append(np.ravel(np.asarray(v, dtype=float)))

    ZJ = z[J]
    R = iv(I, J)
    # v-block output row takes transport of psi
    add(R, N + iv(I, J + 1), 1.0 / (2 * hz))
    add(R, N + iv(I, J - 1), -1.0 / (2 * hz))
    add(R, N + iv(I + 1, J), ZJ / (2 * hy))
    add(R, N + iv(I - 1, J), -ZJ / (2 * hy))
    # psi-block output row takes transport of v
    add(N + R, iv(I, J + 1), 1.0 / (2 * hz))
    add(N + R, iv(I, J - 1), -1.0 / (2 * hz))
    add(N + R, iv(I + 1, J), ZJ / (2 * hy))
    add(N + R, iv(I - 1, J), -ZJ / (2 * hy))
    return sp.csr_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(2 * N, 2 * N))


def diffusion_matrix(grid: Grid) -> sp.csr_matrix:
    """Diagonal diffusion D = diag(d_y^4, -d_y^2), interior stencils only.

    Symmetric positive semidefinite on vectors supported away from the
    y-boundaries.
    """
    Ny, Nz, hy = grid.Ny, grid.Nz, grid.hy
    N = (Ny + 1) * (Nz + 1)

    def iv(i, j):
        return np.asarray(i) * (Nz + 1) + np.asarray(j)

    rows, cols, vals = [], [], []

    def add(r, c, v):
        r, c, v = np.broadcast_arrays(r, c, v)
        rows.append(np.ravel(r))
        cols.append(np.ravel(c))
        vals.append(np.ravel(np.asarray(v, dtype=float)))

    jj = np.arange(Nz + 1)
    I, J = np.meshgrid(np.arange(2, Ny - 1), jj, indexing="ij")
    R = iv(I, J)
    for off, w in ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)):
        add(R, iv(I + off, J), w / hy**4)
    I, J = np.meshgrid(np.arange(1, Ny), jj, indexing="ij")
    R = N + iv(I, J)
    for off, w in ((-1, 1.0), (0, -2.0), (1, 1.0)):
        add(R, N + iv(I + off, J), -w / hy**2)
    return sp.csr_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(2 * N, 2 * N))


def dy4_via_composition(values: np.ndarray, hy: float) -> np.ndarray:
    """d_y^4 as two applications of the 3-point d_y^2 (interior nodes only)."""
    d2 = np.zeros_like(values)
    d2[1:-1] = (values[2:] - 2 * values[1:-1] + values[:-2]) / hy**2
    d4 = np.zeros_like(values)
    d4[2:-2] = (d2[3:-1] - 2 * d2[2:-2] + d2[1:-3]) / hy**2
    return d4


def dy4_direct(values: np.ndarray, hy: float) -> np.ndarray:
    d4 = np.zeros_like(values)
    d4[2:-2] = (values[:-4] - 4 * values[1:-3] + 6 * values[2:-2]
                - 4 * values[3:-1] + values[4:]) / hy**4
    return d4


# ---------------------------------------------------------------------------
# Boundary-data lifting
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Lifting:
    """Field matching the boundary data plus its source-term image."""

    r: StatePair
    Lr_spsi: np.ndarray
    Lr_sv: np.ndarray


def lift_profile(y, y_cut):
    """Cubic cutoff: eta(0) = 1, eta'(0) = 0, supported in [0, y_cut]."""
    t = np.asarray(y, dtype=float) / y_cut
    return np.where(t < 1.0, (1.0 + 2.0 * t) * (1.0 - np.minimum(t, 1.0))**2, 0.0)


def lift(bc: BoundaryData, grid: Grid, case: DomainCase,
         zero_order: bool = False) -> Lifting:
    """Lift (V, Upsilon, Psi[, vH]) to a field r supported in 0 <= y <= Ymax/4.

    r_v = V(z) eta(y) [+ vH(y) eta_z(z - H) in the upper strip],
    r_psi = Psi(z) eta(y) + Upsilon(z) y eta(y).  Refuses divergent
    compatibility data.  The source image Lr is the assembled interior
    stencils applied to r (boundary rows zeroed).
    """
    probe = ProblemSpec(case=case, bc=bc, zero_order=zero_order, grid=grid)
    report = validate(probe)
    if not report.ok:
        raise PreconditionError("cannot lift incompatible data: "
                                + "; ".join(report.violations))

    y = grid.y_nodes
    z = grid.z_nodes
    y_cut = case.Ymax / 4.0
    eta = lift_profile(y, y_cut)[:, None]
    Vdat = eval_trace(bc.V, z)[None, :]
    Psidat = eval_trace(bc.Psi, z)[None, :]
    Upsdat = eval_trace(bc.Upsilon, z)[None, :]

    r_v = Vdat * eta
    r_psi = Psidat * eta + Upsdat * y[:, None] * eta
    if case.tag == CASE_UPPER_STRIP and bc.vH is not None:
        z_cut = (z[-1] - z[0]) / 4.0
        eta_z = lift_profile(z - z[0], z_cut)[None, :]
        vH = eval_trace(bc.vH, y)[:, None]
        r_v = r_v + vH * eta_z

    r = StatePair.from_arrays(r_v, r_psi, grid)

    op = assemble(probe)
    resid = op.matrix @ op.pack_state(r) - op.rhs
    interior = np.isin(op.row_kind, (K["interior_v"], K["interior_psi"]))
    resid = np.where(interior, resid, 0.0)
    Lr_spsi = resid[:op.n_scalar].reshape(grid.shape())
    Lr_sv = resid[op.n_scalar:].reshape(grid.shape())
    return Lifting(r=r, Lr_spsi=Lr_spsi, Lr_sv=Lr_sv)


def lambda_case2(choice: LambdaChoice, v_trace, Ymax: float) -> np.ndarray:
    """Apply the strip-case top operator to an interior-node v-trace."""
    t = np.asarray(v_trace, dtype=float)
    if choice.kind == "zero":
        return np.zeros_like(t)
    if choice.kind == "scaled":
        return choice.scale * t
    if choice.kind == "spectral":
        return lambda_exact(t, Ymax=Ymax, convention="sine")
    return choice.matrix @ t

"""Numerical transparent v-to-psi operator and domain splitting.

``build_lambda`` assembles the map sending interior nodal values of the
v-trace at z = H to the psi-trace of the upper-strip solve, one hat-
function column at a time (one factorization, many right-hand sides).  The
construction needs the zero-order variant, whose uniqueness makes the
column solves well defined; the plain system is reachable only through an
explicit opt-in.

``split_solve`` certifies the transparent boundary condition: with sources
supported below the interface, the whole-domain solve, assembled with
interface-adapted d_z rows, tiles exactly into the strip problem closed by
the built operator plus the upper-strip problem driven by the interface
v-trace, so glued and whole solutions agree to factorization roundoff.

``build_lambda_no_transport`` handles the variant without the z d_y term,
where odd extension diagonalizes the system per sine mode and the operator
converges to the explicit multiplier -1/|xi| (the inverse square root of
the Laplacian, negated); each mode is a stiff two-point boundary-value
problem in z, marched with centered differences, second-order one-sided
closures, and a step chosen against the modal decay rate kappa |xi|^3.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import (CASE_QUARTER_PLANE, CASE_UPPER_STRIP, BoundaryData,
                     DomainCase, Grid, LambdaChoice, ProblemSpec)
from .errors import PreconditionError, SingularSystemError
from .fields import StatePair
from .linsolve import SolveResult, solve
from .operators import DIFFUSION_COEFF, assemble, interface_indices
from .spectral import sine_frequencies, sine_multiplier_matrix

def worker_count() -> int:
    """Worker parallelism, capped by EQLAYER_THREADS."""
    cap = os.environ.get("EQLAYER_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


@dataclass(eq=False)
class LambdaMatrix:
    """Dense v-trace -> psi-trace map on interior y-nodes of one z-slice."""

    H: float
    entries: np.ndarray
    y_interior: np.ndarray
    Ymax: float
    zero_order: bool = True
    transport: bool = True
    meta: dict = field(default_factory=dict)

    def apply(self, trace):
        return self.entries @ np.asarray(trace, dtype=float)

    def quadratic_form(self, trace) -> float:
        t = np.asarray(trace, dtype=float)
        return float(t @ (self.entries @ t))

    def nonpositivity_margin(self, traces) -> float:
        """Max over traces of t.(Lambda t)/||t||^2 (negative = certified)."""
        worst = -np.inf
        for t in traces:
            t = np.asarray(t, dtype=float)
            worst = max(worst, self.quadratic_form(t) / float(t @ t))
        return float(worst)

    def asymmetry(self) -> float:
        a = self.entries
        denom = max(float(np.linalg.norm(a, 2)), 1e-300)
        return float(np.linalg.norm(a - a.T, 2)) / denom

    def dump_coordinates(self, path) -> None:
        n = self.entries.shape[0]
        with open(path, "w") as fh:
            fh.write(f"# H={self.H} Ymax={self.Ymax} n={n} "
                     f"zero_order={self.zero_order} transport={self.transport}\n")
            for i in range(n):
                for j in range(n):
                    fh.write(f"{i} {j} {self.entries[i, j]:.17g}\n")


def upper_spec(H: float, Zmax: float, Ymax: float, Ny: int, Nz: int,
               zero_order: bool = True, vH=None) -> ProblemSpec:
    """Upper-strip problem with homogeneous y-data and zero sources."""
    case = DomainCase(CASE_UPPER_STRIP, H=H, Zmax=Zmax, Ymax=Ymax)
    return ProblemSpec(case=case, bc=BoundaryData(vH=vH), zero_order=zero_order,
                       grid=Grid.build(case, Ny, Nz))


def build_lambda(spec_upper: ProblemSpec, allow_plain: bool = False,
                 adapted_interfaces=(), cap_matrix=None) -> LambdaMatrix:
    """Columns are upper-strip solves driven by nodal hat traces at z = H.

    Requires ``zero_order=True`` unless ``allow_plain`` opts into the plain
    system, whose uniqueness on the unbounded quarter plane is not settled;
    the plain operator is then a formal construction.
    """
    if spec_upper.case.tag != CASE_UPPER_STRIP:
        raise PreconditionError("build_lambda needs an upper-strip spec")
    if not spec_upper.zero_order and not allow_plain:
        raise PreconditionError(
            "transparent operator requires the zero-order variant "
            "(uniqueness); pass allow_plain=True to override")
    spsi, sv = spec_upper.sample_sources()
    if max(np.max(np.abs(spsi)), np.max(np.abs(sv))) > 0:
        raise PreconditionError("build_lambda needs a zero source term")

    op = assemble(spec_upper, adapted_interfaces=adapted_interfaces,
                  cap_matrix=cap_matrix)
    grid = spec_upper.grid
    Ny, Nz = grid.Ny, grid.Nz
    N = op.n_scalar
    try:
        lu = spla.splu(op.matrix.tocsc())
    except RuntimeError as err:
        raise SingularSystemError(f"upper-strip factorization failed: {err}") from err

    ii = np.arange(1, Ny)
    vrow = ii * (Nz + 1)             # v unknowns on the z = H line
    psirow = N + ii * (Nz + 1)
    B = np.zeros((2 * N, Ny - 1))
    B[vrow, np.arange(Ny - 1)] = 1.0
    X = lu.solve(B)
    entries = X[psirow, :]
    return LambdaMatrix(H=spec_upper.case.H, entries=entries,
                        y_interior=grid.y_nodes[1:-1], Ymax=spec_upper.case.Ymax,
                        zero_order=spec_upper.zero_order, transport=True,
                        meta={"Ny": Ny, "Nz": Nz, "Zmax": spec_upper.case.Zmax})


def _stewartson_mode_trace(xi: float, extent: float, Nz: int,
                           kappa: float = DIFFUSION_COEFF) -> float:
    """psi(0)/v(0) of the no-transport two-point BVP for one sine mode.

    d_z v = a psi, d_z psi = b v with a = kappa xi^4, b = kappa xi^2 on
    [0, extent], v(0) = 1, transparent cap psi + v/|xi| = 0 at the far end.
    Centered interior rows, second-order one-sided closures.
    """
    a = kappa * xi**4
    b = kappa * xi**2
    h = extent / Nz
    n = Nz + 1

    rows, cols, vals = [], [], []

    def add(r, c, w):
        rows.append(r)
        cols.append(c)
        vals.append(w)

    # unknowns: v_j at j, psi_j at n + j
    rhs = np.zeros(2 * n)
    add(0, 0, 1.0)
    rhs[0] = 1.0
    for j in range(1, Nz):
        add(j, j + 1, 1.0 / (2 * h))
        add(j, j - 1, -1.0 / (2 * h))
        add(j, n + j, -a)
    add(Nz, Nz, 3.0 / (2 * h))
    add(Nz, Nz - 1, -4.0 / (2 * h))
    add(Nz, Nz - 2, 1.0 / (2 * h))
    add(Nz, n + Nz, -a)

    add(n + 0, n + 0, -3.0 / (2 * h))
    add(n + 0, n + 1, 4.0 / (2 * h))
    add(n + 0, n + 2, -1.0 / (2 * h))
    add(n + 0, 0, -b)
    for j in range(1, Nz):
        add(n + j, n + j + 1, 1.0 / (2 * h))
        add(n + j, n + j - 1, -1.0 / (2 * h))
        add(n + j, j, -b)
    add(n + Nz, n + Nz, 1.0)
    add(n + Nz, Nz, 1.0 / abs(xi))

    A = sp.csr_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n)).tocsc()
    x = spla.splu(A).solve(rhs)
    return float(x[n + 0])


def build_lambda_no_transport(Ny: int, Ymax: float, extent: float = 0.5,
                              Nz: int | None = None, stiffness_target: float = 0.15,
                              kappa: float = DIFFUSION_COEFF) -> LambdaMatrix:
    """No-transport operator built per sine mode with a z-marching BVP.

    The step count follows the stiffest mode: h * kappa xi_max^3 is held at
    ``stiffness_target`` unless ``Nz`` is given, so refinement in y keeps
    the modal decay resolved.  The assembled matrix is symmetric by
    construction (a real sine multiplier).
    """
    xi = sine_frequencies(Ny, Ymax)
    if Nz is None:
        rate_max = kappa * xi[-1] ** 3
        Nz = max(32, int(np.ceil(extent * rate_max / stiffness_target)))
    workers = worker_count()
    if workers > 1 and len(xi) >= 8:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = np.array(list(pool.map(
                lambda x: _stewartson_mode_trace(x, extent, Nz, kappa), xi)))
    else:
        traces = np.array([_stewartson_mode_trace(x, extent, Nz, kappa) for x in xi])
    entries = sine_multiplier_matrix(Ny, Ymax, lambda q: np.interp(q, xi, traces))
    return LambdaMatrix(H=0.0, entries=entries, y_interior=None, Ymax=Ymax,
                        zero_order=False, transport=False,
                        meta={"Nz": Nz, "extent": extent, "mode_traces": traces})


def exact_lambda_matrix(Ny: int, Ymax: float) -> LambdaMatrix:
    """The explicit multiplier -1/|xi| as a dense sine-transform matrix."""
    entries = sine_multiplier_matrix(Ny, Ymax, lambda q: -1.0 / q)
    return LambdaMatrix(H=0.0, entries=entries, y_interior=None, Ymax=Ymax,
                        zero_order=False, transport=False, meta={"exact": True})


# ---------------------------------------------------------------------------
# Domain splitting
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SplitResult:
    whole: SolveResult
    bottom: SolveResult
    top: SolveResult
    lam: LambdaMatrix
    report: dict


def split_solve(spec_whole: ProblemSpec, H: float, H0: float,
                allow_plain: bool = False) -> SplitResult:
    """Solve whole / bottom-with-Lambda / top-with-v-trace and compare.

    Preconditions: quarter-plane spec, sources supported in z < H0 < H,
    H on a grid node.  The whole-domain assembly uses interface-adapted
    d_z rows at H, making glued-vs-whole an exact algebraic identity.
    """
    case = spec_whole.case
    if case.tag != CASE_QUARTER_PLANE:
        raise PreconditionError("split_solve starts from the quarter-plane case")
    if not (0 < H0 < H < case.Zmax):
        raise PreconditionError(f"need 0 < H0 < H < Zmax, got H0={H0}, H={H}")
    if not spec_whole.zero_order and not allow_plain:
        raise PreconditionError(
            "splitting requires the zero-order variant (uniqueness); "
            "pass allow_plain=True to override")

    grid = spec_whole.grid
    j_H = interface_indices(grid, [H])[0]

    spsi, sv = spec_whole.sample_sources()
    beyond = grid.z_nodes >= H0 - 1e-12
    worst = max(float(np.max(np.abs(spsi[:, beyond]))),
                float(np.max(np.abs(sv[:, beyond]))))
    if worst > 1e-12:
        raise PreconditionError(
            f"sources must vanish for z >= H0={H0} (found magnitude {worst:.3g})")

    whole = solve(spec_whole, adapted_interfaces=(H,))

    # transparent operator from the upper discretization [H, Zmax]
    up = upper_spec(H, case.Zmax, case.Ymax, grid.Ny, grid.Nz - j_H,
                    zero_order=spec_whole.zero_order)
    lam = build_lambda(up, allow_plain=allow_plain)

    bottom_case = DomainCase("strip", H=H, Zmax=case.Zmax, Ymax=case.Ymax)
    bottom_spec = ProblemSpec(
        case=bottom_case,
        bc=BoundaryData(V=spec_whole.bc.V, Upsilon=spec_whole.bc.Upsilon,
                        Psi=spec_whole.bc.Psi,
                        lambda_choice=LambdaChoice.from_matrix(lam.entries)),
        s_psi=spec_whole.s_psi, s_v=spec_whole.s_v,
        zero_order=spec_whole.zero_order,
        grid=Grid.build(bottom_case, grid.Ny, j_H))
    bottom = solve(bottom_spec)

    v_trace = bottom.u.v.values[:, -1]
    top_spec = ProblemSpec(
        case=up.case,
        bc=BoundaryData(V=spec_whole.bc.V, Upsilon=spec_whole.bc.Upsilon,
                        Psi=spec_whole.bc.Psi, vH=v_trace),
        zero_order=spec_whole.zero_order, grid=up.grid)
    top = solve(top_spec)

    glued_v = np.concatenate([bottom.u.v.values, top.u.v.values[:, 1:]], axis=1)
    glued_psi = np.concatenate([bottom.u.psi.values, top.u.psi.values[:, 1:]], axis=1)
    glued = StatePair.from_arrays(glued_v, glued_psi, grid)

    wv = whole.u.v.values
    wp = whole.u.psi.values
    scale = max(float(np.linalg.norm(wv)), float(np.linalg.norm(wp)), 1e-300)
    rel_l2 = float(np.sqrt(np.linalg.norm(glued_v - wv) ** 2
                           + np.linalg.norm(glued_psi - wp) ** 2)) / scale

    psi_b = bottom.u.psi.values[:, -1]
    psi_t = top.u.psi.values[:, 0]
    v_b = bottom.u.v.values[:, -1]
    v_t = top.u.v.values[:, 0]
    tr_scale = max(float(np.max(np.abs(psi_b))), 1e-300)
    report = {
        "rel_l2_glued_vs_whole": rel_l2,
        "interface_v_mismatch": float(np.max(np.abs(v_b - v_t))),
        "interface_psi_mismatch": float(np.max(np.abs(psi_b - psi_t))) / tr_scale,
        "whole_residual": whole.residual_norm,
        "bottom_residual": bottom.residual_norm,
        "top_residual": top.residual_norm,
        "interface_node": j_H,
    }
    return SplitResult(whole=whole, bottom=bottom, top=top, lam=lam, report=report)


def lambda_tower_gap(H1: float, H2: float, Zmax: float, Ymax: float,
                     Ny: int, hz: float) -> float:
    """Spectral-norm gap between the direct operator on [H1, Zmax] and its
    composition through an intermediate interface at H2.

    The composed route caps the layer [H1, H2] with the operator built on
    [H2, Zmax]; the direct build uses interface-adapted rows at H2 so both
    routes tile the same matrix and the gap is factorization roundoff.
    """
    if not H1 < H2 < Zmax:
        raise PreconditionError("need H1 < H2 < Zmax")
    n1 = int(round((Zmax - H1) / hz))
    n2 = int(round((Zmax - H2) / hz))
    direct = build_lambda(upper_spec(H1, Zmax, Ymax, Ny, n1),
                          adapted_interfaces=(H2,))
    outer = build_lambda(upper_spec(H2, Zmax, Ymax, Ny, n2))
    layer = upper_spec(H1, H2, Ymax, Ny, n1 - n2)
    composed = build_lambda(layer, cap_matrix=outer.entries)
    num = float(np.linalg.norm(direct.entries - composed.entries, 2))
    den = max(float(np.linalg.norm(direct.entries, 2)), 1e-300)
    return num / den

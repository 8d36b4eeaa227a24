"""Exact half-plane (y in R, z > 0) solution machinery.

Fourier transforming in y diagonalizes the system: with

    w_pm = v_hat +/- |xi| psi_hat

each mode obeys the scalar ODE

    d_z w + (z i xi -/+ kappa |xi|^3) w = s_pm,    s_pm = s_psi_hat +/- |xi| s_v_hat

whose closed form is

    w(z) = w(z0) e^{-(z^2-z0^2)/2 i xi} e^{+/- kappa |xi|^3 (z-z0)}
           + int_{z0}^z e^{-(z^2-s^2)/2 i xi} e^{+/- kappa |xi|^3 (z-s)} s_pm(s) ds.

``kappa`` scales the growth/decay rate: kappa = 1 matches the ODE above as
written, kappa = 1/2 matches the interior system whose diffusion block
carries the factor 1/2.  Boundedness as z -> inf forces the coefficient of
the growing branch to vanish, which is why only one scalar condition can be
fixed at z = 0; with no source the surviving relation at any height is
v_hat + |xi| psi_hat = 0, i.e. the transparent v-to-psi multiplier
-1/|xi| (minus the inverse square root of the Laplacian).

This module is the oracle for the finite-difference solver: it never sees
the grid's stencils, only per-frequency quadrature and closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.fft import dst

from .errors import PreconditionError, SpecificationError

DUHAMEL_TOL = 1e-10


def _quad_complex(func, a, b, tol):
    re, _ = integrate.quad(lambda s: complex(func(s)).real, a, b,
                           epsabs=tol, epsrel=tol, limit=400)
    im, _ = integrate.quad(lambda s: complex(func(s)).imag, a, b,
                           epsabs=tol, epsrel=tol, limit=400)
    return re + 1j * im


def mode_evolve(xi, w0, z, sign, source=None, kappa=1.0, z_from=0.0,
                quad_tol=DUHAMEL_TOL):
    """Closed-form value of one diagonalized mode at height z.

    ``sign`` (+1/-1) selects the growing/decaying branch; ``source`` is an
    optional callable of the integration variable (complex values allowed),
    handled by adaptive quadrature with the oscillatory propagator folded
    into the kernel.
    """
    if sign not in (+1, -1):
        raise PreconditionError(f"sign must be +1 or -1, got {sign}")
    xi = float(xi)
    z = float(z)
    z_from = float(z_from)
    rate = sign * kappa * abs(xi) ** 3

    def propagator(z_hi, z_lo):
        return np.exp(-0.5j * xi * (z_hi**2 - z_lo**2) + rate * (z_hi - z_lo))

    value = complex(w0) * propagator(z, z_from)
    if source is not None:
        value += _quad_complex(lambda s: propagator(z, s) * source(s),
                               z_from, z, quad_tol)
    return value


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    """Per-frequency mode coefficients w_pm on a z-grid.

    Reconstruction: v_hat = (w_+ + w_-)/2 and, for xi != 0,
    psi_hat = (w_+ - w_-)/(2|xi|).  At xi = 0 the modes are stored with the
    plumbing convention w_pm = v_hat +/- psi_hat.
    """

    xi_nodes: np.ndarray
    z_nodes: np.ndarray
    w_plus: np.ndarray   # (n_xi, n_z) complex
    w_minus: np.ndarray
    kappa: float = 1.0

    def reconstruct_hat(self):
        v_hat = 0.5 * (self.w_plus + self.w_minus)
        axi = np.abs(self.xi_nodes)[:, None]
        denom = np.where(axi > 0, 2.0 * axi, 2.0)
        psi_hat = (self.w_plus - self.w_minus) / denom
        return v_hat, psi_hat

    def reconstruct_fields(self):
        """Inverse FFT over the frequency axis; real for Hermitian spectra."""
        v_hat, psi_hat = self.reconstruct_hat()
        v = np.fft.ifft(v_hat, axis=0)
        psi = np.fft.ifft(psi_hat, axis=0)
        return np.real(v), np.real(psi)


def halfplane_solve(xi_nodes, z_nodes, bc_hat, sources_hat=None, *,
                    bc_kind="psi", kappa=1.0, quad_tol=DUHAMEL_TOL) -> SpectralSolution:
    """Solve the half-plane system per frequency with growing modes suppressed.

    Parameters
    ----------
    xi_nodes : frequencies (FFT layout acceptable; xi = 0 handled separately).
    z_nodes : increasing heights starting at the boundary z_nodes[0].
    bc_hat : per-frequency boundary data at z_nodes[0]; its meaning is set
        by ``bc_kind`` ("psi", "v" or "w_minus") since only one scalar
        condition is imposable per frequency.
    sources_hat : optional pair of callables (s_psi_hat(xi, z), s_v_hat(xi, z)).
        Sources must have decayed by the top of the z-range (compact
        support accepted); anything else is rejected because the suppressed
        branch is anchored at w_+(ztop) = 0.

    Both branches are propagated segment by segment with the propagator
    based at the segment being produced, so every kernel has modulus at
    most one and steep modes cannot overflow.  With no source the decaying
    branch therefore satisfies |w_-(z)| = |w_-(z0)| e^{-kappa |xi|^3 (z-z0)}
    exactly.
    """
    if bc_kind not in ("psi", "v", "w_minus"):
        raise PreconditionError(f"unknown bc_kind {bc_kind!r}")
    xi_nodes = np.asarray(xi_nodes, dtype=float)
    z_nodes = np.asarray(z_nodes, dtype=float)
    if np.any(np.diff(z_nodes) <= 0):
        raise PreconditionError("z_nodes must be strictly increasing")
    bc_hat = np.asarray(bc_hat, dtype=complex)
    nz = len(z_nodes)
    ztop = z_nodes[-1]

    if sources_hat is not None:
        s_psi_hat, s_v_hat = sources_hat
        top = max(max(abs(complex(s_psi_hat(x, ztop))),
                      abs(complex(s_v_hat(x, ztop)))) for x in xi_nodes)
        if top > 1e-12:
            raise PreconditionError(
                f"source does not decay: magnitude {top:.3g} at the top of the z-range")

    w_plus = np.zeros((len(xi_nodes), nz), dtype=complex)
    w_minus = np.zeros_like(w_plus)

    for k, xi in enumerate(xi_nodes):
        axi = abs(xi)
        rate = kappa * axi**3

        if xi == 0.0:
            # modes decouple into d_z v = s_psi, d_z psi = s_v; boundedness
            # fixes nothing extra, so the zero-mean convention v_hat = 0 at
            # the boundary applies
            psi0 = bc_hat[k] if bc_kind == "psi" else 0.0
            v_line = np.zeros(nz, dtype=complex)
            psi_line = np.full(nz, complex(psi0))
            if sources_hat is not None:
                for seg in range(nz - 1):
                    a, b = z_nodes[seg], z_nodes[seg + 1]
                    v_line[seg + 1:] += _quad_complex(
                        lambda s: s_psi_hat(0.0, s), a, b, quad_tol)
                    psi_line[seg + 1:] += _quad_complex(
                        lambda s: s_v_hat(0.0, s), a, b, quad_tol)
            w_plus[k] = v_line + psi_line
            w_minus[k] = v_line - psi_line
            continue

        def prop(z_hi, z_lo, sgn):
            return np.exp(-0.5j * xi * (z_hi**2 - z_lo**2) + sgn * rate * (z_hi - z_lo))

        # suppressed (+) branch: backward recursion from w_+(ztop) = 0 with
        #   w_+(z_j) = prop(z_j, z_{j+1}, +) w_+(z_{j+1}) - int_j prop(z_j, s, +) s_+(s) ds
        wp = np.zeros(nz, dtype=complex)
        if sources_hat is not None:
            def s_plus(s, _xi=xi, _a=axi):
                return complex(s_psi_hat(_xi, s)) + _a * complex(s_v_hat(_xi, s))

            for j in range(nz - 2, -1, -1):
                a, b = z_nodes[j], z_nodes[j + 1]
                seg = _quad_complex(lambda s: prop(a, s, +1) * s_plus(s), a, b, quad_tol)
                wp[j] = prop(a, b, +1) * wp[j + 1] - seg
        w_plus[k] = wp

        wp0 = wp[0]
        if bc_kind == "psi":
            wm0 = wp0 - 2.0 * axi * bc_hat[k]
        elif bc_kind == "v":
            wm0 = 2.0 * bc_hat[k] - wp0
        else:
            wm0 = bc_hat[k]

        # decaying (-) branch: forward recursion
        wm = np.empty(nz, dtype=complex)
        wm[0] = wm0
        for j in range(nz - 1):
            a, b = z_nodes[j], z_nodes[j + 1]
            seg = 0.0 + 0.0j
            if sources_hat is not None:
                def s_minus(s, _xi=xi, _a=axi):
                    return complex(s_psi_hat(_xi, s)) - _a * complex(s_v_hat(_xi, s))

                seg = _quad_complex(lambda s: prop(b, s, -1) * s_minus(s), a, b, quad_tol)
            wm[j + 1] = prop(b, a, -1) * wm[j] + seg
        w_minus[k] = wm

    return SpectralSolution(xi_nodes=xi_nodes, z_nodes=z_nodes,
                            w_plus=w_plus, w_minus=w_minus, kappa=kappa)


def transparent_multiplier(xi, zero_order: bool = False, kappa: float = 0.5):
    """Fourier symbol of the transparent v-to-psi map at a flat interface.

    Plain system: -1/|xi| (xi = 0 mode mapped to 0).  With zero-order
    terms the decaying branch satisfies psi_hat/v_hat =
    -sqrt((1 + kappa xi^2)/(1 + kappa xi^4)), which tends to -1/|xi| at
    high frequency and stays bounded at xi = 0.
    """
    xi = np.asarray(xi, dtype=float)
    axi = np.abs(xi)
    if zero_order:
        return -np.sqrt((1.0 + kappa * axi**2) / (1.0 + kappa * axi**4))
    safe = np.where(axi > 0, axi, 1.0)
    return np.where(axi > 0, -1.0 / safe, 0.0)


def sine_frequencies(Ny: int, Ymax: float) -> np.ndarray:
    """Frequencies k*pi/Ymax of the interior-node sine basis."""
    return np.arange(1, Ny) * np.pi / Ymax


def sine_multiplier_matrix(Ny: int, Ymax: float, multiplier) -> np.ndarray:
    """Dense matrix of a sine-series Fourier multiplier on interior y-nodes.

    Odd extension enforces zero endpoint traces and makes the multiplier
    diagonal; the orthonormal DST-I is involutory, so the matrix is exactly
    symmetric.
    """
    xi = sine_frequencies(Ny, Ymax)
    m = np.asarray(multiplier(xi), dtype=float)
    S = dst(np.eye(Ny - 1), type=1, norm="ortho", axis=0)
    return S @ (m[:, None] * S)


def fourier_multiplier_matrix(Ny: int, period: float, multiplier) -> np.ndarray:
    """Dense real matrix of an even Fourier multiplier on a periodic y-grid."""
    xi = 2.0 * np.pi * np.fft.fftfreq(Ny, d=period / Ny)
    m = np.asarray(multiplier(xi), dtype=float)
    F = np.fft.fft(np.eye(Ny), axis=0)
    M = np.fft.ifft(m[:, None] * F, axis=0)
    return np.real(M)


def lambda_exact(trace, *, Ymax=None, period=None, convention="sine",
                 zero_mean_tol=1e-10):
    """Apply the exact transparent multiplier -1/|xi| to a nodal trace.

    ``convention="sine"`` treats the trace as interior values on (0, Ymax)
    with odd extension (zero endpoint traces); ``"fourier"`` treats it as
    one period of a periodic line and requires zero mean, since the xi = 0
    symbol is singular and is mapped to 0.
    """
    t = np.asarray(trace, dtype=float)
    if convention == "sine":
        if Ymax is None:
            raise PreconditionError("sine convention needs Ymax")
        xi = sine_frequencies(len(t) + 1, Ymax)
        coeff = dst(t, type=1, norm="ortho")
        return dst(-coeff / xi, type=1, norm="ortho")
    if convention == "fourier":
        if period is None:
            raise PreconditionError("fourier convention needs the period")
        mean = abs(float(np.mean(t)))
        scale = max(float(np.max(np.abs(t))), 1.0)
        if mean > zero_mean_tol * scale:
            raise PreconditionError(
                f"fourier trace must have zero mean (got mean {mean:.3g}); "
                "the xi = 0 symbol is singular")
        xi = 2.0 * np.pi * np.fft.fftfreq(len(t), d=period / len(t))
        m = transparent_multiplier(xi, zero_order=False)
        return np.real(np.fft.ifft(m * np.fft.fft(t)))
    raise SpecificationError(f"unknown convention {convention!r}")


def write_spectrum_csv(path, sol: SpectralSolution, metadata=None) -> None:
    """Serialize a SpectralSolution: rows xi, z, Re w+, Im w+, Re w-, Im w-."""
    meta = {"kappa": sol.kappa, "n_xi": len(sol.xi_nodes), "n_z": len(sol.z_nodes)}
    if metadata:
        meta.update(metadata)
    with open(path, "w") as fh:
        for key in meta:
            fh.write(f"# {key}={meta[key]}\n")
        fh.write("xi,z,re_wplus,im_wplus,re_wminus,im_wminus\n")
        for k, xi in enumerate(sol.xi_nodes):
            for j, zv in enumerate(sol.z_nodes):
                wp = sol.w_plus[k, j]
                wm = sol.w_minus[k, j]
                fh.write(f"{xi:.17g},{zv:.17g},{wp.real:.17g},{wp.imag:.17g},"
                         f"{wm.real:.17g},{wm.imag:.17g}\n")

"""Key=value configuration files describing one solve.

One ``key = value`` pair per line, ``#`` comments.  Recognized keys:

    case           I | II | III
    H, Zmax, Ymax  geometry (boundary-layer units)
    Ny, Nz         cell counts
    zero_order     true/false
    lambda_choice  zero | scaled:<c> | spectral        (strip top operator)
    V_file, Upsilon_file, Psi_file, vH_file
                   two-column CSV (coordinate,value), linearly interpolated
                   onto the grid and held constant beyond the tabulated range
    s_psi, s_v     bump:yc=..,zc=..,ry=..,rz=..,amp=..  (B-spline bump), or
    s_psi_yfile / s_psi_zfile (and s_v_*)
                   separable tabulated source s(y,z) = f(y) g(z)

Unknown keys and malformed lines raise :class:`ConfigError` carrying the
line number.
"""

from __future__ import annotations

import numpy as np

from .domain import (BoundaryData, DomainCase, Grid, LambdaChoice, ProblemSpec,
                     canonical_case, DEFAULT_YMAX, DEFAULT_ZMAX)
from .errors import ConfigError

_SCALARS = {"h": "H", "zmax": "Zmax", "ymax": "Ymax"}
_INTS = {"ny": "Ny", "nz": "Nz"}
_FILES = {"v_file": "V", "upsilon_file": "Upsilon", "psi_file": "Psi",
          "vh_file": "vH"}
_SOURCE_KEYS = {"s_psi", "s_v", "s_psi_yfile", "s_psi_zfile",
                "s_v_yfile", "s_v_zfile"}


def read_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column CSV (coordinate, value); blank lines and # comments allowed."""
    xs, vals = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p for p in line.replace(",", " ").split() if p]
            if len(parts) != 2:
                raise ConfigError(f"{path}: expected two columns", line=lineno)
            try:
                xs.append(float(parts[0]))
                vals.append(float(parts[1]))
            except ValueError as err:
                raise ConfigError(f"{path}: {err}", line=lineno) from err
    if len(xs) < 2:
        raise ConfigError(f"{path}: need at least two rows")
    order = np.argsort(xs)
    return np.asarray(xs)[order], np.asarray(vals)[order]


def _interpolant(path):
    xs, vals = read_table(path)

    def f(t):
        return np.interp(np.asarray(t, dtype=float), xs, vals)

    return f


def _bump_source(descriptor: str, lineno: int):
    from .linsolve import bspline3
    params = {"amp": 1.0}
    body = descriptor.split(":", 1)[1] if ":" in descriptor else ""
    for piece in body.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if "=" not in piece:
            raise ConfigError(f"malformed bump parameter {piece!r}", line=lineno)
        key, _, val = piece.partition("=")
        try:
            params[key.strip()] = float(val)
        except ValueError as err:
            raise ConfigError(f"bump parameter {piece!r}: {err}", line=lineno) from err
    for req in ("yc", "zc", "ry", "rz"):
        if req not in params:
            raise ConfigError(f"bump source missing parameter {req!r}", line=lineno)

    def src(y, z):
        return params["amp"] * bspline3((y - params["yc"]) / params["ry"]) \
            * bspline3((z - params["zc"]) / params["rz"])

    return src


def _separable_source(yfile, zfile):
    fy = _interpolant(yfile)
    fz = _interpolant(zfile)

    def src(y, z):
        return fy(y) * fz(z)

    return src


def parse_config(path) -> ProblemSpec:
    raw: dict[str, tuple[str, int]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"expected key=value, got {body!r}", line=lineno)
            key, _, val = body.partition("=")
            key = key.strip().lower()
            val = val.strip()
            if key in raw:
                raise ConfigError(f"duplicate key {key!r}", line=lineno)
            raw[key] = (val, lineno)

    def take(key, default=None):
        return raw.pop(key, (default, 0))

    case_val, case_line = take("case", "I")
    try:
        tag = canonical_case(case_val)
    except Exception as err:
        raise ConfigError(str(err), line=case_line) from err

    geom = {"H": 0.0, "Zmax": DEFAULT_ZMAX, "Ymax": DEFAULT_YMAX}
    for key, name in _SCALARS.items():
        val, lineno = take(key)
        if val is not None:
            try:
                geom[name] = float(val)
            except ValueError as err:
                raise ConfigError(f"{name}: {err}", line=lineno) from err

    sizes = {"Ny": 64, "Nz": 64}
    for key, name in _INTS.items():
        val, lineno = take(key)
        if val is not None:
            try:
                sizes[name] = int(val)
            except ValueError as err:
                raise ConfigError(f"{name}: {err}", line=lineno) from err

    zo_val, zo_line = take("zero_order", "false")
    low = zo_val.strip().lower()
    if low in ("true", "1", "yes", "on"):
        zero_order = True
    elif low in ("false", "0", "no", "off"):
        zero_order = False
    else:
        raise ConfigError(f"zero_order must be boolean, got {zo_val!r}", line=zo_line)

    lam_val, lam_line = take("lambda_choice", "zero")
    low = lam_val.strip().lower()
    try:
        if low == "zero":
            lam = LambdaChoice.zero()
        elif low == "spectral":
            lam = LambdaChoice.spectral()
        elif low.startswith("scaled"):
            c = float(low.split(":", 1)[1]) if ":" in low else 0.0
            lam = LambdaChoice.scaled(c)
        else:
            raise ConfigError(f"unknown lambda_choice {lam_val!r}", line=lam_line)
    except ConfigError:
        raise
    except Exception as err:
        raise ConfigError(f"lambda_choice: {err}", line=lam_line) from err

    traces = {}
    for key, name in _FILES.items():
        val, lineno = take(key)
        if val is not None:
            try:
                traces[name] = _interpolant(val)
            except OSError as err:
                raise ConfigError(f"{name}: {err}", line=lineno) from err

    sources = {}
    for slot in ("s_psi", "s_v"):
        val, lineno = take(slot)
        if val is not None:
            if not val.lower().startswith("bump"):
                raise ConfigError(
                    f"{slot} accepts bump:... descriptors; use {slot}_yfile/"
                    f"{slot}_zfile for tabulated sources", line=lineno)
            sources[slot] = _bump_source(val, lineno)
        yval, ylineno = take(f"{slot}_yfile")
        zval, zlineno = take(f"{slot}_zfile")
        if (yval is None) != (zval is None):
            raise ConfigError(f"{slot}_yfile and {slot}_zfile come in pairs",
                              line=ylineno or zlineno)
        if yval is not None:
            if slot in sources:
                raise ConfigError(f"{slot} given twice", line=ylineno)
            try:
                sources[slot] = _separable_source(yval, zval)
            except OSError as err:
                raise ConfigError(f"{slot}: {err}", line=ylineno) from err

    if raw:
        key, (_, lineno) = next(iter(raw.items()))
        raise ConfigError(f"unknown key {key!r}", line=lineno)

    case = DomainCase(tag, H=geom["H"], Zmax=geom["Zmax"], Ymax=geom["Ymax"])
    bc = BoundaryData(V=traces.get("V"), Upsilon=traces.get("Upsilon"),
                      Psi=traces.get("Psi"), vH=traces.get("vH"),
                      lambda_choice=lam)
    return ProblemSpec(case=case, bc=bc, s_psi=sources.get("s_psi"),
                       s_v=sources.get("s_v"), zero_order=zero_order,
                       grid=Grid.build(case, sizes["Ny"], sizes["Nz"]))

"""Semi-Lagrangian transport of the reference map and plastic distortion.

Departure points come from a two-stage (midpoint) back-trace; values are
interpolated bilinearly.  Work is done in index space so that a zero
velocity reproduces the input bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import fields as fd
from . import tensorkin as tk
from .errors import CflViolation, NonPositiveDeterminant
from .parallel import map_rows


@dataclass
class StateFields:
    """Per-node state.  theta is a cache of the enthalpy inversion."""
    v: np.ndarray       # (nx, ny, 2)
    xi: np.ndarray      # (nx, ny, 2)
    Fp: np.ndarray      # (nx, ny, 2, 2)
    w: np.ndarray       # (nx, ny)
    theta: np.ndarray   # (nx, ny)

    def copy(self):
        return StateFields(*(np.array(a, copy=True) for a in
                             (self.v, self.xi, self.Fp, self.w, self.theta)))

    def replace(self, **kw):
        return replace(self, **kw)


def cfl_number(grid, v, dt):
    vmax = float(np.max(np.abs(v))) if np.size(v) else 0.0
    return vmax * dt / grid.h


def check_cfl(grid, v, dt, cap=0.9):
    c = cfl_number(grid, v, dt)
    if c > cap:
        raise CflViolation(f"advective CFL number {c:.3f} exceeds cap {cap}")
    return c


def _interp(f, sx, sy):
    """Bilinear interpolation of f at fractional index positions.

    Positions outside the grid are extrapolated linearly from the edge
    cell (at most one cell is ever needed under the CFL cap).
    """
    nx, ny = f.shape[:2]
    sx = np.clip(sx, -1.0, nx)
    sy = np.clip(sy, -1.0, ny)
    i0 = np.clip(np.floor(sx).astype(int), 0, nx - 2)
    j0 = np.clip(np.floor(sy).astype(int), 0, ny - 2)
    fx = sx - i0
    fy = sy - j0
    extra = (1,) * (f.ndim - 2)
    fx = fx.reshape(fx.shape + extra)
    fy = fy.reshape(fy.shape + extra)
    return (((1.0 - fx) * (1.0 - fy)) * f[i0, j0] + (fx * (1.0 - fy)) * f[i0 + 1, j0]
            + ((1.0 - fx) * fy) * f[i0, j0 + 1] + (fx * fy) * f[i0 + 1, j0 + 1])


def departure_points(grid, v, dt):
    """Index-space departure points of every node (midpoint back-trace)."""
    I, Jn = np.meshgrid(np.arange(grid.nx, dtype=float), np.arange(grid.ny, dtype=float),
                        indexing="ij")
    cx, cy = dt / grid.hx, dt / grid.hy
    mx = I - 0.5 * cx * v[..., 0]
    my = Jn - 0.5 * cy * v[..., 1]
    vm = _interp(v, mx, my)
    return I - cx * vm[..., 0], Jn - cy * vm[..., 1]


def semi_lagrangian(grid, f, v, dt, departure=None):
    f = np.asarray(f, dtype=float)
    sx, sy = departure if departure is not None else departure_points(grid, v, dt)
    out = np.empty_like(f)
    return map_rows(lambda lo, hi: _interp(f, sx[lo:hi], sy[lo:hi]), grid.nx, out)


def advect_reference_map(grid, xi, v, dt, cfl_cap=0.9, departure=None):
    check_cfl(grid, v, dt, cfl_cap)
    return semi_lagrangian(grid, xi, v, dt, departure)


def plastic_exponential_update(Fp, Lp, dt):
    """Fp <- exp(dt Lp) Fp (determinant preserving for trace-free Lp)."""
    return tk.exp_trace_free(Lp, dt) @ np.asarray(Fp, dtype=float)


def advect_plastic_distortion(grid, Fp, v, Lp, dt, cfl_cap=0.9, departure=None):
    check_cfl(grid, v, dt, cfl_cap)
    return plastic_exponential_update(semi_lagrangian(grid, Fp, v, dt, departure), Lp, dt)


def renormalize_isochoric(Fp):
    Fp = np.asarray(Fp, dtype=float)
    d = Fp.shape[-1]
    D = tk.det(Fp)
    if np.any(~(D > 0)):
        raise NonPositiveDeterminant(f"det Fp = {np.min(D):.3e} is not positive")
    return Fp * (D ** (-1.0 / d))[..., None, None]


def reference_density(rho_R, X):
    """Evaluate a referential density (constant or callable) at positions X."""
    if callable(rho_R):
        return np.asarray(rho_R(X), dtype=float)
    return np.full(np.shape(X)[:-1], float(rho_R))


def derived_density(grid, xi, rho_R):
    """rho = rho_R(xi) det(grad xi)."""
    J_inv = tk.det(fd.gradient(grid, xi))
    if np.any(~(J_inv > 0)):
        raise NonPositiveDeterminant(f"det grad xi = {np.min(J_inv):.3e} is not positive")
    return reference_density(rho_R, xi) * J_inv


def total_mass(grid, xi, rho_R):
    return fd.integrate(grid, derived_density(grid, xi, rho_R))


def continuity_residual(grid, rho_before, rho_after, v, dt):
    """Area-averaged L1 norm of (rho' - rho)/dt + div(rho v)."""
    defect = (rho_after - rho_before) / dt + fd.divergence(grid, rho_before[..., None] * v)
    return fd.integrate(grid, np.abs(defect)) / grid.area

"""Enthalpy-form heat equation step and the temperature monitor.

    dw/dt + v.grad w = -w div v + div(kappa grad theta) + xi_d
                       + det(grad xi) gamma'_Fe : (grad v Fe - Fe Lp)

Advection is semi-Lagrangian, the compression and source terms are
explicit, conduction is backward Euler in theta with kappa frozen, and
theta is recovered from w by inverting the enthalpy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constitutive as cv
from . import fields as fd
from . import tensorkin as tk
from .errors import InvariantViolation, NegativeEnthalpy
from .linsolve import pcg
from .parallel import map_rows
from .transport import semi_lagrangian

SOFT_FLOOR = -1e-10
HARD_FLOOR = -1e-6


@dataclass
class HeatSources:
    dissipative: np.ndarray
    adiabatic: np.ndarray
    compression: np.ndarray = None


def adiabatic_power(material, Fe, theta, grad_v, Lp, cutoff=None):
    """Thermo-mechanical exchange density entering the heat equation."""
    Fe = np.asarray(Fe, dtype=float)
    _, g_Fe, _ = cv.thermal_energy(material, Fe, np.maximum(theta, 0.0))
    if cutoff is not None and cutoff.enabled:
        g_Fe = cv.cutoff_pi(Fe, cutoff)[..., None, None] * g_Fe
    rate = np.asarray(grad_v) @ Fe - Fe @ np.asarray(Lp)
    return tk.ddot(g_Fe, rate) / tk.det(Fe)


def invert_field(material, Fe, w, theta_guess=None):
    """Per-node enthalpy inversion, split over row blocks."""
    out = np.empty(np.shape(w))

    def kernel(lo, hi):
        guess = None if theta_guess is None else theta_guess[lo:hi]
        return cv.invert_enthalpy(material, Fe[lo:hi], w[lo:hi], guess)
    return map_rows(kernel, out.shape[0], out)


def boundary_heat_flux(model, theta, t=0.0):
    """Inward wall flux h(theta) at every node (zero off the walls)."""
    grid = model.grid
    h = cv.boundary_flux(model.material, t, grid.coords, np.maximum(theta, 0.0))
    return np.where(grid.boundary_mask, h, 0.0)


def heat_step(model, state, sources, dt, Fe, t=0.0, departure=None):
    """Advance the enthalpy.  Returns (w', theta', wall_flux).

    ``Fe`` is the elastic strain at the end of the step (used for the
    enthalpy inversion); ``state.v`` is the advecting velocity.
    """
    grid, sv = model.grid, model.solver
    if np.any(state.w < -1e-12):
        raise NegativeEnthalpy(f"enthalpy {np.min(state.w):.3e} below zero before heat step")
    v = state.v
    w_adv = semi_lagrangian(grid, state.w, v, dt, departure)
    div_v = fd.divergence(grid, v)
    compression = -w_adv * div_v
    w_src = w_adv + dt * (compression + sources.dissipative + sources.adiabatic)
    sources.compression = compression
    theta_n = np.maximum(state.theta, 0.0)
    kappa = cv.conductivity(model.material, state.xi, Fe, theta_n)
    hflux = boundary_heat_flux(model, state.theta, t)
    wall = fd.wall_flux_density(grid, hflux)
    theta_src = invert_field(model.material, Fe, w_src, state.theta)
    _, cap = cv.heat_internal_energy(model.material, Fe, np.maximum(theta_src, 0.0))
    a = cap / dt
    rhs = a * theta_src + wall

    def apply_A(T):
        return a * T - fd.laplacian_compact(grid, T, kappa)

    diag = a + kappa * 2.0 * (1 / grid.hx ** 2 + 1 / grid.hy ** 2)
    theta_c, _ = pcg(apply_A, rhs, theta_src, diag, grid.cellvol, sv.lin_tol, sv.lin_maxiter)
    w_new = w_src + dt * fd.laplacian_compact(grid, theta_c, kappa, hflux)
    if np.any(w_new < -1e-12):
        i = np.unravel_index(np.argmin(w_new), w_new.shape)
        raise NegativeEnthalpy(f"enthalpy {w_new[i]:.3e} at node {i} after heat step")
    theta_new = invert_field(model.material, Fe, w_new, theta_c)
    return w_new, theta_new, hflux


def temperature_nonnegativity_monitor(grid, theta, alpha):
    """min theta, fraction of nodes below zero, and ||theta^-||_{L^{1+alpha}}^{1+alpha}."""
    theta = np.asarray(theta, dtype=float)
    neg = np.minimum(theta, 0.0)
    return {
        "min": float(theta.min()),
        "fraction": float(np.count_nonzero(theta < 0)) / theta.size,
        "norm": fd.integrate(grid, np.abs(neg) ** (1.0 + alpha)),
    }


def check_temperature(report, hard_floor=HARD_FLOOR):
    if report["min"] < hard_floor:
        raise InvariantViolation(f"temperature {report['min']:.3e} below {hard_floor:g}")

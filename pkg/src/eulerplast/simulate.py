"""Time stepping: transport -> momentum -> flow rule -> thermal -> audit."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import audit
from . import constitutive as cv
from . import fields as fd
from . import tensorkin as tk
from .errors import InvariantViolation
from .mechanics import (constitutive_theta, dissipation_density, flow_rule_step, kinematics,
                        momentum_step)
from .thermal import (HeatSources, adiabatic_power, boundary_heat_flux, check_temperature,
                      heat_step, temperature_nonnegativity_monitor)
from .transport import (StateFields, check_cfl, departure_points, plastic_exponential_update,
                        renormalize_isochoric, semi_lagrangian, total_mass)


@dataclass
class StepDiagnostics:
    Lp: np.ndarray
    dissipation: np.ndarray
    adiabatic: np.ndarray
    wall_flux: np.ndarray
    det_fp_pre: float = 0.0
    momentum_iterations: int = 0


def time_step(model, state, dt, t=0.0):
    """Advance one step.  Returns (new state, diagnostics)."""
    grid = model.grid
    check_cfl(grid, state.v, dt, model.solver.cfl_cap)
    dep = departure_points(grid, state.v, dt)
    xi = semi_lagrangian(grid, state.xi, state.v, dt, dep)
    Fp_star = semi_lagrangian(grid, state.Fp, state.v, dt, dep)
    v_star = semi_lagrangian(grid, state.v, state.v, dt, dep)
    mid = StateFields(v=state.v, xi=xi, Fp=Fp_star, w=state.w, theta=state.theta)

    v, ws = momentum_step(model, mid, dt, v_star=v_star, t=t)

    _, Fe_mid, J_mid = kinematics(model, mid)
    Lp = flow_rule_step(model, mid, Fe=Fe_mid, J=J_mid)
    Fp_exp = plastic_exponential_update(Fp_star, Lp, dt)
    det_pre = float(np.max(np.abs(tk.det(Fp_exp) / tk.det(Fp_star) - 1.0)))
    Fp = renormalize_isochoric(Fp_exp)

    theta_c = constitutive_theta(state.theta)
    diss = dissipation_density(model, v, Lp, theta_c, J_mid)
    adiab = adiabatic_power(model.material, Fe_mid, theta_c, fd.gradient(grid, v), Lp, model.cutoff)

    new = StateFields(v=v, xi=xi, Fp=Fp, w=state.w, theta=state.theta)
    _, Fe_new, _ = kinematics(model, new)
    w, theta, hflux = heat_step(model, new, HeatSources(diss, adiab), dt, Fe_new, t)
    new.w, new.theta = w, theta
    return new, StepDiagnostics(Lp=Lp, dissipation=diss, adiabatic=adiab, wall_flux=hflux,
                                det_fp_pre=det_pre, momentum_iterations=ws.iterations)


def initial_diagnostics(model, state, t=0.0):
    z = np.zeros(model.grid.shape)
    return StepDiagnostics(Lp=np.zeros(model.grid.shape + (2, 2)), dissipation=z,
                           adiabatic=z.copy(), wall_flux=boundary_heat_flux(model, state.theta, t))


def check_invariants(model, state, tolerances):
    grid = model.grid
    dev = float(np.max(np.abs(tk.det(state.Fp) - 1.0)))
    if dev > tolerances.get("detfp_tol", 1e-8):
        raise InvariantViolation(f"|det Fp - 1| = {dev:.3e} exceeds tolerance")
    mon = temperature_nonnegativity_monitor(grid, state.theta, model.material.alpha)
    check_temperature(mon, tolerances.get("theta_floor", -1e-6))
    _, Fe, _ = kinematics(model, state)
    w_back, _ = cv.heat_internal_energy(model.material, Fe, np.maximum(state.theta, 0.0))
    neg = state.theta < 0
    err = np.where(neg, 0.0, np.abs(w_back - state.w)) / np.maximum(1.0, np.abs(state.w))
    if float(err.max()) > tolerances.get("enthalpy_tol", 1e-9):
        raise InvariantViolation(f"enthalpy round-trip error {float(err.max()):.3e}")
    return dev, mon


def simulate(model, state, dt, steps, tolerances=None, t0=0.0):
    """Generator over (step, t, state, report, diagnostics, extras), step 0 included."""
    tol = tolerances or {}
    t = t0
    diag = initial_diagnostics(model, state, t)
    report = audit.compute_report(model, state, diag.dissipation, diag.adiabatic, diag.wall_flux, t)
    mass0 = total_mass(model.grid, state.xi, model.rho_R)
    E0 = audit.total_energy(report, model.hardening_in_total)
    dev, mon = check_invariants(model, state, tol)
    inflow = 0.0
    extras = {"total_drift_rel": 0.0, "mass": mass0, "min_theta": mon["min"], "max_det_fp_dev": dev}
    yield 0, t, state, report, diag, extras
    for n in range(1, steps + 1):
        new, diag = time_step(model, state, dt, t)
        t = t0 + n * dt
        rep = audit.compute_report(model, new, diag.dissipation, diag.adiabatic, diag.wall_flux, t)
        audit.finalize_pair(report, rep, dt, model.hardening_in_total)
        dev, mon = check_invariants(model, new, tol)
        inflow += dt * (rep.boundary_heat_in + rep.gravity_power)
        drift = audit.total_energy(rep, model.hardening_in_total) - E0 - inflow
        extras = {"total_drift_rel": abs(drift) / max(abs(E0), audit.TINY),
                  "mass": total_mass(model.grid, new.xi, model.rho_R),
                  "min_theta": mon["min"], "max_det_fp_dev": dev}
        yield n, t, new, rep, diag, extras
        state, report = new, rep

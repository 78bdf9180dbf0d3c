"""Energy functionals and the two balance residuals.

Mechanical balance:
    d/dt (kinetic + stored + hardening) + dissipation = gravity + adiabatic
Total balance:
    d/dt (kinetic + stored [+ hardening] + heat) = boundary heat + gravity

Rates belong to the later report of a pair, so residuals are first-order
consistent in dt.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
import math

import numpy as np

from . import constitutive as cv
from . import fields as fd
from . import tensorkin as tk
from .mechanics import body_force_density, constitutive_theta, kinematics
from .transport import derived_density

TINY = 1e-300
ROUNDOFF = 1e-12


@dataclass
class EnergyReport:
    t: float
    kinetic: float
    stored: float
    hardening: float
    heat: float
    dissipation_rate: float
    gravity_power: float
    boundary_heat_in: float
    adiabatic_exchange: float
    mech_residual: float = 0.0
    total_residual: float = 0.0
    mech_residual_rel: float = 0.0
    total_residual_rel: float = 0.0

    def mechanical(self):
        return self.kinetic + self.stored + self.hardening


CSV_COLUMNS = [
    ("step", "-"), ("t", "s"), ("kinetic", "J"), ("stored", "J"), ("hardening", "J"),
    ("heat", "J"), ("dissipation_rate", "W"), ("gravity_power", "W"),
    ("boundary_heat_in", "W"), ("adiabatic_exchange", "W"), ("mech_residual", "W"),
    ("total_residual", "W"), ("mech_residual_rel", "-"), ("total_residual_rel", "-"),
    ("total_drift_rel", "-"), ("mass", "kg"), ("min_theta", "K"),
    ("max_det_fp_dev", "-"),
]


def energies(model, state):
    """(kinetic, stored, hardening, heat) computed from the state alone."""
    grid, mat = model.grid, model.material
    _, Fe, J = kinematics(model, state)
    rho = derived_density(grid, state.xi, model.rho_R)
    kinetic = fd.integrate(grid, 0.5 * rho * np.sum(state.v ** 2, axis=-1))
    phi = cv.stored_energy_density(mat, Fe, state.xi, model.cutoff)
    stored = fd.integrate(grid, phi / J)
    ph, _ = cv.hardening_energy(mat, state.Fp, state.xi)
    hardening = fd.integrate(grid, ph / J)
    heat = fd.integrate(grid, state.w)
    return kinetic, stored, hardening, heat


def compute_report(model, state, dissipation, adiabatic, wall_flux, t):
    """Energy report from a state and the power densities of the step that produced it."""
    kinetic, stored, hardening, heat = energies(model, state)
    grid = model.grid
    if model.gravity.is_zero:
        gravity = 0.0
    else:
        gravity = fd.integrate(grid, np.sum(body_force_density(model, state, t) * state.v, axis=-1))
    return EnergyReport(
        t=t, kinetic=kinetic, stored=stored, hardening=hardening, heat=heat,
        dissipation_rate=fd.integrate(grid, dissipation),
        gravity_power=gravity,
        boundary_heat_in=fd.boundary_integral(grid, wall_flux),
        adiabatic_exchange=-fd.integrate(grid, adiabatic),
    )


def mechanical_balance_residual(before, after, dt):
    dE = (after.mechanical() - before.mechanical()) / dt
    return abs(dE + after.dissipation_rate - after.gravity_power - after.adiabatic_exchange)


def total_balance_residual(before, after, dt, include_hardening=True):
    def tot(r):
        return r.kinetic + r.stored + r.heat + (r.hardening if include_hardening else 0.0)
    return abs((tot(after) - tot(before)) / dt - after.boundary_heat_in - after.gravity_power)


def power_scale(before, after, dt):
    """Scale floor for dimensionless residuals.

    The largest individual term of the mechanical balance, but never below
    the round-off level 1e-12 of the total energy per step.
    """
    terms = max(abs(after.kinetic - before.kinetic) / dt,
                abs(after.stored - before.stored) / dt,
                abs(after.hardening - before.hardening) / dt,
                abs(after.adiabatic_exchange))
    size = abs(after.kinetic) + abs(after.stored) + abs(after.hardening) + abs(after.heat)
    return max(terms, ROUNDOFF * size / dt, TINY)


def finalize_pair(before, after, dt, include_hardening=True):
    """Fill the residual fields of ``after`` (power and dimensionless)."""
    after.mech_residual = mechanical_balance_residual(before, after, dt)
    after.total_residual = total_balance_residual(before, after, dt, include_hardening)
    scale = max(after.dissipation_rate, abs(after.gravity_power), power_scale(before, after, dt))
    after.mech_residual_rel = after.mech_residual / scale
    heat_rate = abs(after.heat - before.heat) / dt
    tscale = max(abs(after.boundary_heat_in), abs(after.gravity_power), heat_rate, scale)
    after.total_residual_rel = after.total_residual / tscale
    return after


def total_energy(report, include_hardening=True):
    return (report.kinetic + report.stored + report.heat
            + (report.hardening if include_hardening else 0.0))


def kinematic_identity_suite(grid, before, after, v, dt):
    """Volume-averaged residuals of dF/dt = (grad v) F, dJ/dt = J div v and continuity.

    Material derivatives are discretized as (after - before)/dt + (v.grad) before.
    """
    def mat_dt(a, b):
        adv = np.einsum("...k,...k->...", fd.gradient(grid, a), v[(...,) + (None,) * (a.ndim - 2) + (slice(None),)])
        return (b - a) / dt + adv

    F0 = tk.deformation_gradient(fd.gradient(grid, before.xi))
    F1 = tk.deformation_gradient(fd.gradient(grid, after.xi))
    L = fd.gradient(grid, v)
    rF = mat_dt(F0, F1) - L @ F0
    J0, J1 = tk.det(F0), tk.det(F1)
    rJ = mat_dt(J0, J1) - J0 * tk.trace(L)
    rho0 = 1.0 / J0
    rho1 = 1.0 / J1
    rc = (rho1 - rho0) / dt + fd.divergence(grid, rho0[..., None] * v)
    area = grid.area
    return {
        "deformation_gradient": fd.integrate(grid, tk.frob(rF)) / area,
        "jacobian": fd.integrate(grid, np.abs(rJ)) / area,
        "continuity": fd.integrate(grid, np.abs(rc)) / area,
    }


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_header():
    return ",".join(f"{name}[{unit}]" for name, unit in CSV_COLUMNS)


def csv_row(step, report, extras):
    values = {**asdict(report), "step": step, **extras}
    return ",".join(_fmt(values[name]) for name, _ in CSV_COLUMNS)


def read_csv(path):
    """Read an energies.csv back into a dict of numpy columns."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [list(map(float, line.split(","))) for line in fh if line.strip()]
    names = [h.split("[")[0] for h in header]
    arr = np.array(rows)
    return {n: arr[:, i] for i, n in enumerate(names)}

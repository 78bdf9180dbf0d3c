"""Scenario presets: model assembly and initial states."""
from __future__ import annotations

from dataclasses import replace
import logging
import math

import numpy as np

from . import constitutive as cv
from . import tensorkin as tk
from .errors import UnknownName
from .fields import Grid
from .model import Model, SolverSettings, StirringForce, UniformGravity
from .transport import StateFields

log = logging.getLogger(__name__)

BASE = {
    "material": {"preset": "neo_hookean_default"},
    "dissipation": {"nu0": 0.01, "nu1": 1e-6, "nu2": 1e-6, "p": 4.0, "q": 4.0},
    "scenario": {"amplitude": 0.0, "theta0": 1.0, "gravity": (0.0, 0.0), "forcing": 0.0,
                 "velocity": "vortex"},
}

SCENARIOS = {
    "static": {
        "about": "undisturbed body at uniform temperature; every field must stay constant",
    },
    "shear_heating": {
        "about": "decaying shear vortex heating the body through plastic and viscous dissipation",
        "scenario": {"amplitude": 0.05},
    },
    "uniaxial_compression": {
        "about": "column settling under its own weight with Newton cooling on the walls",
        "scenario": {"gravity": (0.0, -0.5)},
        "material": {"flux": "newton_cooling", "flux_k": 0.1},
    },
    "thermal_softening": {
        "about": "stirred body with a melting-ramp plastic viscosity; heating softens the flow",
        "material": {"preset": "melting", "c": 0.05},
        "scenario": {"forcing": 0.2},
    },
    "inhomogeneous_checkerboard": {
        "about": "shear vortex in a two-phase checkerboard of stiff/dense and soft/light material",
        "material": {"modulation": "checkerboard"},
        "scenario": {"amplitude": 0.05},
    },
    "jeffreys_creep": {
        "about": "stirred creeping flow without hardening (H_E = 0) or plastic gradient term",
        "material": {"preset": "jeffreys"},
        "dissipation": {"nu2": 0.0},
        "scenario": {"forcing": 0.1},
    },
    "kelvin_voigt_volumetric": {
        "about": "damped volumetric oscillation from a compressive initial velocity",
        "dissipation": {"nu0": 0.02, "p": 2.0},
        "scenario": {"amplitude": 0.05, "velocity": "compressive"},
    },
}


def list_scenarios():
    return [f"{name}: {entry['about']}" for name, entry in SCENARIOS.items()]


def _setting(config, entry, section, key):
    """Config value if given, else scenario default, else base default, else schema default."""
    if config is not None and config.explicit(section, key):
        return config.get(section, key)
    for src in (entry, BASE):
        if key in src.get(section, {}):
            return src[section][key]
    return config.get(section, key) if config is not None else None


def build_material(config, entry):
    def s(key):
        return _setting(config, entry, "material", key)

    mat = cv.get_material(s("preset"))
    over = {k: s(k) for k in ("K_E", "G_E", "H_E", "c", "c1", "alpha", "rho_R") if s(k) is not None}
    mkind = s("M")
    theta0 = _setting(config, entry, "scenario", "theta0")
    if mkind == "constant":
        M0 = s("M0") if s("M0") is not None else float(mat.M(np.array(theta0)))
        over["M"] = cv.ConstantViscosity(M0)
    elif mkind == "melting_ramp":
        base = mat.M if isinstance(mat.M, cv.MeltingRamp) else cv.MeltingRamp()
        over["M"] = cv.MeltingRamp(
            M0=s("M0") if s("M0") is not None else base.M0,
            theta_melt=s("theta_melt") if s("theta_melt") is not None else base.theta_melt,
            M_floor=s("M_floor") if s("M_floor") is not None else base.M_floor)
    elif s("M0") is not None:
        over["M"] = replace(mat.M, M0=s("M0"))
    if s("kappa") is not None:
        over["kappa"] = cv.ConstantConductivity(s("kappa"))
    flux = s("flux")
    if flux == "newton_cooling":
        over["h"] = cv.NewtonCooling(k=s("flux_k") if s("flux_k") is not None else 0.1,
                                     theta_ext=s("theta_ext") if s("theta_ext") is not None else theta0)
    elif flux == "insulated":
        over["h"] = cv.Insulated()
    mod = s("modulation")
    if mod == "linear":
        amp = s("modulation_amplitude")
        over["modulation"] = cv.LinearModulation(slope=0.5 if amp is None else amp)
    elif mod == "checkerboard":
        amp = s("modulation_amplitude")
        tiles = s("tiles")
        over["modulation"] = cv.CheckerboardModulation(contrast=3.0 if amp is None else amp,
                                                       tiles=4 if tiles is None else tiles)
    elif mod == "constant":
        over["modulation"] = cv.ConstantModulation()
    return replace(mat, **over).validate()


def build_model(config, name=None):
    """Assemble (model, initial state, dt, steps) for a configuration."""
    name = name or config.get("run", "scenario")
    try:
        entry = SCENARIOS[name]
    except KeyError:
        raise UnknownName(f"unknown scenario {name!r}") from None
    grid = Grid(config.get("grid", "nx"), config.get("grid", "ny"),
                config.get("grid", "lx"), config.get("grid", "ly"))
    material = build_material(config, entry)
    dpar = cv.DissipationParams(**{k: _setting(config, entry, "dissipation", k)
                                   for k in ("nu0", "nu1", "nu2", "p", "q")})
    dpar.validate()
    for msg in dpar.validate(d=2):
        log.warning(msg)
    cutoff = cv.CutoffParams(lam=config.get("cutoff", "lambda"),
                             enabled=config.get("cutoff", "enabled")).validate()
    forcing = _setting(config, entry, "scenario", "forcing")
    if forcing:
        gravity = StirringForce(forcing)
    else:
        gravity = UniformGravity(tuple(_setting(config, entry, "scenario", "gravity")))
    solver = SolverSettings(**{k: config.get("solver", k) for k in
                               ("lin_tol", "lin_maxiter", "picard_momentum", "picard_flow_max",
                                "picard_flow_tol", "cfl_cap")})
    model = Model(grid=grid, material=material, dissipation=dpar, cutoff=cutoff,
                  gravity=gravity, solver=solver,
                  hardening_in_total=config.get("audit", "hardening_in_total"))
    state = initial_state(model,
                          amplitude=_setting(config, entry, "scenario", "amplitude"),
                          theta0=_setting(config, entry, "scenario", "theta0"),
                          velocity=_setting(config, entry, "scenario", "velocity"),
                          perturbation=config.get("scenario", "perturbation"),
                          seed=config.get("run", "seed"))
    dt = config.get("run", "dt")
    if dt is None:
        vmax = float(np.max(np.abs(state.v)))
        dt = config.get("run", "cfl") * grid.h / (model.wave_speed() + vmax)
    return model, state, dt, config.get("run", "steps")


def velocity_field(grid, kind, amplitude):
    x = grid.coords[..., 0] / grid.lx
    y = grid.coords[..., 1] / grid.ly
    sx, sy = np.sin(math.pi * x) ** 2, np.sin(math.pi * y) ** 2
    s2x, s2y = np.sin(2 * math.pi * x), np.sin(2 * math.pi * y)
    if kind == "vortex":
        v = np.stack([sx * s2y, -s2x * sy], axis=-1)
    elif kind == "compressive":
        v = np.stack([s2x * sy, sx * s2y], axis=-1)
    else:
        raise UnknownName(f"unknown initial velocity {kind!r}")
    v = amplitude * v
    v[grid.boundary_mask] = 0.0
    return v


def random_perturbation(grid, eps, seed, modes=3):
    rng = np.random.default_rng(seed)
    x = grid.coords[..., 0] / grid.lx
    y = grid.coords[..., 1] / grid.ly
    a = rng.standard_normal((2, modes, modes))
    out = np.zeros(grid.shape + (2,))
    for m in range(1, modes + 1):
        for n in range(1, modes + 1):
            mode = np.sin(m * math.pi * x) * np.sin(n * math.pi * y)
            out += mode[..., None] * a[:, m - 1, n - 1] / (m * n)
    out[grid.boundary_mask] = 0.0
    return eps * out


def initial_state(model, amplitude=0.0, theta0=1.0, velocity="vortex", perturbation=0.0, seed=0):
    grid, mat = model.grid, model.material
    v = velocity_field(grid, velocity, amplitude) if amplitude else np.zeros(grid.shape + (2,))
    if perturbation:
        v = v + random_perturbation(grid, perturbation, seed)
    xi = grid.coords.copy()
    Fp = tk.identity(2, grid.shape)
    theta = np.full(grid.shape, float(theta0))
    w, _ = cv.heat_internal_energy(mat, tk.identity(2, grid.shape), theta)
    theta = cv.invert_enthalpy(mat, tk.identity(2, grid.shape), w, theta)
    return StateFields(v=v, xi=xi, Fp=Fp, w=w, theta=theta)

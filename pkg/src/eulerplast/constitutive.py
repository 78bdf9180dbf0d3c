"""Neo-Hookean thermoplastic material with isotropic hardening.

Free energy split:
    stored      phi   = K/2 (J-1)^2 + G/2 (J^{-2/d} |Fe|^2 - d)
    hardening   phih  = H/2 |Fp|^2
    thermal     gamma = -c theta (ln theta - 1) - c1 J theta^alpha
Heat part of the internal energy (the enthalpy w):
    omega = (gamma - theta gamma_theta) / J = c theta / J + c1 (alpha-1) theta^alpha
Dissipation potential: zeta = M(theta)/2 |Lp|^2.

All functions are vectorized over leading batch axes.  ``X`` is the
referential position (..., d) used by spatial modulation; ``None`` means
an unmodulated material.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
import math

import numpy as np

from . import tensorkin as tk
from .errors import (NegativeTemperature, NoConvergence, NonDeviatoricInput,
                     NonPositiveDeterminant, UnknownName, ValidationError)


# ---------------------------------------------------------------------------
# Parameter presets (maps that live inside a MaterialModel)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantViscosity:
    M0: float = 1.0
    kind = "constant"

    def __call__(self, theta):
        return np.full(np.shape(theta), self.M0, dtype=float)

    @property
    def infimum(self):
        return self.M0

    def describe(self):
        return f"M(theta) = {self.M0:g}"


@dataclass(frozen=True)
class MeltingRamp:
    """M(theta) = M0 max(0, 1 - theta/theta_melt) + M_floor."""
    M0: float = 1.0
    theta_melt: float = 2.0
    M_floor: float = 0.05
    kind = "melting_ramp"

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.M0 * np.maximum(0.0, 1.0 - theta / self.theta_melt) + self.M_floor

    @property
    def infimum(self):
        return self.M_floor

    def describe(self):
        return (f"M(theta) = {self.M0:g} max(0, 1 - theta/{self.theta_melt:g})"
                f" + {self.M_floor:g}")


@dataclass(frozen=True)
class ConstantConductivity:
    kappa0: float = 0.01
    kind = "constant"

    def __call__(self, X, Fe, theta):
        return np.full(np.shape(theta), self.kappa0, dtype=float)

    @property
    def infimum(self):
        return self.kappa0


@dataclass(frozen=True)
class Insulated:
    kind = "insulated"

    def __call__(self, t, x, theta):
        return np.zeros(np.shape(theta))


@dataclass(frozen=True)
class NewtonCooling:
    """Boundary heat influx h = k (theta_ext - theta)."""
    k: float = 0.1
    theta_ext: float = 1.0
    kind = "newton_cooling"

    def __call__(self, t, x, theta):
        return self.k * (self.theta_ext - np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class ConstantModulation:
    kind = "constant"

    def __call__(self, X):
        return np.ones(np.shape(X)[:-1])


@dataclass(frozen=True)
class LinearModulation:
    """s(X) = 1 + slope * X[axis]."""
    slope: float = 0.5
    axis: int = 0
    kind = "linear"

    def __call__(self, X):
        return 1.0 + self.slope * np.asarray(X, dtype=float)[..., self.axis]


@dataclass(frozen=True)
class CheckerboardModulation:
    """Smoothed two-phase checkerboard with factors 1 and ``contrast``.

    The default sharpness spreads each interface over a few cells of a 64^2
    grid; sharper interfaces are under-resolved and the node quadrature of
    rho_R(xi) det grad xi then drifts as tile edges move between nodes.
    """
    contrast: float = 3.0
    tiles: int = 4
    sharpness: float = 4.0
    length: float = 1.0
    kind = "checkerboard"

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        k = math.pi * self.tiles / self.length
        s = np.sin(k * X[..., 0]) * np.sin(k * X[..., 1])
        phase = 0.5 * (1.0 + np.tanh(self.sharpness * s))
        return 1.0 + (self.contrast - 1.0) * phase


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaterialModel:
    name: str = "custom"
    K_E: float = 4.0
    G_E: float = 1.0
    H_E: float = 0.0
    c: float = 1.0
    c1: float = 0.05
    alpha: float = 1.5
    rho_R: float = 1.0
    M: object = field(default_factory=ConstantViscosity)
    kappa: object = field(default_factory=ConstantConductivity)
    h: object = field(default_factory=Insulated)
    modulation: object = field(default_factory=ConstantModulation)

    def validate(self):
        errs = []
        if not self.K_E >= 0:
            errs.append("K_E must be >= 0")
        if not self.G_E >= 0:
            errs.append("G_E must be >= 0")
        if not self.H_E >= 0:
            errs.append("H_E must be >= 0")
        if not self.c > 0:
            errs.append("c must be > 0")
        if not self.c1 > 0:
            errs.append("c1 must be > 0")
        if not (1.0 < self.alpha <= 2.0):
            errs.append("alpha must satisfy 1 < alpha <= 2")
        if not self.rho_R > 0:
            errs.append("rho_R must be > 0")
        if not self.M.infimum > 0:
            errs.append("plastic viscosity M must have a positive lower bound")
        if not self.kappa.infimum > 0:
            errs.append("conductivity must have a positive lower bound")
        if errs:
            raise ValidationError(errs)
        return self

    def scale(self, X):
        if X is None:
            return 1.0
        return self.modulation(X)

    def with_overrides(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class DissipationParams:
    nu0: float = 0.01
    nu1: float = 1e-6
    nu2: float = 1e-6
    p: float = 4.0
    q: float = 4.0

    def validate(self, d=2):
        errs = [f"{n} must be >= 0" for n in ("nu0", "nu1", "nu2") if not getattr(self, n) >= 0]
        for n in ("p", "q"):
            if not getattr(self, n) >= 2:
                errs.append(f"{n} must be >= 2")
        if errs:
            raise ValidationError(errs)
        warnings = []
        for n in ("p", "q"):
            if getattr(self, n) <= d:
                warnings.append(f"{n} = {getattr(self, n):g} does not exceed d = {d};"
                                f" the existence theory assumes {n} > d")
        return warnings


@dataclass(frozen=True)
class CutoffParams:
    lam: float = 0.5
    enabled: bool = False

    def validate(self):
        if not (0.0 < self.lam <= 1.0):
            raise ValidationError("cutoff lambda must lie in (0, 1]")
        return self


# ---------------------------------------------------------------------------
# Material presets
# ---------------------------------------------------------------------------

MATERIALS = {
    "neo_hookean_default": MaterialModel(name="neo_hookean_default", K_E=4.0, G_E=1.0,
                                         H_E=0.1, c=1.0, c1=0.05, alpha=1.5),
    "jeffreys": MaterialModel(name="jeffreys", K_E=4.0, G_E=1.0, H_E=0.0,
                              c=1.0, c1=0.05, alpha=1.5),
    "hardening": MaterialModel(name="hardening", K_E=4.0, G_E=1.0, H_E=0.5,
                               c=1.0, c1=0.05, alpha=1.5),
    "melting": MaterialModel(name="melting", K_E=4.0, G_E=1.0, H_E=0.0, c=1.0,
                             c1=0.05, alpha=1.5,
                             M=MeltingRamp(M0=1.0, theta_melt=1.5, M_floor=0.05)),
    "quadratic_coupling": MaterialModel(name="quadratic_coupling", K_E=4.0, G_E=1.0,
                                        H_E=0.1, c=1.0, c1=1.0, alpha=2.0),
}


def get_material(name):
    try:
        return MATERIALS[name]
    except KeyError:
        raise UnknownName(f"unknown material preset {name!r}") from None


def describe_material(name):
    m = get_material(name)
    lines = [f"material {m.name}"]
    for f_ in ("K_E", "G_E", "H_E", "c", "c1", "alpha", "rho_R"):
        lines.append(f"  {f_} = {getattr(m, f_):g}")
    lines.append(f"  M: {m.M.describe()}")
    lines.append(f"  kappa: {m.kappa.kind} {m.kappa.kappa0:g}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _check_det(J):
    if np.any(~(J > 0)):
        raise NonPositiveDeterminant(f"det Fe = {np.min(J):.3e} is not positive")


def _check_theta(theta):
    if np.any(np.asarray(theta) < 0):
        raise NegativeTemperature(f"theta = {np.min(theta):.3e} is negative")


def _bc(a):
    """Broadcast a batch scalar against trailing tensor axes."""
    return np.asarray(a, dtype=float)[..., None, None]


# ---------------------------------------------------------------------------
# Energies and stresses
# ---------------------------------------------------------------------------

def stored_energy(material, Fe, X=None):
    Fe = np.asarray(Fe, dtype=float)
    d = Fe.shape[-1]
    J = tk.det(Fe)
    _check_det(J)
    s = material.scale(X)
    iso = J ** (-2.0 / d) * tk.ddot(Fe, Fe)
    return s * (0.5 * material.K_E * (J - 1.0) ** 2 + 0.5 * material.G_E * (iso - d))


def stored_stress(material, Fe, X=None):
    """d phi / d Fe."""
    Fe = np.asarray(Fe, dtype=float)
    d = Fe.shape[-1]
    J = tk.det(Fe)
    _check_det(J)
    s = material.scale(X)
    cof = tk.cofactor(Fe)
    Jm = J ** (-2.0 / d)
    tr = tk.ddot(Fe, Fe)
    # J^{-2/d} (Fe - tr/d Fe^{-T}); Fe^{-T} = Cof / J
    vol = material.K_E * (J - 1.0)
    out = _bc(vol) * cof + material.G_E * (_bc(Jm) * Fe - _bc(Jm * tr / (d * J)) * cof)
    return _bc(s) * out


def thermal_energy(material, Fe, theta):
    """Return (gamma, d gamma/d Fe, d gamma/d theta)."""
    Fe = np.asarray(Fe, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _check_theta(theta)
    J = tk.det(Fe)
    _check_det(J)
    c, c1, a = material.c, material.c1, material.alpha
    ta = theta ** a
    with np.errstate(divide="ignore", invalid="ignore"):
        logt = np.log(theta)
        g = np.where(theta > 0, -c * theta * (logt - 1.0), 0.0) - c1 * J * ta
        g_theta = -c * logt - c1 * J * a * theta ** (a - 1.0)
    g_Fe = -c1 * _bc(ta) * tk.cofactor(Fe)
    return g, g_Fe, g_theta


def hardening_energy(material, Fp, X=None):
    """Return (phih, d phih/d Fp)."""
    Fp = np.asarray(Fp, dtype=float)
    s = material.scale(X)
    H = material.H_E * np.asarray(s, dtype=float)
    return 0.5 * H * tk.ddot(Fp, Fp), _bc(H) * Fp


def cutoff_pi(Fe, params, with_gradient=False):
    """Smooth cutoff: 1 on {det >= lam, |Fe| <= 1/lam}, 0 where det <= lam/2 or |Fe| >= 2/lam."""
    Fe = np.asarray(Fe, dtype=float)
    lam = params.lam
    J = tk.det(Fe)
    n = tk.frob(Fe)
    u = np.clip(2.0 * J - lam, 0.0, lam)
    f = 3.0 / lam ** 2 * u ** 2 - 2.0 / lam ** 3 * u ** 3
    y = np.clip(lam * n, 1.0, 2.0)
    g = 3.0 * (y - 2.0) ** 2 + 2.0 * (y - 2.0) ** 3
    f = np.where(J >= lam, 1.0, np.where(J <= lam / 2, 0.0, f))
    g = np.where(n <= 1.0 / lam, 1.0, np.where(n >= 2.0 / lam, 0.0, g))
    pi = f * g
    if not with_gradient:
        return pi
    df = np.where((J > lam / 2) & (J < lam), 2.0 * (6.0 * u / lam ** 2 - 6.0 * u ** 2 / lam ** 3), 0.0)
    dg = np.where((n > 1.0 / lam) & (n < 2.0 / lam), lam * (6.0 * (y - 2.0) + 6.0 * (y - 2.0) ** 2), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(_bc(n) > 0, Fe / _bc(n), 0.0)
    grad = _bc(df * g) * tk.cofactor(Fe) + _bc(f * dg) * unit
    return pi, grad


def det_lambda(A, params):
    """pi det A + 1 - pi, arranged to return det A exactly where pi = 1."""
    pi = cutoff_pi(A, params)
    J = tk.det(A)
    return J + (1.0 - pi) * (1.0 - J)


def _effective_stored(material, Fe, X, cutoff):
    """(pi phi, d(pi phi)/dFe, pi) honoring an optional enabled cutoff."""
    dphi = stored_stress(material, Fe, X)
    if cutoff is None or not cutoff.enabled:
        return None, dphi, None
    phi = stored_energy(material, Fe, X)
    pi, dpi = cutoff_pi(Fe, cutoff, with_gradient=True)
    return pi * phi, _bc(pi) * dphi + _bc(phi) * dpi, pi


def stored_energy_density(material, Fe, X=None, cutoff=None):
    """Stored energy entering the energy functional (pi phi with the cutoff on)."""
    phi = stored_energy(material, Fe, X)
    if cutoff is not None and cutoff.enabled:
        phi = cutoff_pi(Fe, cutoff) * phi
    return phi


def elastic_cauchy_stress(material, Fe, theta, X=None, cutoff=None):
    """T_e = (phi' + gamma'_Fe) Fe^T / det Fe."""
    Fe = np.asarray(Fe, dtype=float)
    _, dphi, pi = _effective_stored(material, Fe, X, cutoff)
    _, g_Fe, _ = thermal_energy(material, Fe, theta)
    if pi is not None:
        g_Fe = _bc(pi) * g_Fe
    return (dphi + g_Fe) @ tk.transpose(Fe) / _bc(tk.det(Fe))


def mandel_driving_force(material, Fe, Fp, theta, X=None, cutoff=None):
    """dev(Fe^T phi' + Fe^T gamma'_Fe - phih' Fp^T)."""
    Fe = np.asarray(Fe, dtype=float)
    Fp = np.asarray(Fp, dtype=float)
    _, dphi, pi = _effective_stored(material, Fe, X, cutoff)
    _, g_Fe, _ = thermal_energy(material, Fe, theta)
    if pi is not None:
        g_Fe = _bc(pi) * g_Fe
    _, dh = hardening_energy(material, Fp, X)
    FeT = tk.transpose(Fe)
    return tk.dev(FeT @ dphi + FeT @ g_Fe - dh @ tk.transpose(Fp))


def plastic_dissipation_gradient(material, theta, Lp):
    """d zeta / d Lp = M(theta) Lp."""
    Lp = np.asarray(Lp, dtype=float)
    if np.any(np.abs(tk.trace(Lp)) > 1e-10 * tk.frob(Lp)):
        raise NonDeviatoricInput("Lp must be trace-free")
    return _bc(material.M(theta)) * Lp


# ---------------------------------------------------------------------------
# Enthalpy
# ---------------------------------------------------------------------------

def heat_internal_energy(material, Fe, theta):
    """Return (w, dw/dtheta) with w = c theta / J + c1 (alpha-1) theta^alpha."""
    theta = np.asarray(theta, dtype=float)
    _check_theta(theta)
    J = tk.det(np.asarray(Fe, dtype=float))
    _check_det(J)
    c, c1, a = material.c, material.c1, material.alpha
    w = c * theta / J + c1 * (a - 1.0) * theta ** a
    dw = c / J + c1 * a * (a - 1.0) * theta ** (a - 1.0)
    return w, dw


def _omega_ext(J, theta, c, c1, a):
    """Enthalpy with the odd extension to theta < 0 (monitoring only)."""
    ta = np.abs(theta) ** a
    w = c * theta / J + np.sign(theta) * c1 * (a - 1.0) * ta
    dw = c / J + c1 * a * (a - 1.0) * np.abs(theta) ** (a - 1.0)
    return w, dw


def invert_enthalpy(material, Fe, w, theta_guess=None, max_iter=100):
    """Solve omega(Fe, theta) = w for theta by bisection-guarded Newton.

    Negative w (round-off undershoot) maps to negative theta through the
    odd extension of omega so that the temperature monitor can see it.
    """
    w = np.asarray(w, dtype=float)
    J = np.broadcast_to(tk.det(np.asarray(Fe, dtype=float)), w.shape)
    _check_det(J)
    c, c1, a = material.c, material.c1, material.alpha
    sgn = np.where(w < 0, -1.0, 1.0)
    wa = np.abs(w)
    lo = np.zeros(w.shape)
    hi = wa * J / c
    if theta_guess is None:
        th = hi.copy()
    else:
        th = np.clip(np.abs(np.broadcast_to(theta_guess, w.shape)), lo, hi)
    done = wa == 0.0
    th = np.where(done, 0.0, th)
    tol = 1e-10 * np.maximum(1.0, wa)
    for _ in range(max_iter):
        if done.all():
            break
        f, df = _omega_ext(J, th, c, c1, a)
        r = f - wa
        lo = np.where(r < 0, np.maximum(lo, th), lo)
        hi = np.where(r > 0, np.minimum(hi, th), hi)
        step = r / df
        new = th - step
        out = ~((new > lo) & (new < hi))
        new = np.where(out, 0.5 * (lo + hi), new)
        conv = (np.abs(new - th) <= 1e-15 * np.maximum(th, 1e-300)) | (r == 0) | (hi - lo <= 1e-15 * hi)
        th = np.where(done, th, new)
        done = done | (conv & (np.abs(r) <= tol))
    else:
        f, _ = _omega_ext(J, th, c, c1, a)
        if np.any(np.abs(f - wa) > tol):
            raise NoConvergence("enthalpy inversion did not converge in 100 iterations")
    return sgn * th


# ---------------------------------------------------------------------------
# Conductivity and boundary flux
# ---------------------------------------------------------------------------

def conductivity(material, X, Fe, theta):
    return material.kappa(X, Fe, theta)


def boundary_flux(material, t, x, theta):
    return material.h(t, x, theta)

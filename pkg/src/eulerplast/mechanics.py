"""Momentum balance and plastic flow rule for one time step.

Momentum (semi-implicit, lagged-coefficient Picard):
    rho (v' - v*)/dt = div(T_e + nu0 c0 e(v')) - div div(nu1 c1 grad e(v')) + rho g
with v* the advected velocity, c0 = |e|^{p-2}, c1 = |grad e|^{p-2} taken from
the previous iterate, and v' = 0 on the walls.

Flow rule, scaled by 1/J so that it is self-adjoint in the node weights:
    (M(theta)/J) Lp - div(nu2 c2 grad Lp) = dev(Mandel)/J,   c2 = |grad Lp|^{q-2}
with zero normal derivative of Lp on the walls.  It is the stationarity
condition of a convex energy and is solved by damped Newton iterations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constitutive as cv
from . import fields as fd
from . import tensorkin as tk
from .errors import NoConvergence
from .linsolve import pcg
from .transport import derived_density, reference_density


@dataclass
class MomentumWorkspace:
    Te: np.ndarray
    D: np.ndarray
    force: np.ndarray
    momentum: np.ndarray
    iterations: int = 0


def kinematics(model, state):
    """Return (grad xi, Fe, J = det Fe)."""
    grad_xi = fd.gradient(model.grid, state.xi)
    Fe = tk.elastic_strain(state.Fp, grad_xi)
    return grad_xi, Fe, tk.det(Fe)


def constitutive_theta(theta):
    """Temperatures handed to material laws are clamped at zero."""
    return np.maximum(theta, 0.0)


def _viscous_coefficients(model, v):
    grid, dp = model.grid, model.dissipation
    e = fd.sym_velocity_gradient(grid, v)
    ge = fd.neumann_gradient(grid, e)
    c0 = fd.tensor_norm(e, 2) ** (dp.p - 2.0)
    c1 = fd.tensor_norm(ge, 3) ** (dp.p - 2.0)
    return c0, c1


def viscous_force(model, v, c0, c1):
    """div(nu0 c0 e(v)) - div div(nu1 c1 grad e(v)); the dissipative force."""
    grid, dp = model.grid, model.dissipation
    e = fd.sym_velocity_gradient(grid, v)
    S = dp.nu0 * c0[..., None, None] * e
    if dp.nu1 > 0:
        S = S - fd.p_laplacian_operator(grid, e, dp.nu1, dp.p, coeff=c1)
    return fd.divergence(grid, S), S


def body_force_density(model, state, t, grad_xi=None):
    """Gravity term rho_R(xi) det(grad xi) g (det_lambda when the cutoff is on)."""
    grid = model.grid
    if grad_xi is None:
        grad_xi = fd.gradient(grid, state.xi)
    if model.cutoff.enabled:
        detl = cv.det_lambda(grad_xi, model.cutoff)
    else:
        detl = tk.det(grad_xi)
    rho = reference_density(model.rho_R, state.xi) * detl
    return rho[..., None] * model.gravity(grid, t)


def momentum_step(model, state, dt, v_star=None, t=0.0):
    """Advance the velocity.  Returns (v', workspace)."""
    grid, dp, sv = model.grid, model.dissipation, model.solver
    if v_star is None:
        from .transport import semi_lagrangian
        v_star = semi_lagrangian(grid, state.v, state.v, dt)
    grad_xi, Fe, _ = kinematics(model, state)
    theta = constitutive_theta(state.theta)
    Te = cv.elastic_cauchy_stress(model.material, Fe, theta, X=state.xi, cutoff=model.cutoff)
    rho = derived_density(grid, state.xi, model.rho_R)
    rhs = rho[..., None] * v_star / dt + fd.divergence(grid, Te)
    if not model.gravity.is_zero:
        rhs = rhs + body_force_density(model, state, t, grad_xi)
    mask = grid.interior_mask[..., None]
    weights = grid.cellvol[..., None]
    mass = rho[..., None] / dt
    v = fd.zero_boundary(grid, state.v)
    iters = 0
    viscous = dp.nu0 > 0 or dp.nu1 > 0
    sweeps = max(1, sv.picard_momentum) if viscous else 1
    S = np.zeros(grid.shape + (2, 2))
    for _ in range(sweeps):
        if viscous:
            c0, c1 = _viscous_coefficients(model, v)
            diag = mass + (dp.nu0 * c0 * 0.5 * (1 / grid.hx ** 2 + 1 / grid.hy ** 2)
                           + dp.nu1 * c1 * 0.375 * (1 / grid.hx ** 2 + 1 / grid.hy ** 2) ** 2)[..., None]

            def apply_A(u):
                f, _ = viscous_force(model, u, c0, c1)
                return mass * u - f

            v, k = pcg(apply_A, rhs * mask, v, diag, weights, sv.lin_tol, sv.lin_maxiter, mask)
            iters += k
        else:
            v = rhs / mass
        v = fd.zero_boundary(grid, v)
    if viscous:
        _, S = viscous_force(model, v, c0, c1)
    force = rho[..., None] * (v - v_star) / dt
    ws = MomentumWorkspace(Te=Te, D=S, force=force, momentum=rho[..., None] * v, iterations=iters)
    return v, ws


# ---------------------------------------------------------------------------
# Flow rule
# ---------------------------------------------------------------------------

def _lp_coeff(model, Lp):
    G = fd.neumann_gradient(model.grid, Lp)
    return fd.tensor_norm(G, 3) ** (model.dissipation.q - 2.0)


def _flow_operator(model, a, c2):
    grid, nu2 = model.grid, model.dissipation.nu2

    def apply_A(L):
        return a[..., None, None] * L - fd.p_laplacian_operator(grid, L, nu2, 2.0, coeff=c2)
    return apply_A


def _flow_energy(model, a, rhs, L):
    """Convex functional whose weighted gradient is the flow-rule residual."""
    grid, dp = model.grid, model.dissipation
    G = fd.neumann_gradient(grid, L)
    dens = 0.5 * a * tk.ddot(L, L) - tk.ddot(rhs, L)
    dens = dens + dp.nu2 / dp.q * fd.tensor_norm(G, 3) ** dp.q
    return fd.integrate(grid, dens)


def _flow_hessian(model, a, Lp):
    """Matrix-free Hessian of the flow-rule energy at Lp (and a diagonal preconditioner)."""
    grid, dp = model.grid, model.dissipation
    G = fd.neumann_gradient(grid, Lp)
    n = fd.tensor_norm(G, 3)
    c2 = n ** (dp.q - 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        c4 = np.where(n > 0, (dp.q - 2.0) * n ** (dp.q - 4.0), 0.0)

    def apply_H(D):
        dG = fd.neumann_gradient(grid, D)
        proj = np.sum(G * dG, axis=(-3, -2, -1))
        flux = dp.nu2 * (c2[..., None, None, None] * dG + (c4 * proj)[..., None, None, None] * G)
        return a[..., None, None] * D - fd.divergence(grid, flux)

    diag = (a + dp.nu2 * (dp.q - 1.0) * c2 * 2.0 * (1 / grid.hx ** 2 + 1 / grid.hy ** 2))
    return apply_H, diag[..., None, None]


def solve_flow_rule(model, mandel, theta, J, Lp_guess=None):
    """Solve the flow rule for a given deviatoric Mandel force field.

    The flow rule is the stationarity condition of a convex energy; it is
    solved by Newton's method with a backtracking line search on that
    energy.  Returns (Lp, Newton iterations).
    """
    grid, dp, sv = model.grid, model.dissipation, model.solver
    M = model.material.M(theta)
    pointwise = mandel / M[..., None, None]
    if dp.nu2 == 0.0:
        return tk.dev(pointwise), 0
    a = M / J
    rhs = mandel / J[..., None, None]
    weights = grid.cellvol[..., None, None]
    rnorm_b = np.sqrt(fd.inner(grid, rhs, rhs)) or 1.0
    Lp = pointwise if Lp_guess is None else np.asarray(Lp_guess, dtype=float)

    def residual(L):
        return _flow_operator(model, a, _lp_coeff(model, L))(L) - rhs

    res = residual(Lp)
    rel = np.sqrt(fd.inner(grid, res, res)) / rnorm_b
    if rel <= sv.picard_flow_tol:
        return tk.dev(Lp), 0
    energy = _flow_energy(model, a, rhs, Lp)
    for it in range(1, sv.picard_flow_max + 1):
        apply_H, diag = _flow_hessian(model, a, Lp)
        # inexact Newton: CG iterates from zero are always descent directions
        step, _ = pcg(apply_H, -res, np.zeros_like(Lp), diag, weights,
                      max(sv.lin_tol, min(0.1, 1e-2 * rel)), sv.lin_maxiter, strict=False)
        s = 1.0
        while True:
            cand = Lp + s * step
            e_new = _flow_energy(model, a, rhs, cand)
            if e_new <= energy or s < 1e-8:
                break
            s *= 0.5
        if e_new > energy:
            if rel <= 100 * sv.lin_tol:
                break  # converged to round-off level
            raise NoConvergence("flow-rule line search failed to decrease the energy")
        Lp, energy = cand, e_new
        res = residual(Lp)
        rel = np.sqrt(fd.inner(grid, res, res)) / rnorm_b
        if rel <= sv.picard_flow_tol:
            return tk.dev(Lp), it
    if rel <= sv.picard_flow_tol:
        return tk.dev(Lp), it
    raise NoConvergence(f"flow-rule Newton residual {rel:.3e} above tolerance after "
                        f"{sv.picard_flow_max} iterations")


def flow_rule_step(model, state, Fe=None, J=None, Lp_guess=None):
    """Plastic distortion rate Lp for the current state."""
    if Fe is None:
        _, Fe, J = kinematics(model, state)
    theta = constitutive_theta(state.theta)
    mandel = cv.mandel_driving_force(model.material, Fe, state.Fp, theta, X=state.xi,
                                     cutoff=model.cutoff)
    Lp, _ = solve_flow_rule(model, mandel, theta, J, Lp_guess)
    return Lp


def dissipation_density(model, v, Lp, theta, J):
    """nu0|e|^p + nu1|grad e|^p + nu2|grad Lp|^q + M(theta)|Lp|^2 / J."""
    grid, dp = model.grid, model.dissipation
    out = model.material.M(constitutive_theta(theta)) * tk.ddot(Lp, Lp) / J
    if dp.nu0 > 0 or dp.nu1 > 0:
        e = fd.sym_velocity_gradient(grid, v)
        if dp.nu0 > 0:
            out = out + dp.nu0 * fd.tensor_norm(e, 2) ** dp.p
        if dp.nu1 > 0:
            out = out + dp.nu1 * fd.tensor_norm(fd.neumann_gradient(grid, e), 3) ** dp.p
    if dp.nu2 > 0:
        out = out + dp.nu2 * fd.tensor_norm(fd.neumann_gradient(grid, Lp), 3) ** dp.q
    return out


def creep_probe(material, mandel_elastic, theta=1.0, dt=0.01, n_steps=200, nu2=0.0,
                Fp0=None, grid=None):
    """Drive a uniform material patch with a fixed elastic Mandel force.

    The elastic part m of the Mandel force is held constant (the elastic
    strain is kept fixed) while Fp evolves, so the hardening back-stress
    -dev(phih' Fp^T) is the only thing that changes.  Returns the history
    of Lp at the patch (one tensor per step).
    """
    from .model import Model
    from .transport import plastic_exponential_update, renormalize_isochoric
    grid = grid or fd.Grid(8, 8)
    dpar = cv.DissipationParams(nu0=0.0, nu1=0.0, nu2=nu2, p=4.0, q=4.0)
    model = Model(grid=grid, material=material, dissipation=dpar)
    m = np.broadcast_to(tk.dev(np.asarray(mandel_elastic, dtype=float)), grid.shape + (2, 2))
    Fp = np.broadcast_to(tk.identity(2) if Fp0 is None else np.asarray(Fp0, float),
                         grid.shape + (2, 2)).copy()
    th = np.full(grid.shape, float(theta))
    J = np.ones(grid.shape)
    history = []
    Lp = None
    for _ in range(n_steps):
        _, dh = cv.hardening_energy(material, Fp)
        mandel = m - tk.dev(dh @ tk.transpose(Fp))
        Lp, _ = solve_flow_rule(model, mandel, th, J, Lp)
        Fp = renormalize_isochoric(plastic_exponential_update(Fp, Lp, dt))
        history.append(Lp[grid.nx // 2, grid.ny // 2].copy())
    return np.array(history)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eulerplast import constitutive as cv
from eulerplast import tensorkin as tk
from eulerplast.errors import NonDeviatoricInput, UnknownName, ValidationError

from conftest import random_rotation, random_spd_like

MAT = cv.get_material("neo_hookean_default")
QUAD = cv.get_material("quadratic_coupling")


def fd_matrix_gradient(f, A, h=1e-6):
    """Central finite differences of a scalar function of a matrix."""
    G = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        E = np.zeros_like(A)
        E[idx] = h
        G[idx] = (f(A + E) - f(A - E)) / (2 * h)
    return G


def rel_err(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-12)


# --- stored energy ---------------------------------------------------------

def test_stored_energy_examples():
    assert cv.stored_energy(MAT, np.eye(2)) == 0.0
    m = cv.MaterialModel(K_E=1.0, G_E=1.0)
    # J = 4: volumetric 0.5*9, isochoric part J^{-1}|2I|^2 = 2 = d
    assert cv.stored_energy(m, 2 * np.eye(2)) == pytest.approx(4.5, rel=1e-15)


@pytest.mark.parametrize("d", [2, 3])
def test_stored_energy_frame_indifference(rng, d):
    for _ in range(100):
        Fe = random_spd_like(rng, d)
        Q = random_rotation(rng, d)
        a, b = cv.stored_energy(MAT, Fe), cv.stored_energy(MAT, Q @ Fe)
        assert abs(a - b) <= 1e-12 * max(abs(a), 1e-300)


def test_stored_stress_examples():
    np.testing.assert_allclose(cv.stored_stress(MAT, np.eye(2)), np.zeros((2, 2)), atol=1e-15)
    m = cv.MaterialModel(K_E=1.0, G_E=0.0)
    np.testing.assert_allclose(cv.stored_stress(m, 2 * np.eye(2)), np.diag([6.0, 6.0]))


@pytest.mark.parametrize("d", [2, 3])
def test_stored_stress_finite_differences(rng, d):
    for _ in range(30):
        Fe = random_spd_like(rng, d)
        an = cv.stored_stress(MAT, Fe)
        fd = fd_matrix_gradient(lambda A: cv.stored_energy(MAT, A), Fe)
        assert rel_err(an, fd) <= 1e-6


def test_modulated_energy_scales(rng):
    m = MAT.with_overrides(modulation=cv.LinearModulation(slope=0.5))
    X = np.array([0.4, 0.1])
    Fe = random_spd_like(rng)
    assert cv.stored_energy(m, Fe, X) == pytest.approx(1.2 * cv.stored_energy(MAT, Fe), rel=1e-14)


# --- thermal energy --------------------------------------------------------

def test_thermal_energy_examples():
    g, gF, gt = cv.thermal_energy(MAT, np.eye(2), 0.0)
    assert g == 0.0
    np.testing.assert_array_equal(gF, np.zeros((2, 2)))
    theta = 1.7
    _, gF, _ = cv.thermal_energy(MAT, np.eye(2), theta)
    np.testing.assert_allclose(gF, -MAT.c1 * theta ** MAT.alpha * np.eye(2), rtol=1e-15)


def test_thermal_energy_gradients(rng):
    for _ in range(30):
        Fe = random_spd_like(rng)
        theta = rng.uniform(0.1, 5.0)
        _, gF, gt = cv.thermal_energy(MAT, Fe, theta)
        fdF = fd_matrix_gradient(lambda A: cv.thermal_energy(MAT, A, theta)[0], Fe)
        assert rel_err(gF, fdF) <= 1e-6
        h = 1e-6 * theta
        fdt = (cv.thermal_energy(MAT, Fe, theta + h)[0] - cv.thermal_energy(MAT, Fe, theta - h)[0]) / (2 * h)
        assert abs(gt - fdt) <= 1e-6 * max(abs(gt), 1e-12)


def test_heat_part_concave_in_theta(rng):
    # omega = (gamma - theta gamma_theta)/J is increasing iff gamma is concave in theta
    Fe = random_spd_like(rng)
    th = np.linspace(0.05, 10, 200)
    g = cv.thermal_energy(MAT, np.broadcast_to(Fe, th.shape + (2, 2)), th)[0]
    assert np.all(np.diff(g, 2) < 0)


# --- hardening -------------------------------------------------------------

def test_hardening_examples(rng):
    m = cv.MaterialModel(H_E=2.0)
    e, g = cv.hardening_energy(m, np.eye(2))
    assert e == 2.0
    np.testing.assert_array_equal(g, 2 * np.eye(2))
    e0, g0 = cv.hardening_energy(cv.get_material("jeffreys"), random_spd_like(rng))
    assert e0 == 0.0 and not np.any(g0)
    Fp = random_spd_like(rng)
    assert cv.hardening_energy(m, Fp)[0] == cv.hardening_energy(m, -Fp)[0]


def test_hardening_gradient(rng):
    m = cv.get_material("hardening")
    for _ in range(20):
        Fp = random_spd_like(rng)
        fd = fd_matrix_gradient(lambda A: cv.hardening_energy(m, A)[0], Fp)
        assert rel_err(cv.hardening_energy(m, Fp)[1], fd) <= 1e-6


# --- stresses --------------------------------------------------------------

def test_cauchy_stress_examples():
    theta = 1.3
    np.testing.assert_allclose(cv.elastic_cauchy_stress(MAT, np.eye(2), theta),
                               -MAT.c1 * theta ** MAT.alpha * np.eye(2), rtol=1e-14, atol=1e-16)
    np.testing.assert_allclose(cv.elastic_cauchy_stress(MAT, np.eye(2), 0.0), np.zeros((2, 2)), atol=0)


def test_cauchy_stress_symmetric_and_objective(rng):
    for _ in range(100):
        Fe = random_spd_like(rng, spread=0.4)
        theta = rng.uniform(0, 3)
        T = cv.elastic_cauchy_stress(MAT, Fe, theta)
        assert np.linalg.norm(T - T.T) <= 1e-10 * np.linalg.norm(T)
        Q = random_rotation(rng)
        np.testing.assert_allclose(cv.elastic_cauchy_stress(MAT, Q @ Fe, theta), Q @ T @ Q.T,
                                   atol=1e-12 * np.linalg.norm(T))


def test_mandel_examples(rng):
    jef = cv.get_material("jeffreys")
    np.testing.assert_allclose(cv.mandel_driving_force(jef, np.eye(2), np.eye(2), 2.0),
                               np.zeros((2, 2)), atol=1e-15)
    for _ in range(20):
        M = cv.mandel_driving_force(MAT, random_spd_like(rng), random_spd_like(rng), rng.uniform(0, 2))
        assert abs(tk.trace(M)) <= 1e-12


def test_mandel_directional_derivative():
    jef = cv.get_material("jeffreys")
    Fe = np.diag([2.0, 0.5])
    M = cv.mandel_driving_force(jef, Fe, np.eye(2), 0.0)
    np.testing.assert_allclose(M, tk.dev(Fe.T @ cv.stored_stress(jef, Fe)), atol=1e-14)
    rng = np.random.default_rng(7)
    for _ in range(10):
        E = tk.dev(rng.standard_normal((2, 2)))
        s = 1e-6
        fd = (cv.stored_energy(jef, Fe @ tk.expm(s * E)) - cv.stored_energy(jef, Fe @ tk.expm(-s * E))) / (2 * s)
        assert abs(tk.ddot(M, E) - fd) <= 1e-6 * max(abs(fd), 1.0)


def test_plastic_dissipation_gradient():
    m = MAT.with_overrides(M=cv.ConstantViscosity(2.0))
    np.testing.assert_array_equal(cv.plastic_dissipation_gradient(m, 1.0, np.zeros((2, 2))), np.zeros((2, 2)))
    np.testing.assert_allclose(cv.plastic_dissipation_gradient(m, 1.0, np.diag([1.0, -1.0])), np.diag([2.0, -2.0]))
    with pytest.raises(NonDeviatoricInput):
        cv.plastic_dissipation_gradient(m, 1.0, np.eye(2))
    rng = np.random.default_rng(3)
    zeta = lambda L: 0.5 * 2.0 * tk.ddot(L, L)
    for _ in range(10):
        L = tk.dev(rng.standard_normal((2, 2)))
        E = tk.dev(rng.standard_normal((2, 2)))
        g = cv.plastic_dissipation_gradient(m, 1.0, L)
        for eps in (1e-3, 1e-4):
            assert abs(zeta(L + eps * E) - zeta(L) - eps * tk.ddot(g, E)) <= 2 * eps ** 2 * tk.ddot(E, E)


@given(st.floats(0.0, 5.0), st.floats(-3, 3), st.floats(-3, 3))
def test_dissipation_potential_coercive(theta, a, b):
    L = tk.dev(np.array([[a, b], [0.3 * b, -a]]))
    m = cv.get_material("melting")
    zeta = 0.5 * m.M(theta) * tk.ddot(L, L)
    assert zeta >= 0.5 * m.M.infimum * tk.ddot(L, L) - 1e-15


# --- enthalpy --------------------------------------------------------------

def test_heat_internal_energy_examples():
    assert cv.heat_internal_energy(MAT, np.eye(2), 0.0)[0] == 0.0
    assert cv.heat_internal_energy(QUAD, np.eye(2), 1.0)[0] == pytest.approx(2.0, rel=1e-15)


def test_enthalpy_inversion_examples():
    assert cv.invert_enthalpy(QUAD, np.eye(2), 0.0) == 0.0
    assert cv.invert_enthalpy(QUAD, np.eye(2), 2.0) == pytest.approx(1.0, abs=1e-14)


@given(st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_enthalpy_monotone(t1, t2):
    if t1 == t2:
        return
    lo, hi = sorted((t1, t2))
    Fe = np.diag([1.1, 0.8])
    assert cv.heat_internal_energy(MAT, Fe, lo)[0] < cv.heat_internal_energy(MAT, Fe, hi)[0]


def test_enthalpy_derivative_finite_difference(rng):
    for _ in range(20):
        Fe = random_spd_like(rng)
        th = rng.uniform(0.1, 50)
        h = 1e-6 * th
        fd = (cv.heat_internal_energy(MAT, Fe, th + h)[0] - cv.heat_internal_energy(MAT, Fe, th - h)[0]) / (2 * h)
        assert abs(cv.heat_internal_energy(MAT, Fe, th)[1] - fd) <= 1e-6 * fd


def test_heat_part_consistent_with_free_energy(rng):
    # w = (gamma - theta gamma_theta) / J
    for _ in range(10):
        Fe = random_spd_like(rng)
        th = rng.uniform(0.1, 10)
        g, _, gt = cv.thermal_energy(MAT, Fe, th)
        w = cv.heat_internal_energy(MAT, Fe, th)[0]
        assert w == pytest.approx((g - th * gt) / tk.det(Fe), rel=1e-13)


@pytest.mark.parametrize("name", sorted(cv.MATERIALS))
def test_enthalpy_round_trip(rng, name):
    mat = cv.get_material(name)
    theta = np.concatenate([[0.0, 1e-12, 1e-6, 100.0], rng.uniform(0, 100, 500)])
    Fe = np.array([random_spd_like(rng) for _ in theta])
    w, _ = cv.heat_internal_energy(mat, Fe, theta)
    back = cv.invert_enthalpy(mat, Fe, w)
    assert np.max(np.abs(back - theta)) <= 1e-10


def test_enthalpy_negative_maps_to_negative():
    th = cv.invert_enthalpy(MAT, np.eye(2), -1e-9)
    assert th < 0


# --- cutoff ----------------------------------------------------------------

def published_pi(det, norm, lam):
    """Piecewise cutoff with each factor held at its plateau outside its ramp."""
    if det >= lam and norm <= 1 / lam:
        return 1.0
    if det <= lam / 2 or norm >= 2 / lam:
        return 0.0
    x = min(2 * det / lam, 2.0)
    f = 3 * (x - 1) ** 2 - 2 * (x - 1) ** 3
    y = max(lam * norm, 1.0)
    g = 3 * (y - 2) ** 2 + 2 * (y - 2) ** 3
    return f * g


def diag_with(det, norm):
    # diag(a, b) with ab = det, a^2 + b^2 = norm^2
    s = math.sqrt(norm ** 2 + 2 * det)
    t = math.sqrt(norm ** 2 - 2 * det)
    return np.diag([(s + t) / 2, (s - t) / 2])


def test_cutoff_examples():
    p = cv.CutoffParams(lam=0.5)
    assert cv.cutoff_pi(np.eye(2), p) == 1.0
    assert cv.cutoff_pi(0.1 * np.eye(2), p) == 0.0
    Fe = diag_with(0.375, 2.0)
    assert cv.cutoff_pi(Fe, p) == pytest.approx(0.5, abs=1e-12)
    assert cv.det_lambda(Fe, p) == pytest.approx(0.6875, abs=1e-12)
    assert cv.det_lambda(np.eye(2) * 1.1, p) == pytest.approx(1.21, rel=1e-15)
    assert cv.det_lambda(0.1 * np.eye(2), p) == 1.0


@given(st.floats(0.05, 1.5), st.floats(0.5, 6.0), st.sampled_from([0.3, 0.5, 0.7]))
def test_cutoff_matches_independent_evaluation(det, norm, lam):
    if norm ** 2 < 2 * det + 1e-9:
        return
    Fe = diag_with(det, norm)
    assert abs(cv.cutoff_pi(Fe, cv.CutoffParams(lam=lam)) - published_pi(det, norm, lam)) <= 1e-12


def test_cutoff_gradient_and_c1(rng):
    p = cv.CutoffParams(lam=0.5)
    pts = 0
    while pts < 50:
        Fe = rng.uniform(-1.5, 1.5, (2, 2))
        J, n = tk.det(Fe), tk.frob(Fe)
        if not (0.25 < J < 0.5 or 2.0 < n < 4.0) or J <= 0:
            continue
        pi, grad = cv.cutoff_pi(Fe, p, with_gradient=True)
        fd = fd_matrix_gradient(lambda A: cv.cutoff_pi(A, p), Fe)
        assert np.linalg.norm(grad - fd) <= 1e-6 * max(np.linalg.norm(fd), 1.0)
        pts += 1
    # one-sided slopes (Richardson-extrapolated) and analytic gradients agree across every kink
    def one_sided(Fe, d, h):
        D = lambda k: (cv.cutoff_pi(Fe + k * d, p) - cv.cutoff_pi(Fe, p)) / k
        return 2 * D(h / 2) - D(h)

    for det, norm in ((0.5, 1.5), (0.25, 1.5), (0.45, 2.0), (0.45, 4.0)):
        Fe = diag_with(det, norm)
        for direction in (np.diag([1.0, 1.0]), np.diag([1.0, 0.0]), np.array([[0.0, 1.0], [1.0, 0.0]])):
            right = one_sided(Fe, direction, 1e-5)
            left = -one_sided(Fe, -direction, 1e-5)
            assert abs(right - left) <= 1e-6
            ga = cv.cutoff_pi(Fe + 1e-9 * direction, p, with_gradient=True)[1]
            gb = cv.cutoff_pi(Fe - 1e-9 * direction, p, with_gradient=True)[1]
            assert np.linalg.norm(ga - gb) <= 1e-6


def test_cutoff_plateau_covers_identity_neighbourhood():
    p = cv.CutoffParams(lam=0.5)
    _, g = cv.cutoff_pi(np.eye(2), p, with_gradient=True)
    assert not np.any(g)


# --- presets and flux maps -------------------------------------------------

def test_conductivity_and_flux():
    assert cv.conductivity(MAT, np.zeros(2), np.eye(2), 1.0) == MAT.kappa.kappa0
    assert cv.boundary_flux(MAT, 0.0, np.zeros(2), 3.0) == 0.0
    m = MAT.with_overrides(h=cv.NewtonCooling(k=0.2, theta_ext=1.0))
    th = np.array([0.5, 1.0, 2.0])
    np.testing.assert_array_equal(np.sign(cv.boundary_flux(m, 0.0, np.zeros((3, 2)), th)), np.sign(1.0 - th))


def test_melting_ramp():
    ramp = cv.MeltingRamp(M0=1.0, theta_melt=2.0, M_floor=0.05)
    np.testing.assert_allclose(ramp(np.array([0.0, 1.0, 2.0, 5.0])), [1.05, 0.55, 0.05, 0.05])


def test_validation_and_lookup():
    with pytest.raises(ValidationError):
        MAT.with_overrides(alpha=2.5).validate()
    with pytest.raises(ValidationError):
        MAT.with_overrides(c=0.0).validate()
    MAT.with_overrides(alpha=2.0).validate()
    with pytest.raises(UnknownName):
        cv.get_material("nope")
    text = cv.describe_material("neo_hookean_default")
    for key in ("K_E", "G_E", "H_E", "c =", "c1", "alpha", "M:"):
        assert key in text
    assert cv.DissipationParams(p=2.0).validate(d=2)
    assert cv.DissipationParams().validate(d=2) == []

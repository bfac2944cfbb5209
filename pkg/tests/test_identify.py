import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from freesim import geometry as geo
from freesim.dynamics import Loads, static_equilibrium
from freesim.errors import (DegenerateData, DomainError, IncompressibilityViolated,
                            InsufficientPeaks, LengthMismatch, NonDecaying,
                            ZeroDisplacement)
from freesim.geometry import ElastomerParams, Geometry
from freesim.identify import (OgdenParams, VibrationTrace, averaged_stiffness,
                              backout_stiffness, find_peaks, fit_stiffness,
                              fit_stiffness_groups, log_decrement_damping,
                              ogden_energy, rmsd_displacement, rmsd_force_moment,
                              thin_wall_expansion)
from freesim.units import PA_PER_PSI


def test_fit_exact_data():
    assert fit_stiffness([(0.01, 6.0), (0.02, 12.0)]) == pytest.approx(600.0, rel=1e-15)
    assert fit_stiffness([(1.0, 0.018)]) == pytest.approx(0.018)


@settings(max_examples=100, deadline=None)
@given(k=st.floats(1e-3, 1e6), xs=st.lists(st.floats(-1, 1), min_size=2, max_size=20))
def test_fit_exact_for_any_slope(k, xs):
    if sum(x * x for x in xs) < 1e-6:
        return
    assert fit_stiffness([(x, k * x) for x in xs]) == pytest.approx(k, rel=1e-12)


def test_fit_noisy_within_standard_error():
    rng = np.random.default_rng(3)
    x = np.linspace(0.001, 0.02, 40)
    F = 600.0 * x + rng.normal(0, 0.05, x.size)
    k = fit_stiffness(zip(x, F))
    # through-origin OLS: standard error sigma / sqrt(sum x^2)
    resid = F - k * x
    se = math.sqrt(np.sum(resid ** 2) / (x.size - 1) / np.sum(x * x))
    assert abs(k - 600.0) < 3 * se
    slope, icpt = fit_stiffness(zip(x, F), intercept=True)
    ref = np.polyfit(x, F, 1)
    assert slope == pytest.approx(ref[0], rel=1e-10)
    assert icpt == pytest.approx(ref[1], abs=1e-10)


def test_fit_degenerate():
    with pytest.raises(DegenerateData):
        fit_stiffness([(0.0, 1.0), (0.0, 2.0)])


def test_group_fit_modes():
    a = [(0.010, 6.0), (0.020, 12.0)]
    b = [(0.012, 6.0), (0.024, 12.0)]
    avg_first = fit_stiffness_groups([a, b])
    assert avg_first == pytest.approx(12.0 / 0.022, rel=1e-12)
    avg_fits = fit_stiffness_groups([a, b], mode="average_fits")
    assert avg_fits == pytest.approx((600.0 + 500.0) / 2)
    with pytest.raises(LengthMismatch):
        fit_stiffness_groups([a, [(0.01, 6.0)]])


BACKOUT_ANGLES = [20, 30, 40, 45, 65, 70, -40]


@pytest.mark.parametrize("angle", BACKOUT_ANGLES)
@pytest.mark.parametrize("P_psi", [1, 4, 7, 10])
def test_backout_inverts_equilibrium(angle, P_psi):
    g = Geometry.from_degrees(angle, 0.11, 0.007)
    # stiff enough in torsion that shallow windings still have a rest state at 10 psi
    elas = ElastomerParams(10110.0, 5.0, 0.0, 0.0)
    loads = Loads(0.2746)
    P = P_psi * PA_PER_PSI
    s, phi = static_equilibrium(g, elas, loads, P)
    k_e, k_t = backout_stiffness(g, loads, P, s, phi)
    assert k_e == pytest.approx(10110.0, rel=1e-3)
    assert k_t == pytest.approx(5.0, rel=1e-3)


def test_backout_unpressurized():
    g = Geometry.from_degrees(40, 0.11, 0.007)
    k_e, k_t = backout_stiffness(g, Loads(3.0, 0.02), 0.0, 0.005, 0.1)
    assert k_e == pytest.approx(600.0) and k_t == pytest.approx(0.2)


def test_backout_rejects_zero_displacement():
    g = Geometry.from_degrees(40, 0.11, 0.007)
    with pytest.raises(ZeroDisplacement):
        backout_stiffness(g, Loads(), 1000.0, 0.001, 0.0)
    with pytest.raises(ZeroDisplacement):
        backout_stiffness(g, Loads(), 1000.0, 0.0, 0.1)


def test_backout_refuses_critical_band():
    crit = geo.critical_winding_angle()
    g = Geometry(crit + math.radians(0.5), 0.11, 0.007)
    with pytest.raises(DomainError):
        backout_stiffness(g, Loads(), 1000.0, 1e-6, 0.1)


def test_averaged_stiffness():
    assert averaged_stiffness([(1.0, 5.0, 0.1)]) == (5.0, 0.1)
    assert averaged_stiffness([(1, 10.0, 1.0), (2, 12.0, 3.0), (3, 8.0, -1.0)]) == \
        pytest.approx((10.0, 1.0))
    rows = [(p, 100 + 7 * p, 0.01 * p) for p in range(1, 6)]
    ke, kt = averaged_stiffness(rows)
    assert ke == pytest.approx(sum(r[1] for r in rows) / 5, rel=1e-15)
    assert kt == pytest.approx(sum(r[2] for r in rows) / 5, rel=1e-15)
    with pytest.raises(DegenerateData):
        averaged_stiffness([])


def decay(zeta, wn, t_end=None, n=40001, amp=1.0):
    wd = wn * math.sqrt(1 - zeta * zeta)
    t_end = t_end or 12 * 2 * math.pi / wd
    t = np.linspace(0, t_end, n)
    return t, amp * np.exp(-zeta * wn * t) * np.cos(wd * t)


def test_log_decrement_reference_case():
    t, x = decay(0.05, 20.0)
    est = log_decrement_damping(VibrationTrace(t, x), 0.028)
    assert est.zeta == pytest.approx(0.05, rel=1e-2)
    assert est.omega_n == pytest.approx(20.0, rel=1e-2)


@pytest.mark.parametrize("zeta", [0.01, 0.03, 0.1, 0.2, 0.3])
def test_log_decrement_range(zeta):
    # enough cycles for three positive peaks even at heavy damping
    t, x = decay(zeta, 35.0, t_end=0.6 if zeta >= 0.2 else None)
    est = log_decrement_damping(VibrationTrace(t, x, "torsional"), 1e-6)
    assert est.zeta == pytest.approx(zeta, rel=1e-2)
    assert est.omega_n == pytest.approx(35.0, rel=1e-2)


def test_undamped_cosine_gives_zero_damping():
    t = np.linspace(0, 2, 20001)
    est = log_decrement_damping(VibrationTrace(t, np.cos(30 * t)), 0.028)
    assert est.delta == pytest.approx(0.0, abs=1e-9)
    assert est.c == pytest.approx(0.0, abs=1e-9)


def test_axial_damping_constant():
    m = 0.028
    zeta, wn = 0.04, 767.0
    # choose zeta*wn so that 2 m zeta wn equals 0.34 N s/m
    zeta = 0.34 / (2 * m * wn)
    t, x = decay(zeta, wn, n=200001)
    est = log_decrement_damping(VibrationTrace(t, x), m)
    assert est.c == pytest.approx(0.34, rel=1e-2)


def test_log_decrement_errors():
    t = np.linspace(0, 1, 1001)
    with pytest.raises(InsufficientPeaks):
        log_decrement_damping(VibrationTrace(t, np.cos(3 * t)), 1.0)
    tt = np.linspace(0, 3, 30001)
    with pytest.raises(NonDecaying):
        log_decrement_damping(VibrationTrace(tt, np.exp(0.5 * tt) * np.cos(20 * tt)), 1.0)


def test_peak_refinement():
    t = np.linspace(0, 1, 11)
    x = -(t - 0.43) ** 2 + 1
    tp, xp = find_peaks(t, x)
    assert tp[0] == pytest.approx(0.43, abs=1e-12) and xp[0] == pytest.approx(1.0)


def test_rmsd_displacement():
    assert rmsd_displacement([1, 2, 3], [1, 2, 3], 3.0) == 0.0
    assert rmsd_displacement([10.0], [9.0], 10.0) == pytest.approx(0.1)
    rng = np.random.default_rng(11)
    a, b = rng.normal(size=50), rng.normal(size=50)
    brute = math.sqrt(sum(((x - y) / 2.5) ** 2 for x, y in zip(a, b)) / 50)
    assert abs(rmsd_displacement(a, b, 2.5) - brute) < 1e-14
    with pytest.raises(LengthMismatch):
        rmsd_displacement([1, 2], [1], 1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=30),
       st.randoms())
def test_rmsd_properties(pairs, rnd):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    r = rmsd_displacement(a, b, 7.0)
    assert r >= 0
    assert (r == 0) == bool(np.all(a == b))
    idx = list(range(len(a)))
    rnd.shuffle(idx)
    assert rmsd_displacement(a[idx], b[idx], 7.0) == pytest.approx(r, rel=1e-12, abs=1e-300)
    rj = rmsd_force_moment(a, b, b, a, 3.0, 5.0)
    assert rmsd_force_moment(a[idx], b[idx], b[idx], a[idx], 3.0, 5.0) == \
        pytest.approx(rj, rel=1e-12, abs=1e-300)


def test_rmsd_force_moment():
    F = np.array([1.0, 2.0, 3.0])
    assert rmsd_force_moment(F, F, F, F, 1.0, 1.0) == 0.0
    G = F + 0.3
    assert rmsd_force_moment(F, G, F, F, 2.0, 1.0) == pytest.approx(rmsd_displacement(F, G, 2.0))
    n = 100
    F_exp = np.linspace(0, 43.9, n)
    M_exp = np.linspace(0, 0.146, n)
    sgn = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    # 4% of range on each channel in quadrature gives 0.04 overall
    c = 0.04 / math.sqrt(2)
    err = rmsd_force_moment(F_exp, F_exp + sgn * c * 43.9, M_exp, M_exp + sgn * c * 0.146,
                            43.9, 0.146)
    assert err == pytest.approx(0.04, rel=1e-12)
    with pytest.raises(LengthMismatch):
        rmsd_force_moment(F, F, F[:2], F[:2], 1.0, 1.0)


def test_thin_wall_expansion():
    p = 3.5 * PA_PER_PSI
    # 30-digit evaluation with the same inputs
    assert thin_wall_expansion(p, 4.76e-3, 8e-4, 1.18e6, 0.5) == \
        pytest.approx(4.3440036682563559e-4, rel=1e-12)
    assert thin_wall_expansion(0.0, 4.76e-3, 8e-4, 1.18e6, 0.5) == 0.0
    assert thin_wall_expansion(p, 4.76e-3, 1.6e-3, 1.18e6, 0.5) == \
        pytest.approx(thin_wall_expansion(p, 4.76e-3, 8e-4, 1.18e6, 0.5) / 2, rel=1e-15)
    with pytest.raises(ValueError):
        thin_wall_expansion(p, 1e-3, 0.0, 1e6, 0.5)


def test_ogden_identity_and_neo_hookean():
    prm = OgdenParams(0.65e6, 1.2)
    assert ogden_energy(1.0, 1.0, 1.0, prm) == 0.0
    nh = OgdenParams(0.4e6, 2.0)
    for lam in (0.7, 1.3, 2.1):
        l2 = lam ** -0.5
        want = 0.4e6 * (lam ** 2 + 2 * l2 ** 2 - 3)
        assert abs(ogden_energy(lam, l2, l2, nh) - want) <= 1e-12 * abs(want)


def test_ogden_uniaxial_high_precision():
    mp.dps = 40
    mu, a, lam = mpf("0.65e6"), mpf("1.2"), mpf("1.5")
    want = 2 * mu / a * (lam ** a + 2 * lam ** (-a / 2) - 3)
    got = ogden_energy(1.5, 1.5 ** -0.5, 1.5 ** -0.5, OgdenParams(0.65e6, 1.2))
    assert got == pytest.approx(float(want), rel=1e-13)
    assert got == pytest.approx(211047.43850967763, rel=1e-13)


def test_ogden_incompressibility_enforced():
    with pytest.raises(IncompressibilityViolated):
        ogden_energy(1.1, 1.0, 1.0, OgdenParams(1e6, 1.2))
    with pytest.raises(DomainError):
        ogden_energy(-1.0, -1.0, 1.0, OgdenParams(1e6, 1.2))
    with pytest.raises(ValueError):
        OgdenParams(0.0, 1.0)


def test_ogden_compressible_branch():
    prm = OgdenParams(1e6, 1.5, incompressible=False, d=1e-6)
    # pure dilatation has no deviatoric energy
    assert ogden_energy(1.1, 1.1, 1.1, prm) == pytest.approx((1.331 - 1) ** 2 / 1e-6, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(l1=st.floats(1.0, 3.0), l2=st.floats(1.0, 3.0), bump=st.floats(1e-3, 0.5),
       alpha=st.floats(0.2, 6.0))
def test_ogden_monotone_above_one(l1, l2, bump, alpha):
    prm = OgdenParams(1e5, alpha, incompressible=False, d=1.0)
    # monotonicity in each stretch is checked on the raw sum; the incompressible
    # form is that sum with l3 tied to 1/(l1 l2)
    base = 2 / alpha * (l1 ** alpha + l2 ** alpha + 1.2 ** alpha - 3)
    up = 2 / alpha * ((l1 + bump) ** alpha + l2 ** alpha + 1.2 ** alpha - 3)
    assert up > base
    lam = l1
    inc = OgdenParams(1e5, alpha)
    assert ogden_energy(lam, lam ** -0.5, lam ** -0.5, inc) >= 0
    del prm

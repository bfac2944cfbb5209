import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freesim.control import ConstantReference, PidGains
from freesim.dynamics import BodyParams, Loads, State, rhs
from freesim.errors import DegenerateInput
from freesim.geometry import ElastomerParams, Geometry
from freesim.linear import (LinearizedPlant, RationalTF, classify_stability,
                            default_gain_grid, linearized_constants, linearized_rhs,
                            open_loop_tf, poly_eval, poly_roots, root_locus,
                            simulate_linear_closed_loop)

G40 = Geometry.from_degrees(40, 0.11, 0.007)
BODY = BodyParams.thin_ring(0.028, 0.007)
ELAS = ElastomerParams(10110.0, 0.18557, 5.0, 0.005)


def residual_ok(coeffs, z, tol=1e-8):
    scale = max(abs(c) for c in coeffs) * max(1.0, abs(z)) ** (len(coeffs) - 1)
    return abs(poly_eval(list(coeffs), z)) <= tol * scale


def test_linearized_constants():
    c1, c2 = linearized_constants(G40)
    # 30-digit evaluation
    assert c1 == pytest.approx(-2.8333116001029444e-4, rel=1e-12)
    assert c2 == pytest.approx(2.5683869713288844e-6, rel=1e-12)
    c1c, _ = linearized_constants(Geometry(math.atan(math.sqrt(2)), 0.11, 0.007))
    assert abs(c1c) < 1e-18
    _, c2n = linearized_constants(Geometry.from_degrees(-40, 0.11, 0.007))
    assert c2n == -c2


def test_plant_sign_rule():
    p = LinearizedPlant.from_parts(G40, BODY, ELAS)
    assert p.c2 > 0 and p.loop_c2 == -p.c2
    pn = LinearizedPlant.from_parts(Geometry.from_degrees(-40, 0.11, 0.007), BODY, ELAS)
    assert pn.loop_c2 == pn.c2


def test_linearized_rhs_zero():
    p = LinearizedPlant.from_parts(G40, BODY, ELAS)
    np.testing.assert_array_equal(linearized_rhs(np.zeros(5), 0.0, p, Loads()), np.zeros(5))


def test_linearization_error_is_second_order():
    p = LinearizedPlant.from_parts(G40, BODY, ELAS)
    # the expansion point is s = phi = P = 0, so pressure shrinks with eps;
    # pressure times displacement products are then second order
    rng = np.random.default_rng(7)
    for _ in range(5):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        ratios = []
        for eps in (1e-3, 5e-4, 2.5e-4):
            x = State(eps * d[0] * 0.01, eps * d[1])
            P = abs(eps * d[2]) * 1e5
            diff = rhs(x, P, G40, BODY, ELAS, Loads()) - linearized_rhs(x, P, p, Loads())
            ratios.append(np.linalg.norm(diff[2:4]) / eps ** 2)
        # mismatch / eps^2 settles to a constant as eps shrinks
        assert ratios[2] == pytest.approx(ratios[1], rel=0.05)
        assert ratios[1] == pytest.approx(ratios[0], rel=0.1)


def test_open_loop_tf_shapes():
    p = LinearizedPlant.from_parts(G40, BODY, ELAS)
    gains = PidGains(32000.0, 1.2e6, 0.0)
    raw = open_loop_tf("kp", gains, p, direct_law=True)
    assert raw.den[3] == pytest.approx(-3.0820643655946613, rel=1e-12)
    assert raw.num == (-p.c2, 0.0)
    ki = open_loop_tf("ki", gains, p)
    assert ki.den[-1] == 0.0 and len(ki.num) == 1
    kd = open_loop_tf("kd", gains, p)
    assert len(kd.num) == 3 and len(kd.den) == 4
    with pytest.raises(ValueError):
        open_loop_tf("kx", gains, p)


def test_roots_of_simple_polynomials():
    r = np.sort_complex(poly_roots([1, 6, 11, 6]))
    np.testing.assert_allclose(r, [-3, -2, -1], atol=1e-12)
    r = np.sort_complex(poly_roots([1, 0, 1]))
    np.testing.assert_allclose(r, [-1j, 1j], atol=1e-14)
    np.testing.assert_array_equal(poly_roots([2, 0, 0]), [0j, 0j])
    with pytest.raises(DegenerateInput):
        poly_roots([0, 0, 0])


def _match(found, planted):
    found = list(found)
    worst = 0.0
    for z in planted:
        j = int(np.argmin([abs(f - z) for f in found]))
        worst = max(worst, abs(found.pop(j) - z))
    return worst


@pytest.mark.parametrize("seed", range(12))
def test_planted_roots_recovered(seed):
    rng = np.random.default_rng(seed)
    deg = int(rng.integers(2, 9))
    n_pairs = int(rng.integers(0, deg // 2 + 1))
    pairs = [complex(rng.uniform(-5, 5), rng.uniform(0.3, 5)) for _ in range(n_pairs)]
    planted = pairs + [z.conjugate() for z in pairs]
    planted += list(rng.uniform(-5, 5, deg - 2 * n_pairs))
    # keep roots separated so the problem is well conditioned
    if min(abs(a - b) for i, a in enumerate(planted) for b in planted[i + 1:]) < 0.2:
        return
    coeffs = np.real(np.poly(planted))
    found = poly_roots(coeffs)
    assert len(found) == deg
    assert _match(found, planted) < 1e-8


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=9).filter(lambda c: abs(c[0]) > 1e-3))
def test_roots_conjugate_closed_and_small_residual(coeffs):
    z = poly_roots(coeffs)
    assert len(z) == len(coeffs) - 1
    for root in z:
        assert residual_ok(coeffs, root, 1e-8)
        if root.imag != 0:
            assert np.min(np.abs(z - root.conjugate())) <= 1e-10 * max(1, abs(root))


def test_locus_residuals_and_start():
    tf = RationalTF((1.0,), (1.0, 6.0, 11.0, 6.0))
    K = np.concatenate([[0.0], np.logspace(-2, 3, 120)])
    loc = root_locus(tf, K)
    np.testing.assert_allclose(np.sort_complex(loc.poles[0]), [-3, -2, -1], atol=1e-12)
    for k, row in zip(K, loc.poles):
        for z in row:
            assert residual_ok([1, 6, 11, 6 + k], z)


def test_branch_continuity_improves_with_refinement():
    tf = RationalTF((1.0, 2.0), (1.0, 3.0, 5.0, 1.0))

    def total(n):
        loc = root_locus(tf, np.linspace(0, 50, n))
        return float(np.sum(np.abs(np.diff(loc.poles, axis=0))))

    coarse, fine = total(30), total(600)
    # path length converges: refinement never introduces jumps between branches
    assert fine <= coarse * 1.05
    loc = root_locus(tf, np.linspace(0, 50, 600))
    assert np.max(np.abs(np.diff(loc.poles, axis=0))) < 0.5


def test_grid_validation():
    tf = RationalTF((1.0,), (1.0, 1.0))
    with pytest.raises(ValueError):
        root_locus(tf, [1.0, 0.5])
    with pytest.raises(ValueError):
        default_gain_grid(0.0)
    g = default_gain_grid(32000.0)
    assert g.size == 200 and g[0] == pytest.approx(320) and g[-1] == pytest.approx(3.2e6)


def test_stability_classes():
    assert classify_stability([-1, -2]).verdict == "stable"
    assert classify_stability([0.5 + 1j, 0.5 - 1j, -3]).verdict == "unstable"
    assert classify_stability([0, -1]).verdict == "marginal"
    rep = classify_stability([-1 + 1j, -1 - 1j, -10])
    assert rep.underdamped and rep.damping_ratio == pytest.approx(1 / math.sqrt(2))
    assert rep.dominant_pole.real == -1


def test_kp_gain_choice_is_stable_and_not_oscillatory():
    p = LinearizedPlant.from_parts(G40, BODY, ELAS)
    tf = open_loop_tf("kp", PidGains(32000.0, 1.2e6), p)
    den = np.array(tf.den)
    poles = poly_roots(den + 32000.0 * np.concatenate([[0, 0], tf.num]))
    rep = classify_stability(poles)
    assert rep.verdict == "stable" and not rep.underdamped


def test_pole_matches_time_domain_decay():
    # no pressure clamp can engage: positive-only demand on a small step
    gneg = Geometry.from_degrees(-40, 0.11, 0.007)
    p = LinearizedPlant.from_parts(gneg, BODY, ELAS)
    gains = PidGains(32000.0, 1.2e6, 0.0, p_max=1e12)
    tf = open_loop_tf("kp", gains, p)
    den = np.array(tf.den) + gains.k_p * np.concatenate([[0, 0], tf.num])
    dom = classify_stability(poly_roots(den)).dominant_pole
    target = 0.05
    te = np.linspace(0, 0.6, 601)
    ts = simulate_linear_closed_loop(p, Loads(), gains, ConstantReference(target), 0.6,
                                     tol=(1e-10, 1e-12), t_eval=te)
    err = np.abs(ts.phi - target)
    mask = (te > 0.25) & (err > 1e-9)
    slope = np.polyfit(te[mask], np.log(err[mask]), 1)[0]
    assert slope == pytest.approx(dom.real, rel=0.05)

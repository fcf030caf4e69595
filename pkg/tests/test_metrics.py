import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from subharm.decomposition import SlowlyVarying
from subharm.measure import Measure, MeasureError
from subharm.metrics import (
    Signed,
    circle_mean,
    counting_function,
    error_report,
    exceptional_set_density,
    integrate_abs_disk,
    integrated_counting,
    jensen_residual,
    l1_disk_error,
    log_disk_bound,
    monte_carlo_l1,
    sup_on_circle,
)
from subharm.potential import ZeroSet


def random_measure(seed, n=20, spread=3.0):
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(-1, spread, n))
    return Measure(r * np.exp(2j * np.pi * rng.random(n)), rng.uniform(0.1, 2.0, n))


# ---------------------------------------------------------------------------
# counting functions


def test_counting_closed_disk():
    m = Measure([2, 4, 8], [0.5, 0.5, 0.5])
    assert counting_function(m, [1.9, 2.0, 7.9, 8.0]).tolist() == [0.0, 0.5, 1.0, 1.5]


def test_counting_zero_set_uses_multiplicity():
    assert counting_function(ZeroSet([3, 3j], [2, 5]), 3.0) == 7.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_counting_against_brute_force(seed):
    m = random_measure(seed)
    r = np.exp(np.random.default_rng(seed).uniform(-2, 4, 30))
    brute = [m.masses[np.abs(m.positions) <= x].sum() for x in r]
    assert np.allclose(counting_function(m, r), brute, rtol=0, atol=1e-12)


def test_integrated_counting_against_quadrature():
    m = random_measure(5, n=8)
    breaks = np.sort(m.moduli)
    for r in (0.5, 3.0, 25.0):
        pts = [b for b in breaks if b < r]
        ref = quad(lambda t: counting_function(m, t) / t, min(0.1, r / 2), r, points=pts or None,
                   limit=200, epsabs=1e-12)[0]
        assert integrated_counting(m, r) == pytest.approx(ref, abs=1e-8)


def test_integrated_counting_rejects_origin():
    with pytest.raises(MeasureError):
        integrated_counting(Measure([0j], [1.0]), 2.0)


# ---------------------------------------------------------------------------
# circle means and Jensen


@pytest.mark.parametrize("a, r", [(2.0, 1.0), (2.0, 5.0), (3j, 10.0), (-0.5, 0.4)])
def test_circle_mean_single_atom(a, r):
    expected = max(0.0, math.log(r / abs(a)))
    assert circle_mean(Measure([a], [1.0]), r) == pytest.approx(expected, abs=1e-12)


def test_circle_mean_against_quad():
    m = random_measure(2, n=5)
    r = 4.321
    ref = quad(lambda t: float(Signed.difference(m)(r * np.exp(1j * t))), 0, 2 * np.pi,
               limit=400, epsabs=1e-12)[0] / (2 * np.pi)
    assert circle_mean(m, r) == pytest.approx(ref, abs=1e-8)


def test_circle_mean_warns_near_atom():
    with pytest.warns(RuntimeWarning, match="passes within"):
        circle_mean(Measure([2.0], [1.0]), 2.0 * (1 + 1e-9))


@pytest.mark.parametrize("seed", range(10))
def test_jensen_residual_random(seed):
    m = random_measure(seed)
    mod = np.sort(m.moduli)
    # a radius away from every atom modulus
    gaps = np.diff(mod)
    j = int(np.argmax(gaps))
    r = math.sqrt(mod[j] * mod[j + 1])
    assert abs(jensen_residual(m, r)) < 1e-9


def test_sup_on_circle_antipode():
    # |1 - 6 e^{it} / 2| peaks at t = pi with value 4
    assert sup_on_circle(Measure([2.0], [1.0]), 6.0) == pytest.approx(math.log(4), abs=1e-12)


def test_empty_measure_means():
    assert circle_mean(Measure(), 3.0) == 0.0
    assert sup_on_circle(Measure(), 3.0) == 0.0
    assert counting_function(Measure(), 3.0) == 0.0


def test_jensen_single_atom_and_inner_circle():
    m = Measure([2.0], [1.0])
    assert abs(jensen_residual(m, 4.0)) < 1e-10
    assert integrated_counting(m, 4.0) == pytest.approx(math.log(2))
    assert jensen_residual(random_measure(1), 0.05) == pytest.approx(0.0, abs=1e-12)


def test_sup_on_circle_single_atom():
    # log|1 - z| on |z| = 3 peaks at z = -3
    assert sup_on_circle(Measure([1.0], [1.0]), 3.0, nodes=64) == pytest.approx(math.log(4), abs=1e-9)


def test_sup_on_circle_against_optimizer():
    m = random_measure(8, n=6)
    g = Signed.difference(m)
    r = 7.0
    t = np.linspace(0, 2 * np.pi, 20001)
    j = int(np.argmax(g(r * np.exp(1j * t))))
    res = minimize_scalar(lambda s: -float(g(r * np.exp(1j * s))), bracket=(t[j - 1], t[j], t[j + 1]),
                          tol=1e-12)
    assert sup_on_circle(m, r) == pytest.approx(-res.fun, abs=1e-8)


def test_sup_on_circle_monotone_for_positive_measure():
    m = random_measure(4)
    vals = [sup_on_circle(m, r) for r in np.geomspace(0.5, 200, 15)]
    assert np.all(np.diff(vals) >= -1e-9)


# ---------------------------------------------------------------------------
# L1 disk error


def test_log_disk_bound_against_quad():
    for rho in (0.3, 1.0, 2.5):
        ref = 2 * np.pi * quad(lambda s: s * abs(math.log(s)), 0, rho, points=[1.0] if rho > 1 else None)[0]
        assert log_disk_bound(rho) == pytest.approx(ref, rel=1e-10)


def test_l1_is_zero_for_exact_zero_set():
    m = Measure([2, 3j], [1.0, 2.0])
    f = ZeroSet([2, 3j], [1, 2])
    value, bound = l1_disk_error(m, f, 5.0)
    assert value == 0.0 and bound < 1e-9


def test_l1_single_atom_against_monte_carlo():
    m = Measure([2.0], [0.5])
    value, bound = l1_disk_error(m, None, 4.0)
    mc, se = monte_carlo_l1(m, None, 4.0, samples=400_000, seed=1)
    assert bound <= 1e-3 * value
    assert abs(value - mc) <= max(0.01 * value, 4 * se)


def test_l1_scaling():
    # log|1 - z/a| is invariant under (z, a) -> (2z, 2a), so I scales by 4
    a, _ = l1_disk_error(Measure([2.0], [0.5]), None, 4.0, rtol=1e-5)
    b, _ = l1_disk_error(Measure([4.0], [0.5]), None, 8.0, rtol=1e-5)
    assert b == pytest.approx(4 * a, rel=1e-4)


def test_integrate_constant():
    # |alpha log|z|| over the unit disk is pi/2 per unit alpha
    res = integrate_abs_disk(Signed(np.zeros(0, complex), np.zeros(0), 1.0), 1.0, rtol=1e-8)
    assert res.value == pytest.approx(np.pi / 2, rel=1e-7)


def test_l1_many_atoms_against_monte_carlo():
    m = random_measure(3, n=10, spread=2.0)
    f = ZeroSet(m.positions[:3], np.ones(3, dtype=np.int64))
    value, bound = l1_disk_error(m, f, 6.0)
    mc, se = monte_carlo_l1(m, f, 6.0, samples=400_000, seed=2)
    assert abs(value - mc) <= max(0.01 * value, 3 * bound, 4 * se)


def test_l1_rejects_bad_radius():
    with pytest.raises(MeasureError):
        l1_disk_error(Measure([2.0], [1.0]), None, 0.0)


def test_error_report_dyadic_growth(tmp_path):
    m = Measure(2.0 ** np.arange(1, 9), np.full(8, 0.5))
    rep = error_report(m, None, SlowlyVarying.log_e(), [4.0, 8.0, 16.0, 32.0])
    assert np.all(np.diff(rep.I) > 0)
    p = tmp_path / "e.csv"
    rep.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "R,I,norm,ratio,error_bound,alpha" and len(lines) == 5


def test_exceptional_set_empty_for_exact_zero_set():
    m = Measure([2, 5j], [1.0, 1.0])
    f = ZeroSet([2, 5j], [1, 1])
    p, hw = exceptional_set_density(m, f, 1.0, SlowlyVarying.log_e(), 10.0, samples=10_000)
    assert p == 0.0 and hw < 0.02


def test_exceptional_set_full_when_threshold_tiny():
    m = Measure([2, 5j], [1.0, 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p, _ = exceptional_set_density(m, None, 1e-9, SlowlyVarying.log_e(), 10.0, samples=10_000)
    assert p > 0.99


def test_exceptional_set_on_pipeline_output():
    from subharm.counterexample import UPhiSpec, build_u_phi
    from subharm.potential import approximate

    phi, psi = SlowlyVarying.exp_sqrt_log(1.0), SlowlyVarying.exp_sqrt_log(2.0)
    u = build_u_phi(UPhiSpec(phi, max_radius=2.0 ** 16))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = approximate(u, psi, check_annulus_mass=False)
    p, hw = exceptional_set_density(u, a.zeros, 10.0, psi, 2.0 ** 10, samples=50_000)
    assert p + hw < 0.1

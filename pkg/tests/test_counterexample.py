import math
import warnings

import numpy as np
import pytest

from subharm.counterexample import (
    UPhiSpec,
    best_rounding,
    build_slowly_varying_from_sigma,
    build_u_phi,
    check_annulus_condition,
    counting_gap_scan,
    dyadic_probes,
    n_gap_growth,
    reduce_half_alpha,
    sharpness_ratio,
)
from subharm.decomposition import SlowlyVarying
from subharm.measure import Measure, MeasureError
from subharm.metrics import integrated_counting
from subharm.potential import ZeroSet


def test_constant_phi_radii():
    m = build_u_phi(UPhiSpec(SlowlyVarying.constant(2), count=4))
    assert m.moduli.tolist() == [2, 4, 8, 16] and m.masses.tolist() == [0.5] * 4


def test_log_e_radii():
    r = UPhiSpec(SlowlyVarying.log_e(), count=3).radii
    r1 = 2 * (1 + math.log(2))
    assert r.tolist() == pytest.approx([2, r1, r1 * (1 + math.log(r1))])


def test_max_radius_truncation():
    r = UPhiSpec(SlowlyVarying.constant(2), max_radius=100).radii
    assert r.tolist() == [2, 4, 8, 16, 32, 64]


def test_spec_needs_bound():
    with pytest.raises(MeasureError):
        UPhiSpec(SlowlyVarying.constant(2)).radii
    with pytest.raises(MeasureError):
        build_u_phi(UPhiSpec(SlowlyVarying.constant(2), count=0))


def test_sigma_inverse_log_gives_log_e():
    psi = build_slowly_varying_from_sigma(lambda t: 1 / np.log(np.e * t))
    r = np.array([1.0, 10.0, 1e6])
    assert np.allclose(psi(r), np.log(np.e * r), rtol=1e-8)


def test_sigma_non_decaying_warns():
    with pytest.warns(RuntimeWarning, match="tend to zero"):
        build_slowly_varying_from_sigma(lambda t: np.full_like(t, 0.5))


def test_sigma_nonpositive_rejected():
    with pytest.raises(MeasureError):
        build_slowly_varying_from_sigma(lambda t: np.zeros_like(t))


def test_annulus_condition_with_phi_squared():
    # with psi = phi^2 every (R, R psi(R)] holds a half mass; just above r_k it holds only r_{k+1}
    phi = SlowlyVarying.exp_sqrt_log(1.0)
    psi = SlowlyVarying.exp_sqrt_log(2.0)
    spec = UPhiSpec(phi, max_radius=2.0 ** 40)
    m = build_u_phi(spec)
    r = spec.radii
    worst, _ = check_annulus_condition(m, psi, r[0], r[-3])
    assert worst == pytest.approx(0.5)
    # phi alone leaves annuli with a single half mass
    worst_phi, _ = check_annulus_condition(m, phi, r[0], r[-3])
    assert worst_phi <= 0.5 + 1e-12


def test_best_rounding_pattern():
    spec = UPhiSpec(SlowlyVarying.constant(3), count=8)
    u, f = build_u_phi(spec), best_rounding(spec)
    assert f.count == 4 and np.allclose(np.abs(f.positions), spec.radii[1::2])
    rep = counting_gap_scan(u, f, 0.0, np.geomspace(1, 1e4, 50))
    assert rep.pattern == "{0,1/2}" and rep.violations == []
    assert set(np.round(rep.gap, 12)) <= {0.0, 0.5}


def test_alpha_pattern():
    spec = UPhiSpec(SlowlyVarying.constant(3), count=8)
    rep = counting_gap_scan(build_u_phi(spec), best_rounding(spec), 0.3, [1.0, 10.0, 100.0])
    assert rep.pattern == "{-alpha,1/2-alpha}" and rep.violations == []


def test_bad_zero_set_is_other_pattern(tmp_path):
    spec = UPhiSpec(SlowlyVarying.constant(3), count=6)
    u = build_u_phi(spec)
    f = best_rounding(UPhiSpec(SlowlyVarying.constant(3), count=2))
    rep = counting_gap_scan(u, f, 0.0, [1.0])
    assert rep.pattern == "other" and rep.violations
    p = tmp_path / "gap.csv"
    rep.to_csv(p)
    assert p.read_text().splitlines()[0] == "r,n_u,n_f,N_u,N_f,gap,violation"


def test_alpha_out_of_range():
    spec = UPhiSpec(SlowlyVarying.constant(3), count=2)
    with pytest.raises(MeasureError):
        counting_gap_scan(build_u_phi(spec), best_rounding(spec), 1.0, [1.0])


def test_n_gap_growth_tracks_log_psi():
    # between r_k and r_{k+1} the gap n(u) - n(f) is 1/2, so the integrated gap gains log(phi)/2
    psi = SlowlyVarying.log_e()
    spec = UPhiSpec(psi, max_radius=1e30)
    u, f = build_u_phi(spec), best_rounding(spec)
    probes = dyadic_probes(spec.radii)
    out = n_gap_growth(u, f, 0.0, psi, probes)
    for p in out:
        direct = abs(integrated_counting(u, p.T_star) - integrated_counting(f, p.T_star))
        assert p.n_gap == pytest.approx(direct, abs=1e-9)
        assert p.exceeds
        assert p.threshold == pytest.approx(0.4 * math.log(1 + math.log(p.t_star)))


def test_dyadic_probes_pairs():
    assert dyadic_probes([1, 2, 3, 4, 5]) == [(1.0, 2.0), (3.0, 4.0)]


def test_sharpness_ratio_band():
    psi = SlowlyVarying.log_e()
    spec = UPhiSpec(psi, max_radius=2.0 ** 12 * 1e3)
    u, f = build_u_phi(spec), best_rounding(spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = sharpness_ratio(u, f, 0.0, psi, [2.0 ** 4, 2.0 ** 6, 2.0 ** 8])
    ratio = np.array(rep.ratio)
    assert ratio.max() / ratio.min() <= 5
    assert rep.I[-1] / 2.0 ** 16 > rep.I[0] / 2.0 ** 8


def test_single_radius():
    m = build_u_phi(UPhiSpec(SlowlyVarying.constant(2), count=1))
    assert m.atoms == [((2 + 0j), 0.5)]


def test_empty_zero_set_violates_from_second_radius():
    spec = UPhiSpec(SlowlyVarying.constant(2), count=6)
    rep = counting_gap_scan(build_u_phi(spec), ZeroSet([], []), 0.0, [1.0])
    # n(r, u) passes 1/2 at the second radius
    assert rep.violations[0] == spec.radii[1]
    assert len(rep.violations) == 5


def test_exact_doubling_drifts():
    # a simple zero at every radius overshoots by 1/2 per radius
    spec = UPhiSpec(SlowlyVarying.constant(2), count=6)
    r = spec.radii
    f = ZeroSet(r.astype(complex), np.ones(r.size, dtype=np.int64))
    rep = counting_gap_scan(build_u_phi(spec), f, 0.0, [])
    at = {x: g for x, g in zip(rep.r, rep.gap)}
    assert [at[x] for x in r] == [-0.5 * (k + 1) for k in range(r.size)]
    assert rep.violations == r[1:].tolist()


def test_gap_values_are_exact_half_integers():
    spec = UPhiSpec(SlowlyVarying.log_e(), count=10)
    u = build_u_phi(spec)
    f = ZeroSet(spec.radii[[2, 3, 7]].astype(complex), np.array([1, 2, 1]))
    for alpha in (0.0, 0.3):
        rep = counting_gap_scan(u, f, alpha, np.geomspace(1, 1e12, 40))
        g = np.array(rep.gap) + alpha
        assert np.all(2 * g == np.round(2 * g))


def test_doubled_measure_has_zero_n_gap():
    spec = UPhiSpec(SlowlyVarying.log_e(), count=8)
    u = Measure(spec.radii.astype(complex), np.ones(8))
    f = ZeroSet(spec.radii.astype(complex), np.ones(8, dtype=np.int64))
    out = n_gap_growth(u, f, 0.0, SlowlyVarying.log_e(), dyadic_probes(spec.radii))
    assert all(p.n_gap == 0 for p in out)


def test_alpha_pattern_040():
    spec = UPhiSpec(SlowlyVarying.log_e(), count=12)
    rep = counting_gap_scan(build_u_phi(spec), best_rounding(spec), 0.4, [1.0])
    assert rep.pattern == "{-alpha,1/2-alpha}" and rep.violations == []


def test_reduce_half_alpha():
    spec = UPhiSpec(SlowlyVarying.constant(3), count=9)
    u = build_u_phi(spec)
    v, a = reduce_half_alpha(u, 0.8)
    assert a == pytest.approx(0.3) and len(v) == 8 and v.moduli.min() == spec.radii[1]
    assert reduce_half_alpha(u, 0.2) == (u, 0.2)
    # after dropping the first half mass, zeros at the third, fifth, ... radii round best
    f = ZeroSet(spec.radii[2::2].astype(complex), np.ones(4, dtype=np.int64))
    rep = counting_gap_scan(u, f, 0.8, [1.0], reduce_half=True)
    assert rep.pattern == "{-alpha,1/2-alpha}" and rep.alpha == pytest.approx(0.3)
    with pytest.raises(MeasureError):
        reduce_half_alpha(Measure([2.0], [1.0]), 0.6)

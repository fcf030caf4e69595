import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from subharm.decomposition import (
    SlowlyVarying,
    annular_split,
    check_slow_variation,
    annulus_mass_margin,
    heavy_tail_schedule,
    normalize_origin,
    verify_decomposition,
    verify_schedule,
    write_decomposition_csv,
)
from subharm.measure import Measure, MeasureError, canonicalize, total_mass
from subharm.potential import build_f2, extract_integer_atoms, log_potential


def dense_measure(seed, log_hi=(8, 16), step=1.14):
    """Random measure with mass above one in every annulus (R, R log(eR)]."""
    rng = np.random.default_rng(seed)
    r = [2.0]
    hi = math.exp(rng.uniform(*log_hi))
    while r[-1] < hi:
        r.append(r[-1] * rng.uniform(1.0, step))
    r = np.array(r)
    return Measure(r * np.exp(1j * rng.uniform(0, 2 * np.pi, r.size)), rng.uniform(0.4, 1.6, r.size))


# ---------------------------------------------------------------------------
# psi


def test_log_e_values():
    psi = SlowlyVarying.log_e()
    assert psi(1.0) == 1.0
    assert psi(math.e ** 2) == pytest.approx(3.0)
    assert psi.log(10.0) == pytest.approx(math.log(1 + math.log(10)))


def test_psi_from_sigma_matches_closed_form():
    # int_1^R dt / (t log(e t)) = log log(e R)
    psi = SlowlyVarying.from_sigma(lambda t: 1 / np.log(np.e * t))
    r = np.array([1.0, 1.7, 10.0, 1e3, 1e8, 1e15])
    assert np.allclose(psi(r), np.log(np.e * r), rtol=1e-8, atol=0)


def test_psi_from_sigma_against_quad():
    sigma = lambda t: 0.3 / (1 + np.log(t) ** 2) + 0.01  # noqa: E731
    psi = SlowlyVarying.from_sigma(sigma)
    for R in (3.0, 50.0, 1e4):
        ref = quad(lambda s: sigma(np.exp(s)), 0, math.log(R), epsabs=1e-13)[0]
        assert psi.log(R) == pytest.approx(ref, rel=1e-8)


def test_psi_from_sigma_rejects_nonpositive():
    psi = SlowlyVarying.from_sigma(lambda t: np.where(t > 5, -1.0, 1.0))
    with pytest.raises(MeasureError):
        psi(100.0)


def test_Psi_iterates():
    psi = SlowlyVarying.constant(3.0)
    assert psi.Psi(0, 2.0) == 2.0
    assert psi.Psi(2, 2.0) == 18.0
    x = SlowlyVarying.log_e().Psi1_inverse(50.0)
    assert x * (1 + math.log(x)) == pytest.approx(50.0)


def test_slow_variation_log_e():
    ratios = check_slow_variation(SlowlyVarying.log_e(), [1e1, 1e3, 1e6, 1e12])
    assert np.all(np.diff(ratios) < 0) and np.all(ratios > 1)
    # the 5% band is only reached at large radii for log(eR)
    assert ratios[-1] - 1 < 0.05 and ratios[0] - 1 > 0.05


def test_constant_psi_must_exceed_one():
    with pytest.raises(MeasureError):
        SlowlyVarying.constant(1.0)


# ---------------------------------------------------------------------------
# normalization


def test_normalize_identity_outside_unit_disk():
    m = Measure([3, 4j], [1.0, 2.0])
    out, corr = normalize_origin(m)
    assert out == canonicalize(m) and corr is None


def test_normalize_single_atom():
    out, corr = normalize_origin(Measure([0.5], [1.0]))
    assert len(out) == 0 and corr.N == 1 and corr.nu.atoms == [((0.5 + 0j), 1.0)]


def test_normalize_splits_boundary_atom():
    # inner mass 1.2 exceeds the total ceiling, so N = 1: take 0.7 at 0.3 and 0.3 of the atom at 0.6
    out, corr = normalize_origin(Measure([0.3, 0.6], [0.7, 0.5]))
    assert corr.N == 1 and corr.radius == 0.6
    assert corr.nu.atoms == [((0.3 + 0j), 0.7), ((0.6 + 0j), pytest.approx(0.3))]
    assert out.atoms == [((0.6 + 0j), pytest.approx(0.2))]


def test_normalize_clears_unit_disk_when_possible():
    m = Measure([0.5, 0.9, 2.0, 3.0], [0.6, 0.7, 1.0, 1.0])
    out, corr = normalize_origin(m)
    assert corr.N == 2 and corr.cleared
    assert total_mass(corr.nu) == pytest.approx(2.0)
    assert np.all(out.moduli > 1)


def test_origin_correction_reproduces_potential():
    rng = np.random.default_rng(0)
    m = Measure(rng.uniform(0.1, 5, 30) * np.exp(2j * np.pi * rng.random(30)), rng.uniform(0.1, 1, 30))
    out, corr = normalize_origin(m)
    z = 8 * np.exp(2j * np.pi * rng.random(100)) * rng.random(100)
    assert np.allclose(log_potential(out, z) + corr.potential(z), log_potential(m, z), atol=1e-9)


def test_bounded_part_is_bounded():
    _, corr = normalize_origin(Measure([0.5, 0.5j], [1.0, 1.0]))
    vals = [abs(corr.bounded_part(R)) for R in (1e3, 1e6, 1e9)]
    assert max(vals) < 1e-2


# ---------------------------------------------------------------------------
# annular split


def test_single_atom_example():
    d = annular_split(Measure([2], [3.0]), SlowlyVarying.constant(4), R1=1.0001, check_annulus_mass=False)
    assert d.R == [1.0001, pytest.approx(4.0004)]
    assert d.mu1[0].atoms == [((2 + 0j), 2.0)]
    assert d.mu2_parts[0].atoms == [((2 + 0j), 1.0)]
    assert len(d.mu3_parts[0]) == 0


def test_sparse_measure_has_empty_mu1():
    m = Measure(4.0 ** np.arange(1, 8), np.full(7, 0.9))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        d = annular_split(m, SlowlyVarying.constant(2))
    assert all(len(x) == 0 for x in d.mu1)
    assert canonicalize(d.mu2) == canonicalize(m)


def test_empty_measure():
    d = annular_split(Measure(), SlowlyVarying.log_e())
    assert d.R == [] and d.mu1 == []


def test_annulus_mass_warning():
    with pytest.warns(RuntimeWarning, match="annulus mass"):
        annular_split(Measure([2, 100], [1.0, 1.0]), SlowlyVarying.log_e())


def test_rejects_mass_inside_R1():
    with pytest.raises(MeasureError):
        annular_split(Measure([2, 5], [1.0, 1.0]), SlowlyVarying.log_e(), R1=3)


def test_annulus_mass_margin_brute_force():
    rng = np.random.default_rng(4)
    m = dense_measure(4, log_hi=(5, 6))
    psi = SlowlyVarying.log_e()
    worst, _ = annulus_mass_margin(m, psi, 2.0, 20.0)
    grid = np.exp(np.linspace(math.log(2), math.log(20), 20001))
    mod = m.moduli
    brute = min(m.masses[(mod > R) & (mod <= R * psi(R))].sum() for R in grid)
    assert worst <= brute + 1e-12
    assert worst > 1
    del rng


@pytest.mark.parametrize("seed", range(10))
def test_random_decompositions_verify(seed):
    m = dense_measure(seed)
    psi = SlowlyVarying.log_e()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        d = annular_split(m, psi)
    rep = verify_decomposition(d, m)
    assert rep.all_pass, rep.details
    assert rep.checked_steps >= len(d.mu1) - 1
    assert d.annulus_mass_ok


def test_mu3_mass_is_exact_when_present():
    m = dense_measure(3)
    d = annular_split(m, SlowlyVarying.log_e())
    for k in range(len(d.mu1) - 1):
        if len(d.mu3_parts[k]):
            assert total_mass(d.mu2_parts[k]) + total_mass(d.mu3_parts[k]) == pytest.approx(1.0, abs=1e-9)


def test_decomposition_csv(tmp_path):
    d = annular_split(dense_measure(1), SlowlyVarying.log_e())
    p = tmp_path / "d.csv"
    write_decomposition_csv(d, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "k,R_k,R_k*psi,mass_mu1,mass_mu2_part"
    assert len(lines) == len(d.mu1) + 1


# ---------------------------------------------------------------------------
# heavy tail


def test_T1_for_dyadic_atoms():
    # cumulative mass is 5 on [32, 64), so the supremum is 64
    s = heavy_tail_schedule(Measure(2.0 ** np.arange(1, 12), np.ones(11)))
    assert s.T[0] == 2.0 and s.T[1] == 64.0


def test_block_radius_equal_radii():
    s = heavy_tail_schedule(Measure(10 * np.exp(1j * np.arange(5)), np.ones(5)))
    assert s.r == [pytest.approx(10.0)]


def test_block_radius_geometric_mean():
    pos = np.array([2, 2j, -2, 8, 8j])
    s = heavy_tail_schedule(Measure(pos, np.ones(5)))
    assert math.log(s.r[0]) == pytest.approx((3 * math.log(2) + 2 * math.log(8)) / 5, abs=1e-12)
    assert s.r[0] == pytest.approx(2 ** 1.8)


def test_small_mass_gives_empty_schedule():
    s = heavy_tail_schedule(Measure([3, 4], [1.0, 2.0]))
    assert s.pieces == [] and total_mass(s.tail) == pytest.approx(3.0)
    assert s.tail_multiplicity == 3


def test_blocks_split_atoms():
    s = heavy_tail_schedule(Measure([2, 3, 4], [3.0, 3.0, 4.0]))
    assert [total_mass(p) for p in s.pieces] == [pytest.approx(5), pytest.approx(5)]
    assert len(s.tail) == 0


@pytest.mark.parametrize("seed", range(5))
def test_schedule_bounds_on_random_input(seed):
    m = dense_measure(seed, log_hi=(40, 80))
    psi = SlowlyVarying.log_e()
    d = annular_split(m, psi)
    s = heavy_tail_schedule(d.mu2, psi)
    ok, det = verify_schedule(s, psi, upto=d.R[-2])
    assert ok, det
    assert len(s.pieces) >= 3


def test_build_f2():
    from subharm.decomposition import HeavyTailSchedule

    z, ratios = build_f2(HeavyTailSchedule([1.0, 20.0], [Measure([10], [5.0])], [10.0], Measure()))
    assert z.positions.tolist() == [10] and z.multiplicities.tolist() == [5]
    z, _ = build_f2(HeavyTailSchedule([0.0], [], [], Measure()))
    assert len(z) == 0
    s = HeavyTailSchedule([1, 20, 200], [Measure([10], [5.0]), Measure([100], [5.0])], [10.0, 100.0], Measure())
    z, _ = build_f2(s)
    assert z.count == 10 and z.positions[1] / z.positions[0] == 10
    with pytest.raises(MeasureError):
        build_f2(HeavyTailSchedule([1, 2, 3], [Measure(), Measure()], [10.0, 5.0], Measure()))


def test_extract_integer_atoms():
    z, rest = extract_integer_atoms(Measure([3], [5.0]))
    assert z.multiplicities.tolist() == [4] and rest.atoms == [((3 + 0j), 1.0)]
    z, rest = extract_integer_atoms(Measure([3], [2.0]))
    assert z.multiplicities.tolist() == [2] and len(rest) == 0
    m = Measure([3, 4], [1.5, 0.5])
    z, rest = extract_integer_atoms(m)
    assert len(z) == 0 and rest == m

"""Lacunary half-mass measures that no zero set approximates better.

``u_phi(z) = 1/2 sum_k log|1 - z/r_k|`` with ``r_0 = 2`` and
``r_{k+1} = r_k phi(r_k)``: half-unit masses on a sparse sequence of
positive radii. Every entire function has integer zero counts, so
``n(r, u) - n(r, f)`` cannot stay close to a constant and the L1 error is
forced to grow like ``R^2 log phi(R)``. The helpers below build these
measures and run the counting-function diagnostics on candidate zero sets.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .decomposition import SlowlyVarying, annulus_mass_margin
from .measure import Measure, MeasureError
from .metrics import (
    ErrorReport,
    GapReport,
    counting_function,
    error_report,
    integrated_counting,
)
from .potential import ZeroSet


def build_slowly_varying_from_sigma(sigma, nodes_per_octave: int = 64, check_upto: float = 1e12,
                                    name: str = "sigma") -> SlowlyVarying:
    """``psi(R) = exp(int_1^R sigma(t)/t dt)``.

    Warns when ``sigma`` does not appear to decay on a log grid up to
    ``check_upto``.

    Raises
    ------
    MeasureError
        If ``sigma`` is not positive on the grid.
    """
    grid = np.exp(np.linspace(0.0, math.log(check_upto), 97))
    vals = np.asarray(sigma(grid), dtype=float) * np.ones_like(grid)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise MeasureError("sigma must be positive and finite")
    if vals[-1] > 0.5 * vals[0] and vals[-1] > 1e-3:
        warnings.warn("sigma does not appear to tend to zero", RuntimeWarning, stacklevel=2)
    return SlowlyVarying.from_sigma(sigma, nodes_per_octave, name)


@dataclass(frozen=True)
class UPhiSpec:
    """Half-mass atoms at ``r_0 = 2``, ``r_{k+1} = r_k phi(r_k)``.

    Either ``count`` radii are generated or, with ``max_radius``, all radii
    up to that bound.
    """

    phi: SlowlyVarying
    count: int | None = None
    r0: float = 2.0
    mass: float = 0.5
    max_radius: float | None = None

    @property
    def radii(self) -> np.ndarray:
        if self.count is None and self.max_radius is None:
            raise MeasureError("give count or max_radius")
        out = [float(self.r0)]
        while True:
            if self.count is not None and len(out) >= self.count:
                break
            nxt = out[-1] * float(self.phi(out[-1]))
            if not nxt > out[-1]:
                raise MeasureError("phi must exceed one")
            if self.max_radius is not None and nxt > self.max_radius:
                break
            out.append(nxt)
        if self.count is not None and len(out) < 1:
            raise MeasureError("count must be at least one")
        return np.array(out)


def build_u_phi(spec: UPhiSpec) -> Measure:
    """Atoms of mass ``spec.mass`` at the radii of ``spec``.

    Examples
    --------
    >>> build_u_phi(UPhiSpec(SlowlyVarying.constant(2), count=4)).atoms
    [((2+0j), 0.5), ((4+0j), 0.5), ((8+0j), 0.5), ((16+0j), 0.5)]
    """
    if spec.count is not None and spec.count < 1:
        raise MeasureError("count must be at least one")
    r = spec.radii
    return Measure(r.astype(complex), np.full(r.size, spec.mass))


def check_annulus_condition(m: Measure, psi: SlowlyVarying, R1: float, R_end: float) -> tuple[float, float]:
    """Minimum annulus mass ``m({R < |z| <= R psi(R)})`` over ``[R1, R_end]``."""
    return annulus_mass_margin(m, psi, R1, R_end)


def best_rounding(spec: UPhiSpec) -> ZeroSet:
    """Simple zeros at every second radius (the second, fourth, ...).

    Each zero closes a pair of half masses, so ``n(r, u) - n(r, f)``
    alternates between one half and zero.
    """
    r = spec.radii[1::2]
    return ZeroSet(r.astype(complex), np.ones(r.size, dtype=np.int64), ("pair",) * r.size)


def _jump_points(u: Measure, f: ZeroSet) -> np.ndarray:
    return np.unique(np.concatenate([np.abs(u.positions), np.abs(f.positions)]))


def reduce_half_alpha(u: Measure, alpha: float) -> tuple[Measure, float]:
    """Move ``alpha`` from ``[1/2, 1)`` to ``[0, 1/2)``.

    The innermost half mass is dropped: this lowers ``n(r, u)`` by ``1/2``
    beyond its radius and changes ``u`` by ``1/2 log|1 - z/r|``, whose
    contribution to the disk error is ``O(R^2)``. For ``alpha < 1/2`` the
    input is returned unchanged.

    Examples
    --------
    >>> u, a = reduce_half_alpha(Measure([2.0, 8.0], [0.5, 0.5]), 0.75)
    >>> u.atoms, a
    ([((8+0j), 0.5)], 0.25)
    """
    if alpha < 0.5 or len(u) == 0:
        return u, alpha
    i = int(np.argmin(u.moduli))
    if abs(u.masses[i] - 0.5) > 1e-12:
        raise MeasureError("innermost atom must have mass 1/2")
    keep = np.ones(len(u), dtype=bool)
    keep[i] = False
    return u.select(keep), alpha - 0.5


def counting_gap_scan(u: Measure, f: ZeroSet, alpha: float, r_grid, tol: float = 1e-12,
                      reduce_half: bool = False) -> GapReport:
    """Compare ``n(r, u) - n(r, f) - alpha`` with ``1/2`` on a grid.

    The grid is augmented by every jump point. ``pattern`` is ``"{0,1/2}"``
    (or ``"{-alpha,1/2-alpha}"``) when, past the first jump, the gap only
    takes those two values; otherwise ``"other"``. With ``reduce_half``,
    ``alpha >= 1/2`` is first reduced by :func:`reduce_half_alpha`.

    Raises
    ------
    MeasureError
        If ``alpha`` is outside ``[0, 1)``.
    """
    if not 0 <= alpha < 1:
        raise MeasureError("alpha must lie in [0, 1)")
    if reduce_half:
        u, alpha = reduce_half_alpha(u, alpha)
    r = np.unique(np.concatenate([np.asarray(r_grid, dtype=float), _jump_points(u, f)]))
    r = r[r > 0]
    nu, nf = counting_function(u, r), counting_function(f, r)
    Nu, Nf = integrated_counting(u, r), integrated_counting(f, r)
    gap = nu - nf - alpha
    bad = [float(x) for x, g in zip(r, gap) if abs(g) > 0.5 + tol]
    first = float(np.min(_jump_points(u, f))) if len(u) + len(f) else math.inf
    active = gap[r >= first]
    values = np.unique(np.round(active + alpha, 12))
    if active.size and set(values.tolist()) <= {0.0, 0.5}:
        pattern = "{0,1/2}" if alpha == 0 else "{-alpha,1/2-alpha}"
    else:
        pattern = "other"
    return GapReport(r.tolist(), nu.tolist(), nf.tolist(), Nu.tolist(), Nf.tolist(), float(alpha), bad, pattern)


@dataclass
class GrowthProbe:
    t_star: float
    T_star: float
    n_gap: float
    threshold: float

    @property
    def exceeds(self) -> bool:
        return self.n_gap > self.threshold


def n_gap_growth(u: Measure, f: ZeroSet, alpha: float, psi: SlowlyVarying, probes,
                 eps: float = 0.1, reduce_half: bool = False) -> list[GrowthProbe]:
    """Integrated gap at probe radii against ``(1/2 - alpha - eps) log psi``.

    For each ``(t, T)`` in ``probes`` the value reported is
    ``|N(T, u) - N(T, f) - alpha log T|`` and the threshold
    ``(1/2 - alpha - eps) log psi(t)``; ``exceeds`` marks probes where the
    gap is at least as large as the lower bound, which is what rules out an
    ``o(R^2 log psi)`` approximation. ``reduce_half`` is as in
    :func:`counting_gap_scan`.
    """
    if reduce_half:
        u, alpha = reduce_half_alpha(u, alpha)
    out = []
    for t, T in probes:
        gap = abs(integrated_counting(u, T) - integrated_counting(f, T) - alpha * math.log(T))
        thr = (0.5 - alpha - eps) * float(psi.log(t))
        out.append(GrowthProbe(float(t), float(T), float(gap), float(thr)))
    return out


def dyadic_probes(radii, step: int = 2) -> list[tuple[float, float]]:
    """Windows ``(r_k, r_{k+1}/2)`` style probes between consecutive radii."""
    radii = np.asarray(radii, dtype=float)
    return [(float(radii[k]), float(radii[k + 1])) for k in range(0, radii.size - 1, step)]


def sharpness_ratio(u: Measure, f: ZeroSet | None, alpha: float, psi: SlowlyVarying, R_grid,
                    rtol: float = 1e-3) -> ErrorReport:
    """``I_alpha(R)`` and ``I_alpha(R)/(R^2 log psi(R))`` on ``R_grid``."""
    return error_report(u, f, psi, R_grid, alpha=alpha, rtol=rtol)

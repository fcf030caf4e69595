"""Annular decomposition of a Riesz measure and the sparse-tail schedule.

The measure is cut into closed annuli ``Q_k = {R_k <= |z| <= R_k psi(R_k)}``.
The even part of the mass in each ``Q_k`` goes to ``mu1`` (approximated
later by mass-2 atomization); the rest, topped up so that every gap
annulus ``[R_k, R_{k+1}]`` holds between one and two units, goes to
``mu2``. ``mu2`` is then grouped into blocks of mass five, each replaced
by a quintuple zero at the mass-geometric-mean radius.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .measure import (
    Measure,
    MeasureError,
    Region,
    canonicalize,
    radial_order,
    take_mass_in_order,
    total_mass,
)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class SlowlyVarying:
    """A function ``psi: [1, inf) -> (1, inf)`` used to size annuli.

    Build instances with :meth:`closed_form` or :meth:`from_sigma`.
    Calling the object evaluates ``psi`` elementwise.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], name: str = "psi",
                 log_func: Callable[[np.ndarray], np.ndarray] | None = None):
        self._func = func
        self._log_func = log_func
        self.name = name

    def __repr__(self) -> str:
        return f"SlowlyVarying({self.name})"

    @classmethod
    def closed_form(cls, func, name: str = "psi", log_func=None) -> "SlowlyVarying":
        return cls(func, name, log_func)

    @classmethod
    def constant(cls, value: float) -> "SlowlyVarying":
        if not value > 1:
            raise MeasureError("a constant psi must exceed 1")
        return cls(lambda r: np.full(np.shape(r), float(value)), f"const({value:g})")

    @classmethod
    def log_e(cls) -> "SlowlyVarying":
        """``psi(R) = log(e R)``."""
        return cls(lambda r: 1.0 + np.log(r), "log(eR)", lambda r: np.log1p(np.log(r)))

    @classmethod
    def exp_sqrt_log(cls, power: float = 1.0) -> "SlowlyVarying":
        """``psi(R) = exp(power * sqrt(log R))``."""
        name = "exp(sqrt(log R))" if power == 1 else f"exp({power:g}*sqrt(log R))"
        return cls(
            lambda r: np.exp(power * np.sqrt(np.log(r))),
            name,
            lambda r: power * np.sqrt(np.log(r)),
        )

    @classmethod
    def from_sigma(cls, sigma: Callable, nodes_per_octave: int = 64, name: str = "sigma") -> "SlowlyVarying":
        """``psi(R) = exp(int_1^R sigma(t)/t dt)``; see :class:`SigmaIntegral`."""
        integral = SigmaIntegral(sigma, nodes_per_octave)
        return cls(lambda r: np.exp(integral(r)), f"exp(int {name}(t)/t)", integral)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = self._func(np.maximum(r, 1.0))
        return float(out) if out.ndim == 0 else out

    def log(self, r):
        """``log psi(r)``, evaluated directly when a log form is known."""
        r = np.maximum(np.asarray(r, dtype=float), 1.0)
        out = self._log_func(r) if self._log_func is not None else np.log(self._func(r))
        out = np.asarray(out, dtype=float)
        return float(out) if out.ndim == 0 else out

    def Psi(self, n: int, r):
        """``n``-fold iterate of ``R -> R psi(R)``."""
        out = np.asarray(r, dtype=float)
        for _ in range(n):
            out = out * self(out)
        return float(out) if np.ndim(out) == 0 else out

    def Psi1_inverse(self, x: float, lo: float = 1.0) -> float:
        """Smallest ``R >= lo`` with ``R psi(R) >= x`` (``Psi_1`` is increasing)."""
        f = lambda r: r * self(r) - x  # noqa: E731
        if f(lo) >= 0:
            return lo
        hi = max(2.0 * lo, x)
        while f(hi) < 0:
            hi *= 2
        return brentq(f, lo, hi, xtol=1e-14 * hi, rtol=1e-15)


class SigmaIntegral:
    """``int_1^R sigma(t)/t dt`` on a cached log grid.

    With ``s = log t`` the integrand ``sigma(e^s)`` is smooth; nodes are
    spaced ``log(2)/nodes_per_octave`` apart and integrated by composite
    Simpson, with 8-point Gauss-Legendre on the partial last cell.
    """

    def __init__(self, sigma: Callable, nodes_per_octave: int = 64):
        self.sigma = sigma
        self.h = math.log(2.0) / nodes_per_octave
        self._cum = np.zeros(1)
        self.positive_checked = True

    def _sig(self, s: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.sigma(np.exp(s)), dtype=float) * np.ones_like(s)
        if np.any(vals <= 0):
            raise MeasureError("sigma must be positive")
        return vals

    def _extend(self, smax: float) -> None:
        n_needed = int(math.ceil(smax / self.h)) + 1
        n_have = self._cum.size - 1
        if n_needed <= n_have:
            return
        n_new = max(n_needed, 2 * n_have)
        left = self.h * np.arange(n_have, n_new)
        right = left + self.h
        mid = left + self.h / 2
        cell = self.h / 6 * (self._sig(left) + 4 * self._sig(mid) + self._sig(right))
        self._cum = np.concatenate([self._cum, self._cum[-1] + np.cumsum(cell)])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        s = np.log(np.maximum(r, 1.0))
        if s.size:
            self._extend(float(np.max(s)))
        j = np.floor(s / self.h).astype(int)
        base = self._cum[j]
        s0 = j * self.h
        half = (s - s0) / 2
        nodes = s0[..., None] + half[..., None] * (_GL_X + 1)
        part = half * np.sum(_GL_W * self._sig(nodes), axis=-1)
        out = base + part
        return float(out) if out.ndim == 0 else out


def check_slow_variation(psi: SlowlyVarying, radii, factor: float = 2.0) -> np.ndarray:
    """``psi(factor R) / psi(R)`` on ``radii`` (tends to 1 for slowly varying psi)."""
    radii = np.asarray(radii, dtype=float)
    return np.asarray(psi(factor * radii)) / np.asarray(psi(radii))


# ---------------------------------------------------------------------------
# Origin normalization


@dataclass(frozen=True)
class OriginCorrection:
    """Integer-mass part ``nu`` removed from a disk around the origin."""

    nu: Measure
    N: float
    radius: float
    cleared: bool = True

    def potential(self, z):
        """``int log|1 - z/zeta| dnu(zeta)``."""
        from .potential import log_potential

        return log_potential(self.nu, z)

    def bounded_part(self, z):
        """``int log|z - zeta| dnu - N log|z|``, bounded as ``z -> inf``."""
        z = np.asarray(z, dtype=complex)
        d = np.log(np.abs(z[..., None] - self.nu.positions))
        out = d @ self.nu.masses - self.N * np.log(np.abs(z))
        return float(out) if np.ndim(out) == 0 else out


def _radial_order(m: Measure) -> np.ndarray:
    return radial_order(m.positions)


def normalize_origin(m: Measure, radius: float = 1.0) -> tuple[Measure, OriginCorrection | None]:
    """Remove an integer amount of mass near the origin.

    If the closed disk of radius ``radius`` carries no mass the measure is
    returned unchanged with no correction. Otherwise ``N`` is the smallest
    integer covering that mass (or, when the total mass is too small, the
    largest integer not exceeding it), ``a`` the smallest radius whose closed
    disk carries at least ``N``, and ``nu`` is ``m`` on the open disk of
    radius ``a`` plus the part of the circle ``|z| = a`` needed to reach ``N``,
    taken in angular order.
    """
    m = canonicalize(m)
    if len(m) == 0:
        return m, None
    inner = float(np.sum(m.masses[m.moduli <= radius]))
    if inner == 0.0:
        return m, None
    total = total_mass(m)
    N = math.ceil(inner - 1e-12)
    cleared = True
    if N > total + 1e-12:
        N = math.floor(total + 1e-12)
        cleared = False
    if N < 1:
        return m, None
    order = _radial_order(m)
    taken, rest = take_mass_in_order(m.positions[order], m.masses[order], N)
    a = float(np.max(taken.moduli))
    rest = canonicalize(rest)
    if len(rest) and np.min(rest.moduli) <= radius:
        cleared = False
    return rest, OriginCorrection(canonicalize(taken), float(N), a, cleared)


# ---------------------------------------------------------------------------
# Annular decomposition


@dataclass
class AnnularDecomposition:
    """Result of :func:`annular_split`.

    ``R`` has one more entry than ``mu1``: annulus ``k`` is
    ``Q[k] = [R[k], Psi_1(R[k])]`` and its sparse part lives in
    ``[R[k], R[k+1]]``.
    """

    R: list[float]
    Q: list[Region]
    mu1: list[Measure]
    mu2_parts: list[Measure]
    mu3_parts: list[Measure]
    psi: SlowlyVarying
    origin_correction: OriginCorrection | None = None
    truncated: bool = False
    annulus_mass_ok: bool = True

    @property
    def mu2(self) -> Measure:
        out = Measure()
        for a, b in zip(self.mu2_parts, self.mu3_parts):
            out = out + a + b
        return canonicalize(out)

    @property
    def mu1_total(self) -> Measure:
        out = Measure()
        for a in self.mu1:
            out = out + a
        return canonicalize(out)

    def sparse_mass(self, k: int) -> float:
        return total_mass(self.mu2_parts[k]) + total_mass(self.mu3_parts[k])


def annulus_mass_margin(m: Measure, psi: SlowlyVarying, R1: float, R_end: float) -> tuple[float, float]:
    """Minimum over ``R in [R1, R_end]`` of ``m({R < |z| <= R psi(R)})``.

    The annulus mass is piecewise constant in ``R``; it is evaluated at
    every breakpoint (atom moduli and their preimages under ``Psi_1``).
    Returns ``(minimum, argmin)``.
    """
    rho = np.sort(m.moduli)
    w = m.masses[np.argsort(m.moduli)]
    cum = np.concatenate([[0.0], np.cumsum(w)])
    events = [R1]
    events += [float(r) for r in rho if R1 <= r <= R_end]
    for r in rho:
        pre = psi.Psi1_inverse(float(r), lo=1.0)
        if R1 <= pre <= R_end:
            events.append(pre)
    events = np.unique(events)
    upper = events * np.asarray(psi(events))
    # m((R, Psi1(R)]) = F(Psi1(R)) - F(R) with F(x) = m(|z| <= x)
    F = lambda x: cum[np.searchsorted(rho, x, side="right")]  # noqa: E731
    vals = F(upper) - F(events)
    k = int(np.argmin(vals))
    return float(vals[k]), float(events[k])


def annular_split(
    m: Measure,
    psi: SlowlyVarying,
    R1: float | None = None,
    origin_correction: OriginCorrection | None = None,
    check_annulus_mass: bool = True,
) -> AnnularDecomposition:
    """Inductive decomposition into even annulus masses and a sparse tail.

    Parameters
    ----------
    m : Measure
        Normalized measure (no mass in a disk of radius greater than one).
    psi : SlowlyVarying
    R1 : float, optional
        First radius; defaults to the smallest atom modulus.

    Notes
    -----
    Inside ``Q_k`` the even part ``mu1`` takes the innermost mass in
    (modulus, angle) order; the odd remainder ``mu2`` is the outermost.
    When ``mu2`` has less than unit mass, ``mu3`` collects the mass beyond
    ``Psi_1(R_k)`` up to the first radius where it reaches one, splitting
    atoms on that circle in angular order. The induction stops once every
    atom is consumed.
    """
    m = canonicalize(m)
    if len(m) == 0:
        return AnnularDecomposition([], [], [], [], [], psi, origin_correction)
    if R1 is None:
        R1 = float(np.min(m.moduli))
    if np.min(m.moduli) < R1 * (1 - 1e-12):
        raise MeasureError("measure has mass inside the first radius R1")
    if R1 <= 1:
        raise MeasureError("R1 must exceed 1; normalize the origin first")

    annulus_mass_ok = True
    if check_annulus_mass:
        outer = float(np.max(m.moduli))
        R_end = psi.Psi1_inverse(outer, lo=R1) if outer > R1 * psi(R1) else R1
        worst, where = annulus_mass_margin(m, psi, R1, R_end)
        if worst <= 1:
            annulus_mass_ok = False
            warnings.warn(
                f"annulus mass condition fails near R={where:.6g} (mass {worst:.6g} <= 1)",
                RuntimeWarning,
                stacklevel=2,
            )

    R = [float(R1)]
    Q, mu1, mu2_parts, mu3_parts = [], [], [], []
    rest = m
    truncated = False
    while len(rest):
        Rk = R[-1]
        Rk_out = float(Rk * psi(Rk))
        Q.append(Region.annulus(Rk, Rk_out))
        order = _radial_order(rest)
        pos, mas = rest.positions[order], rest.masses[order]
        mod = np.abs(pos)
        inside = (mod >= Rk) & (mod <= Rk_out)
        beyond = ~inside
        q_pos, q_mas = pos[inside], mas[inside]
        q_mass = float(np.sum(q_mas))
        if q_mass < 2:
            part1, part2 = Measure(), Measure(q_pos, q_mas)
        else:
            even = 2.0 * math.floor(q_mass / 2 + 1e-12)
            part1, part2 = take_mass_in_order(q_pos, q_mas, even)
        rest_pos, rest_mas = pos[beyond], mas[beyond]
        if total_mass(part2) >= 1 - 1e-12:
            part3 = Measure()
            R_next = Rk_out
        elif rest_pos.size == 0:
            part3 = Measure()
            R_next = Rk_out
            truncated = True
        else:
            need = 1.0 - total_mass(part2)
            cum = np.cumsum(rest_mas)
            j = int(np.searchsorted(cum, need - 1e-12, side="left"))
            if j >= cum.size:
                # outer mass runs out before reaching one unit
                part3 = Measure(rest_pos, rest_mas)
                rest_pos, rest_mas = rest_pos[:0], rest_mas[:0]
                R_next = max(Rk_out, float(np.max(np.abs(part3.positions))))
                truncated = True
            else:
                R_next = float(np.abs(rest_pos[j]))
                part3, remaining = take_mass_in_order(rest_pos, rest_mas, need)
                rest_pos, rest_mas = remaining.positions, remaining.masses
        mu1.append(part1)
        mu2_parts.append(part2)
        mu3_parts.append(part3)
        R.append(R_next)
        rest = Measure(rest_pos, rest_mas)
    return AnnularDecomposition(
        R, Q, mu1, mu2_parts, mu3_parts, psi, origin_correction, truncated, annulus_mass_ok
    )


@dataclass
class DecompositionReport:
    even_mu1: bool
    supports: bool
    radii_growth: bool
    sparse_mass: bool
    conservation: bool
    checked_steps: int
    details: list[str] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return (self.even_mu1 and self.supports and self.radii_growth
                and self.sparse_mass and self.conservation)


def verify_decomposition(dec: AnnularDecomposition, m: Measure, tol: float = 1e-9) -> DecompositionReport:
    """Check the four annulus properties and mass conservation.

    The radius growth and sparse-mass bounds need the annulus mass
    condition beyond ``R_k``; they are checked on every step except a
    final truncated one.
    """
    psi = dec.psi
    details = []
    K = len(dec.mu1)
    even = supports = growth = sparse = True
    checked = 0
    for k in range(K):
        Rk, Rn = dec.R[k], dec.R[k + 1]
        Rk_out = Rk * psi(Rk)
        w1 = total_mass(dec.mu1[k])
        if abs(w1 - 2 * round(w1 / 2)) > tol:
            even = False
            details.append(f"k={k}: mu1 mass {w1} not even")
        if len(dec.mu1[k]):
            mod = dec.mu1[k].moduli
            if np.any(mod < Rk * (1 - tol)) or np.any(mod > Rk_out * (1 + tol)):
                supports = False
                details.append(f"k={k}: mu1 support leaves Q_k")
        sp = dec.mu2_parts[k] + dec.mu3_parts[k]
        if len(sp):
            mod = sp.moduli
            if np.any(mod < Rk * (1 - tol)) or np.any(mod > Rn * (1 + tol)):
                supports = False
                details.append(f"k={k}: sparse support leaves [R_k, R_k+1]")
        last_truncated = dec.truncated and k == K - 1
        if last_truncated:
            continue
        checked += 1
        if not (Rk_out * (1 - tol) <= Rn <= psi.Psi(2, Rk) * (1 + tol)):
            growth = False
            details.append(f"k={k}: R_k+1={Rn:.6g} outside [{Rk_out:.6g}, {psi.Psi(2, Rk):.6g}]")
        s = dec.sparse_mass(k)
        if not (1 - tol <= s <= 2 + tol):
            sparse = False
            details.append(f"k={k}: sparse mass {s:.6g} outside [1, 2]")
    joined = canonicalize(dec.mu1_total + dec.mu2)
    ref = canonicalize(m)
    conservation = abs(total_mass(joined) - total_mass(ref)) <= tol * max(1.0, total_mass(ref))
    if not conservation:
        details.append("mass not conserved")
    return DecompositionReport(even, supports, growth, sparse, conservation, checked, details)


def write_decomposition_csv(dec: AnnularDecomposition, path: str | Path) -> None:
    """Rows ``k,R_k,R_k*psi,mass_mu1,mass_mu2_part``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "R_k", "R_k*psi", "mass_mu1", "mass_mu2_part"])
        for k in range(len(dec.mu1)):
            Rk = dec.R[k]
            w.writerow([k + 1, repr(float(Rk)), repr(float(Rk * dec.psi(Rk))),
                        repr(total_mass(dec.mu1[k])), repr(dec.sparse_mass(k))])


# ---------------------------------------------------------------------------
# Sparse tail: blocks of mass five


@dataclass
class HeavyTailSchedule:
    """Blocks of ``mu2`` of mass five.

    ``pieces[n]`` lies in ``A_n = [T[n], T[n+1]]``; ``r[n]`` is its
    mass-geometric-mean radius. Mass left over after the last full block
    is kept in ``tail`` (truncation remainder) with its own mean radius.
    """

    T: list[float]
    pieces: list[Measure]
    r: list[float]
    tail: Measure
    psi: SlowlyVarying | None = None

    @property
    def tail_radius(self) -> float | None:
        if len(self.tail) == 0:
            return None
        return float(np.exp(np.dot(self.tail.masses, np.log(self.tail.moduli)) / total_mass(self.tail)))

    @property
    def tail_multiplicity(self) -> int:
        return int(round(total_mass(self.tail)))


def heavy_tail_schedule(mu2: Measure, psi: SlowlyVarying | None = None, block: float = 5.0) -> HeavyTailSchedule:
    """Group ``mu2`` into consecutive radial blocks of mass ``block``.

    ``T[n] = sup{R: mu2(closed disk R) <= block*n}``, the modulus where the
    cumulative mass first exceeds ``block*n``. Atoms straddling a block
    boundary are split, the first part going to the inner block.
    """
    mu2 = canonicalize(mu2)
    total = total_mass(mu2)
    order = _radial_order(mu2)
    pos, mas = mu2.positions[order], mu2.masses[order]
    n_blocks = int(math.floor(total / block + 1e-12))
    mod = np.abs(pos)
    cum = np.cumsum(mas)
    T = []
    for n in range(n_blocks + 1):
        j = int(np.searchsorted(cum, block * n * (1 + 1e-12) + 1e-12, side="right"))
        T.append(float(mod[j]) if j < mod.size else math.inf)
    pieces, radii = [], []
    rest_pos, rest_mas = pos, mas
    for _ in range(n_blocks):
        piece, rest = take_mass_in_order(rest_pos, rest_mas, block)
        pieces.append(piece)
        radii.append(float(np.exp(np.dot(piece.masses, np.log(piece.moduli)) / block)))
        rest_pos, rest_mas = rest.positions, rest.masses
    tail = Measure(rest_pos, rest_mas)
    if total_mass(tail) <= 1e-9:
        tail = Measure()
    return HeavyTailSchedule(T, pieces, radii, tail, psi)


def verify_schedule(sched: HeavyTailSchedule, psi: SlowlyVarying, upto: float = math.inf,
                    tol: float = 1e-9) -> tuple[bool, list[str]]:
    """Check ``Psi_1(T_n) <= T_{n+1} <= Psi_6(T_n)`` and the block masses.

    Only ``n`` with ``T_{n+1} <= upto`` are checked (the truncated end of a
    finite measure does not satisfy the growth condition).
    """
    ok, details = True, []
    for n, piece in enumerate(sched.pieces):
        if abs(total_mass(piece) - 5.0) > tol:
            ok = False
            details.append(f"n={n}: block mass {total_mass(piece)}")
        lr = math.log(sched.r[n])
        mean = float(np.dot(piece.masses, np.log(piece.moduli)) / 5.0)
        if abs(lr - mean) > 1e-12 * max(1.0, abs(mean)):
            ok = False
            details.append(f"n={n}: r_n is not the geometric mean radius")
    for n in range(len(sched.T) - 1):
        Tn, Tn1 = sched.T[n], sched.T[n + 1]
        if not math.isfinite(Tn1) or Tn1 > upto:
            continue
        if not (psi.Psi(1, Tn) * (1 - tol) <= Tn1 <= psi.Psi(6, Tn) * (1 + tol)):
            ok = False
            details.append(f"n={n}: T_n+1={Tn1:.6g} outside [Psi1, Psi6] of T_n={Tn:.6g}")
    return ok, details

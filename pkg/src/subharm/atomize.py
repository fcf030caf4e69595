"""Two-atom replacement of mass-2 pieces in log coordinates.

A mass-2 measure ``nu`` on the log plane is replaced by two unit atoms
``omega1, omega2`` with the same first and second complex moments:
``omega1 + omega2 = int w dnu`` and ``omega1**2 + omega2**2 = int w**2 dnu``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measure import Measure, MeasureError, angle
from .partition import PartitionPiece


class SingularPointError(ArithmeticError):
    """Raised when a logarithmic sum is evaluated at one of its poles."""


def to_log_coords(m: Measure, theta0: float = 0.0) -> Measure:
    """Map each atom ``zeta`` to ``log|zeta| + i arg(zeta)``, ``arg`` in ``[0, 2 pi)``.

    ``theta0`` moves the branch cut: the angle is measured from the ray
    ``arg = theta0``.
    """
    if len(m) and np.any(m.positions == 0):
        raise MeasureError("atom at the origin has no log coordinate")
    w = np.log(np.abs(m.positions)) + 1j * angle(m.positions * np.exp(-1j * theta0))
    return Measure(w, m.masses)


def from_log_coords(m: Measure, theta0: float = 0.0) -> Measure:
    return Measure(np.exp(m.positions + 1j * theta0), m.masses)


def widest_gap_direction(positions) -> float:
    """Direction bisecting the widest angular gap between atoms.

    Used as the branch cut so that no piece straddles it needlessly.
    """
    th = np.sort(angle(np.asarray(positions, dtype=complex)))
    if th.size == 0:
        return 0.0
    gaps = np.diff(np.concatenate([th, [th[0] + 2 * np.pi]]))
    j = int(np.argmax(gaps))
    return float((th[j] + gaps[j] / 2) % (2 * np.pi))


@dataclass(frozen=True)
class AtomPair:
    """Moment-matched pair for one mass-2 piece."""

    omega1: complex
    omega2: complex
    omega_center: complex
    d: float
    source: PartitionPiece | None = None
    theta0: float = 0.0

    @property
    def zeta1(self) -> complex:
        return complex(np.exp(self.omega1 + 1j * self.theta0))

    @property
    def zeta2(self) -> complex:
        return complex(np.exp(self.omega2 + 1j * self.theta0))

    @property
    def zetas(self) -> tuple[complex, complex]:
        return self.zeta1, self.zeta2


def _moments(nu: Measure) -> tuple[complex, complex]:
    w, m = nu.positions, nu.masses
    return complex(np.sum(m * w)), complex(np.sum(m * w * w))


def solve_pair(S: complex, Q: complex) -> tuple[complex, complex]:
    """Roots of ``x**2 - S x + (S**2 - Q)/2``, sorted by (real, imag)."""
    disc = np.sqrt(complex(2 * Q - S * S))
    a, b = (S + disc) / 2, (S - disc) / 2
    return tuple(sorted((complex(a), complex(b)), key=lambda c: (c.real, c.imag)))


def atomize_pair(piece: PartitionPiece, tol: float = 1e-9, theta0: float = 0.0) -> AtomPair:
    """Replace the piece measure by two unit atoms with equal moments.

    ``omega_center`` is the mass centroid ``S/2`` and ``d`` the diameter
    of the piece rectangle. ``theta0`` is the branch-cut direction used when
    the piece was mapped to log coordinates.

    Examples
    --------
    >>> from subharm.partition import LogRectangle, PartitionPiece
    >>> nu = Measure([0j, 1 + 0j], [1.0, 1.0])
    >>> p = atomize_pair(PartitionPiece(LogRectangle(0, 1, 0, 1), nu, 0))
    >>> p.omega1, p.omega2
    (0j, (1+0j))
    """
    nu = piece.nu
    mass = float(np.sum(nu.masses))
    if abs(mass - 2.0) > tol:
        raise MeasureError(f"piece mass {mass} is not 2")
    if len(nu) == 1:
        w = complex(nu.positions[0])
        return AtomPair(w, w, w, piece.rect.diameter, piece, theta0)
    if len(nu) == 2 and np.allclose(nu.masses, 1.0, rtol=0, atol=tol):
        a, b = sorted((complex(x) for x in nu.positions), key=lambda c: (c.real, c.imag))
        return AtomPair(a, b, (a + b) / 2, piece.rect.diameter, piece, theta0)
    S, Q = _moments(nu)
    w1, w2 = solve_pair(S, Q)
    return AtomPair(w1, w2, S / 2, piece.rect.diameter, piece, theta0)


def _log_abs_one_minus(z: np.ndarray, inv: np.ndarray, guard: float = 1e-12) -> np.ndarray:
    """``log|1 - z*inv|`` over the outer product.

    Points within ``guard * |a|`` of a pole ``a = 1/inv`` raise.
    """
    t = 1 - z[..., None] * inv
    a = np.abs(t)
    if np.any(a <= guard):
        raise SingularPointError("evaluation point coincides with an atom")
    return np.log(a)


def delta_term(pair: AtomPair, z) -> float | np.ndarray:
    """``int (log|1 - z e^-w| - (log|1 - z e^-w1| + log|1 - z e^-w2|)/2) dnu(w)``.

    Raises
    ------
    SingularPointError
        When ``z`` equals an atom of the piece or one of the pair zeros.
    """
    if pair.source is None:
        raise MeasureError("pair has no source piece")
    z = np.asarray(z, dtype=complex)
    nu = pair.source.nu
    rot = np.exp(-1j * pair.theta0)
    src = _log_abs_one_minus(z, rot * np.exp(-nu.positions)) @ nu.masses
    rep = _log_abs_one_minus(z, rot * np.exp(-np.array([pair.omega1, pair.omega2]))).sum(axis=-1)
    out = src - rep
    return float(out) if out.ndim == 0 else out


def correction_series(pairs: list[AtomPair], z) -> float | np.ndarray:
    """``V(z) = sum_l delta_l(z)``, summed in list order."""
    z = np.asarray(z, dtype=complex)
    total = np.zeros(z.shape)
    for p in pairs:
        total = total + delta_term(p, z)
    return float(total) if total.ndim == 0 else total


@dataclass
class PairCheck:
    moment_error: float
    center_violations: int
    spread_violations: int


def check_pair(pair: AtomPair) -> PairCheck:
    """Moment mismatch and the two distance bounds for one pair.

    ``moment_error`` is the largest relative error of the first and second
    moments; the bounds are ``|omega_j - center| <= d`` and
    ``sup |w - omega_j| <= 2 d`` over the piece support.
    """
    nu = pair.source.nu
    S, Q = _moments(nu)
    w = np.array([pair.omega1, pair.omega2])
    scale1 = max(abs(S), np.sum(nu.masses * np.abs(nu.positions)), 1e-300)
    scale2 = max(abs(Q), np.sum(nu.masses * np.abs(nu.positions) ** 2), 1e-300)
    e1 = abs(w.sum() - S) / scale1
    e2 = abs((w * w).sum() - Q) / scale2
    slack = 1e-12 * max(1.0, np.max(np.abs(nu.positions)))
    center = int(np.sum(np.abs(w - pair.omega_center) > pair.d + slack))
    spread = int(np.sum(np.abs(nu.positions[:, None] - w[None, :]) > 2 * pair.d + slack))
    return PairCheck(float(max(e1, e2)), center, spread)

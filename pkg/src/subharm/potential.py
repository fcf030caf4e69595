"""Logarithmic potentials, zero sets and the end-to-end approximation pipeline.

For an atomic measure ``m`` the potential is
``u(z) = sum_j m_j log|1 - z/zeta_j|``; a zero set defines ``log|f|``
the same way with integer multiplicities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atomize import (
    AtomPair,
    SingularPointError,
    atomize_pair,
    to_log_coords,
    widest_gap_direction,
)
from .decomposition import (
    AnnularDecomposition,
    HeavyTailSchedule,
    OriginCorrection,
    SlowlyVarying,
    annular_split,
    heavy_tail_schedule,
    normalize_origin,
)
from .measure import (
    Measure,
    MeasureError,
    MeasureFormatError,
    radial_order,
    canonicalize,
    generic_origin_shift,
    take_mass_in_order,
    total_mass,
)
from .partition import LogRectangle, PartitionStats, partition_with_stats

TAGS = ("f2", "integer_atom", "pair", "origin", "tail")
GUARD = 1e-12
_CHUNK = 1 << 20


class ConsistencyError(RuntimeError):
    """An internal invariant of the pipeline failed."""


@dataclass(frozen=True)
class ZeroSet:
    """Zeros of a genus-zero product with positive integer multiplicities.

    ``tags`` records where each zero came from (one of ``TAGS``).
    """

    positions: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))
    multiplicities: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.positions, dtype=complex)).copy()
        mult = np.atleast_1d(np.asarray(self.multiplicities))
        if mult.size and not np.all(mult == np.round(mult)):
            raise MeasureError("multiplicities must be integers")
        mult = mult.astype(np.int64)
        tags = tuple(self.tags) if self.tags else ("pair",) * pos.size
        if pos.shape != mult.shape or len(tags) != pos.size:
            raise MeasureError("positions, multiplicities and tags must have equal length")
        if np.any(mult < 1):
            raise MeasureError("multiplicities must be positive")
        if np.any(pos == 0):
            raise MeasureError("zeros at the origin are not allowed")
        if not np.all(np.isfinite(pos)):
            raise MeasureError("zero positions must be finite")
        bad = set(tags) - set(TAGS)
        if bad:
            raise MeasureError(f"unknown provenance tags {sorted(bad)}")
        pos.flags.writeable = False
        mult.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "multiplicities", mult)
        object.__setattr__(self, "tags", tags)

    def __len__(self) -> int:
        return int(self.positions.size)

    def __add__(self, other: "ZeroSet") -> "ZeroSet":
        return ZeroSet(
            np.concatenate([self.positions, other.positions]),
            np.concatenate([self.multiplicities, other.multiplicities]),
            self.tags + other.tags,
        )

    @property
    def count(self) -> int:
        """Number of zeros counted with multiplicity."""
        return int(np.sum(self.multiplicities))

    def as_measure(self) -> Measure:
        return Measure(self.positions, self.multiplicities.astype(float))

    def translate(self, offset: complex) -> "ZeroSet":
        return ZeroSet(self.positions + offset, self.multiplicities, self.tags)

    def with_tag(self, tag: str) -> "ZeroSet":
        keep = np.array([t == tag for t in self.tags], dtype=bool)
        return ZeroSet(self.positions[keep], self.multiplicities[keep],
                       tuple(t for t in self.tags if t == tag))

    def sorted(self) -> "ZeroSet":
        """Zeros ordered by (modulus, angle, real, imag)."""
        order = radial_order(self.positions)
        return ZeroSet(self.positions[order], self.multiplicities[order],
                       tuple(self.tags[i] for i in order))


# ---------------------------------------------------------------------------
# Evaluation


def log_sum(positions, weights, z, guard: float = GUARD):
    """``sum_j weights_j log|1 - z/positions_j|`` at every point of ``z``.

    Raises
    ------
    SingularPointError
        When some ``z`` lies within ``guard * |a|`` of an atom ``a``.
    """
    positions = np.asarray(positions, dtype=complex)
    weights = np.asarray(weights, dtype=float)
    z = np.asarray(z, dtype=complex)
    flat = z.reshape(-1)
    out = np.zeros(flat.shape)
    if positions.size:
        inv = 1.0 / positions
        step = max(1, _CHUNK // positions.size)
        for s in range(0, flat.size, step):
            t = 1.0 - flat[s:s + step, None] * inv
            a = np.abs(t)
            if np.any(a <= guard):
                raise SingularPointError("evaluation point within the guard radius of an atom")
            out[s:s + step] = np.log(a) @ weights
    out = out.reshape(z.shape)
    return float(out) if out.ndim == 0 else out


def log_potential(m: Measure, z):
    """``u(z) = int log|1 - z/zeta| dm(zeta)``.

    Examples
    --------
    >>> round(log_potential(Measure([2 + 0j], [1.0]), 6), 6)
    0.693147
    """
    if len(m) and np.any(m.positions == 0):
        raise MeasureError("atom at the origin: the potential is not normalized")
    return log_sum(m.positions, m.masses, z)


def log_modulus(f: ZeroSet, z):
    """``log|f(z)|`` for ``f(z) = prod (1 - z/a)**k``."""
    return log_sum(f.positions, f.multiplicities.astype(float), z)


# ---------------------------------------------------------------------------
# Zero-set I/O


def write_zeros(f: ZeroSet, path: str | Path, header: str | None = None) -> None:
    """Write ``re im multiplicity`` lines."""
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for p, k in zip(f.positions, f.multiplicities):
            fh.write(f"{float(p.real)!r} {float(p.imag)!r} {int(k)}\n")


def read_zeros(path: str | Path) -> ZeroSet:
    pos, mult = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise MeasureFormatError(f"expected 're im multiplicity', got {raw.strip()!r}", lineno)
            try:
                re_, im_ = float(parts[0]), float(parts[1])
                k = int(parts[2])
            except ValueError as exc:
                raise MeasureFormatError(str(exc), lineno) from None
            if not (math.isfinite(re_) and math.isfinite(im_)) or k < 1:
                raise MeasureFormatError("invalid zero", lineno)
            pos.append(complex(re_, im_))
            mult.append(k)
    return ZeroSet(np.array(pos, dtype=complex), np.array(mult, dtype=np.int64), ("pair",) * len(pos))


# ---------------------------------------------------------------------------
# Assembly


def extract_integer_atoms(mu1_k: Measure) -> tuple[ZeroSet, Measure]:
    """Split off ``2 floor(mass/2)`` at every atom of mass at least two.

    Returns the resulting even-multiplicity zeros and the remainder, whose
    point masses are all below two.

    Examples
    --------
    >>> z, rest = extract_integer_atoms(Measure([3 + 0j], [5.0]))
    >>> z.multiplicities.tolist(), rest.atoms
    ([4], [((3+0j), 1.0)])
    """
    m = canonicalize(mu1_k)
    k = 2 * np.floor(m.masses / 2 + 1e-12)
    hit = k >= 2
    zeros = ZeroSet(m.positions[hit], k[hit].astype(np.int64), ("integer_atom",) * int(hit.sum()))
    rem = m.masses - k
    keep = rem > 1e-12
    return zeros, Measure(m.positions[keep], rem[keep])


def build_f2(sched: HeavyTailSchedule, include_tail: bool = True) -> tuple[ZeroSet, list[float]]:
    """Quintuple zeros at the block radii ``r_n``.

    With ``include_tail`` the leftover mass (under five) becomes one zero
    of multiplicity ``round(mass)`` at its geometric-mean radius. Also
    returns the ratios ``r_{n+1}/r_{n-1}`` recorded as a growth certificate.
    """
    r = np.asarray(sched.r, dtype=float)
    if r.size > 1 and np.any(np.diff(r) <= 0):
        raise MeasureError("block radii must be strictly increasing")
    z = ZeroSet(r.astype(complex), np.full(r.size, 5, dtype=np.int64), ("f2",) * r.size)
    if include_tail and sched.tail_multiplicity >= 1:
        z = z + ZeroSet([complex(sched.tail_radius)], [sched.tail_multiplicity], ("tail",))
    ratios = [float(r[n + 1] / r[n - 1]) for n in range(1, r.size - 1)]
    return z, ratios


def origin_zeros(corr: OriginCorrection | None) -> ZeroSet:
    """One simple zero per unit of ``nu`` at the centroid of each unit block."""
    if corr is None or corr.N < 1:
        return ZeroSet()
    nu = corr.nu
    order = radial_order(nu.positions)
    pos, mas = nu.positions[order], nu.masses[order]
    out = []
    for _ in range(int(round(corr.N))):
        block, rest = take_mass_in_order(pos, mas, 1.0)
        c = complex(np.dot(block.masses, block.positions) / total_mass(block))
        if c == 0:
            c = complex(block.positions[np.argmax(np.abs(block.positions))])
        out.append(c)
        pos, mas = rest.positions, rest.masses
    return ZeroSet(np.array(out), np.ones(len(out), dtype=np.int64), ("origin",) * len(out))


def assemble_approximant(
    dec: AnnularDecomposition,
    sched: HeavyTailSchedule,
    pairs: list[AtomPair],
    tilde_zeros: ZeroSet,
    include_tail: bool = True,
    tol: float = 1e-6,
) -> ZeroSet:
    """Union of the block zeros, integer-atom zeros and pair zeros.

    The count with multiplicity must equal the consumed mass, rounded.

    Raises
    ------
    ConsistencyError
        If the count differs from the integer part of the mass by more than
        ``tol``.
    """
    f2, _ = build_f2(sched, include_tail=include_tail)
    zp = [z for p in pairs for z in p.zetas]
    pz = ZeroSet(np.array(zp, dtype=complex), np.ones(len(zp), dtype=np.int64), ("pair",) * len(zp))
    zeros = f2 + tilde_zeros + pz + origin_zeros(dec.origin_correction)
    mass = total_mass(dec.mu1_total) + total_mass(dec.mu2)
    if dec.origin_correction is not None:
        mass += dec.origin_correction.N
    expected = mass if include_tail else mass - total_mass(sched.tail)
    if abs(zeros.count - expected) > 0.5 + tol or (
        abs(expected - round(expected)) <= tol and zeros.count != round(expected)
    ):
        raise ConsistencyError(f"zero count {zeros.count} does not match mass {expected}")
    return zeros


# ---------------------------------------------------------------------------
# Pipeline


@dataclass
class Approximation:
    """Everything produced by :func:`approximate`."""

    zeros: ZeroSet
    shift: complex
    decomposition: AnnularDecomposition
    schedule: HeavyTailSchedule
    pairs: list[AtomPair]
    tilde: ZeroSet
    partition_stats: PartitionStats
    pieces_per_annulus: list[int]
    truncation_radius: float | None


def _annulus_pairs(mu: Measure, Rk: float, Rk_out: float, stats: PartitionStats) -> list[AtomPair]:
    theta0 = widest_gap_direction(mu.positions)
    nu = to_log_coords(mu, theta0)
    t_hi = max(2 * np.pi, float(np.max(nu.positions.imag)))
    s_lo = min(math.log(Rk), float(np.min(nu.positions.real)))
    s_hi = max(math.log(Rk_out), float(np.max(nu.positions.real)))
    if s_hi <= s_lo:
        s_hi = s_lo + 1e-12 * max(1.0, abs(s_lo))
    rect = LogRectangle(s_lo, s_hi, 0.0, t_hi)
    pieces, st = partition_with_stats(rect, nu)
    stats.cuts += st.cuts
    stats.shrinks += st.shrinks
    stats.third_violations += st.third_violations
    stats.overlapping += st.overlapping
    stats.max_depth = max(stats.max_depth, st.max_depth)
    return [atomize_pair(p, theta0=theta0) for p in pieces]


def approximate(
    m: Measure,
    psi: SlowlyVarying,
    R1: float | None = None,
    seed: int = 0,
    shift_radius: float | None = None,
    include_tail: bool = True,
    check_annulus_mass: bool = True,
) -> Approximation:
    """Build a zero set whose ``log|f|`` approximates the potential of ``m``.

    Steps: move the origin to a generic nearby point, remove an integer
    mass near the origin, split into annuli, replace the sparse part by
    quintuple zeros, and within each annulus turn atoms of mass at least two
    into even zeros and partition the rest into mass-2 pieces, each
    replaced by a moment-matched pair of simple zeros. Zeros are finally
    translated back to the original coordinates.

    Parameters
    ----------
    m : Measure
    psi : SlowlyVarying
        Controls the annulus widths.
    R1 : float, optional
        First annulus radius (after normalization); defaults to the
        smallest remaining modulus.
    seed : int
        Seed for the generic origin choice.
    shift_radius : float, optional
        Radius of the disk the new origin is drawn from; defaults to
        ``1e-3 * min(1, smallest modulus)``.
    include_tail : bool
        Represent the final sparse mass below five by a rounded zero.
    """
    m = canonicalize(m)
    if len(m) == 0:
        empty = AnnularDecomposition([], [], [], [], [], psi)
        sched = heavy_tail_schedule(Measure(), psi)
        return Approximation(ZeroSet(), 0j, empty, sched, [], ZeroSet(), PartitionStats(), [], None)
    if np.any(m.positions == 0):
        raise MeasureError("atom at the origin: the potential is not normalized")
    if shift_radius is None:
        shift_radius = 1e-3 * min(1.0, float(np.min(m.moduli)))
    shift = generic_origin_shift(m, shift_radius, seed=seed)
    moved = m.translate(-shift)
    rest, corr = normalize_origin(moved)
    if corr is not None and not corr.cleared:
        # mass left inside the unit disk is below one unit; keep it for the tail
        inner = rest.moduli <= 1.0
        stray = rest.select(inner)
        rest = rest.select(~inner)
    else:
        stray = Measure()
    dec = annular_split(rest, psi, R1=R1, origin_correction=corr, check_annulus_mass=check_annulus_mass)
    if len(stray):
        dec.mu3_parts.append(stray)
        dec.mu2_parts.append(Measure())
    sched = heavy_tail_schedule(dec.mu2, psi)
    tilde = ZeroSet()
    pairs: list[AtomPair] = []
    stats = PartitionStats()
    counts = []
    for k, mu1 in enumerate(dec.mu1):
        if len(mu1) == 0:
            counts.append(0)
            continue
        t, remainder = extract_integer_atoms(mu1)
        tilde = tilde + t
        if len(remainder) and total_mass(remainder) > 1e-9:
            Rk = dec.R[k]
            new = _annulus_pairs(remainder, Rk, Rk * psi(Rk), stats)
            pairs.extend(new)
            counts.append(len(new))
        else:
            counts.append(0)
    zeros = assemble_approximant(dec, sched, pairs, tilde, include_tail=include_tail)
    trunc = float(dec.R[-1]) if dec.truncated and dec.R else None
    return Approximation(zeros.translate(shift), shift, dec, sched, pairs, tilde, stats, counts, trunc)

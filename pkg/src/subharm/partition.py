"""Mass-2 rectangle partition of an atomic measure in log coordinates.

A measure of even integer mass supported in a rectangle is split by
cuts perpendicular to the longer side of the current rectangle until
every piece carries mass exactly two. Cuts are placed, whenever
possible, in the middle third of the long side; this keeps the aspect
ratios of all rectangles bounded by ``max(3, l0)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .measure import Measure, MeasureError, canonicalize, total_mass


@dataclass(frozen=True)
class LogRectangle:
    """Axis-aligned rectangle ``[sigma_min, sigma_max] x [t_min, t_max]``."""

    sigma_min: float
    sigma_max: float
    t_min: float
    t_max: float

    def __post_init__(self):
        if not self.sigma_min < self.sigma_max:
            raise MeasureError("LogRectangle needs sigma_min < sigma_max")
        if not self.t_min < self.t_max:
            raise MeasureError("LogRectangle needs t_min < t_max")
        if self.t_max - self.t_min > 2 * math.pi * (1 + 1e-12):
            raise MeasureError("angular side of a LogRectangle exceeds 2*pi")

    @property
    def width(self) -> float:
        return self.sigma_max - self.sigma_min

    @property
    def height(self) -> float:
        return self.t_max - self.t_min

    @property
    def short_side(self) -> float:
        return min(self.width, self.height)

    @property
    def long_side(self) -> float:
        return max(self.width, self.height)

    @property
    def aspect(self) -> float:
        return self.long_side / self.short_side

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def corners(self) -> np.ndarray:
        s0, s1, t0, t1 = self.sigma_min, self.sigma_max, self.t_min, self.t_max
        return np.array([complex(s0, t0), complex(s1, t0), complex(s1, t1), complex(s0, t1)])

    def contains(self, omega, rtol: float = 1e-12) -> np.ndarray:
        omega = np.asarray(omega, dtype=complex)
        es = rtol * max(1.0, abs(self.sigma_min), abs(self.sigma_max))
        et = rtol * max(1.0, abs(self.t_min), abs(self.t_max))
        return (
            (omega.real >= self.sigma_min - es)
            & (omega.real <= self.sigma_max + es)
            & (omega.imag >= self.t_min - et)
            & (omega.imag <= self.t_max + et)
        )

    def contains_rect(self, other: "LogRectangle", rtol: float = 1e-12) -> bool:
        return bool(np.all(self.contains(other.corners, rtol)))

    def interval(self, axis: str) -> tuple[float, float]:
        if axis == "horizontal":
            return self.sigma_min, self.sigma_max
        return self.t_min, self.t_max

    def with_interval(self, axis: str, lo: float, hi: float) -> "LogRectangle":
        if axis == "horizontal":
            return LogRectangle(lo, hi, self.t_min, self.t_max)
        return LogRectangle(self.sigma_min, self.sigma_max, lo, hi)


@dataclass(frozen=True)
class PartitionPiece:
    """A rectangle with the mass-2 measure it carries."""

    rect: LogRectangle
    nu: Measure
    depth: int
    middle_third_ok: bool = True

    @property
    def mass(self) -> float:
        return total_mass(self.nu)


@dataclass
class PartitionStats:
    cuts: int = 0
    shrinks: int = 0
    third_violations: int = 0
    overlapping: int = 0
    max_depth: int = 0

    @property
    def nodes(self) -> int:
        return self.cuts + self.shrinks

    @property
    def ok_fraction(self) -> float:
        if self.nodes == 0:
            return 1.0
        return 1.0 - self.third_violations / self.nodes


def _coords(nu: Measure, axis: str) -> tuple[np.ndarray, np.ndarray]:
    if axis == "horizontal":
        return nu.positions.real, nu.positions.imag
    return nu.positions.imag, nu.positions.real


def _cut_interval(levels, cum, m, tol, hi):
    """Positions ``c`` where the left mass ``m`` is attainable: ``F(c-) <= m <= F(c)``."""
    j = int(np.searchsorted(cum, m - tol, side="left"))
    if abs(cum[j] - m) <= tol:
        upper = levels[j + 1] if j + 1 < levels.size else hi
        return float(levels[j]), float(upper)
    return float(levels[j]), float(levels[j])


def _split_measure(nu: Measure, axis: str, c: float, m: float, tol: float):
    coord, other = _coords(nu, axis)
    order = np.lexsort((other, coord))
    pos, mas, crd = nu.positions[order], nu.masses[order], coord[order]
    left = crd < c
    at = crd == c
    need = m - float(np.sum(mas[left]))
    lp, lm = list(pos[left]), list(mas[left])
    rp, rm = list(pos[crd > c]), list(mas[crd > c])
    for p, w in zip(pos[at], mas[at]):
        if need <= tol:
            rp.append(p)
            rm.append(w)
        elif w <= need + tol:
            lp.append(p)
            lm.append(w)
            need -= w
        else:
            lp.append(p)
            lm.append(need)
            rp.append(p)
            rm.append(w - need)
            need = 0.0
    if abs(need) > 10 * tol:
        raise RuntimeError("internal error: cut does not realise the requested mass")
    return Measure(lp, lm), Measure(rp, rm)


def _child_interval(s0, s1, lo, hi, L, side):
    """Interval of length in ``[L/3, 2L/3]`` inside ``[lo, hi]`` covering ``[s0, s1]``.

    ``side="low"`` pushes it towards ``lo``, ``"high"`` towards ``hi``.
    Returns None when the support is longer than ``2L/3``.
    """
    extent = s1 - s0
    if extent > 2 * L / 3 * (1 + 1e-12):
        return None
    length = min(max(extent, L / 3), 2 * L / 3)
    if side == "low":
        a = max(lo, s1 - length)
        return a, min(hi, a + length)
    b = min(hi, s0 + length)
    return max(lo, b - length), b


def partition_with_stats(
    rect: LogRectangle,
    nu: Measure,
    max_depth: int = 10_000,
    mass_tol: float = 1e-9,
) -> tuple[list[PartitionPiece], PartitionStats]:
    """Like :func:`partition_mass_two` but also returns cut statistics."""
    M = total_mass(nu)
    pairs = round(M / 2)
    if pairs < 1 or abs(M - 2 * pairs) > mass_tol * max(1.0, M):
        raise MeasureError(f"total mass {M} is not a positive even integer")
    if not np.all(rect.contains(nu.positions)):
        raise MeasureError("measure support is not contained in the rectangle")

    stats = PartitionStats()
    pieces: list[PartitionPiece] = []
    # explicit stack; children pushed right-then-left so the left subtree is emitted first
    stack = [(rect, nu, 0, True)]
    while stack:
        r, m, depth, ok = stack.pop()
        stats.max_depth = max(stats.max_depth, depth)
        if depth > max_depth:
            raise RuntimeError(f"partition recursion exceeded depth cap {max_depth}")
        mass = total_mass(m)
        if abs(mass - 2.0) <= mass_tol * max(1.0, mass):
            pieces.append(PartitionPiece(r, m, depth, ok))
            continue
        M = 2 * round(mass / 2)
        tol = mass_tol * max(1.0, M)

        axis = "horizontal" if r.width >= r.height else "vertical"
        lo, hi = r.interval(axis)
        L = hi - lo
        x1, x2 = lo + L / 3, lo + 2 * L / 3
        coord, other = _coords(m, axis)
        order = np.lexsort((other, coord))
        crd, mas = coord[order], m.masses[order]
        levels, starts = np.unique(crd, return_index=True)
        cum = np.cumsum(np.add.reduceat(mas, starts))
        below_x1 = float(np.sum(mas[crd < x1]))
        upto_x2 = float(np.sum(mas[crd <= x2]))

        evens = np.arange(2, M - 1, 2)
        feasible = evens[(evens >= below_x1 - tol) & (evens <= upto_x2 + tol)]
        if feasible.size:
            k = int(np.argmin(np.abs(feasible - M / 2)))  # argmin takes the smaller on ties
            mcut = float(feasible[k])
            a, b = _cut_interval(levels, cum, mcut, tol, hi)
            a, b = max(a, x1), min(b, x2)
            c = 0.5 * (a + b)
            left, right = _split_measure(m, axis, c, mcut, tol)
            stats.cuts += 1
            stack.append((r.with_interval(axis, c, hi), right, depth + 1, ok))
            stack.append((r.with_interval(axis, lo, c), left, depth + 1, ok))
            continue

        cmin, cmax = float(levels[0]), float(levels[-1])
        if cmax <= x1 and not (cmin == cmax == lo):
            stats.shrinks += 1
            stack.append((r.with_interval(axis, lo, x1), m, depth + 1, ok))
            continue
        if cmin >= x2 and not (cmin == cmax == hi):
            stats.shrinks += 1
            stack.append((r.with_interval(axis, x2, hi), m, depth + 1, ok))
            continue

        # No even cut in the middle third. Children may then overlap: each gets an
        # interval of length in [L/3, 2L/3] around its own support, pushed away
        # from its sibling.
        best = None
        for mcut in evens:
            a, b = _cut_interval(levels, cum, float(mcut), tol, hi)
            c = min(max(0.5 * (x1 + x2), a), b)
            left, right = _split_measure(m, axis, c, float(mcut), tol)
            lc, _ = _coords(left, axis)
            rc, _ = _coords(right, axis)
            lrect = _child_interval(float(lc.min()), float(lc.max()), lo, hi, L, "low")
            rrect = _child_interval(float(rc.min()), float(rc.max()), lo, hi, L, "high")
            if lrect is None or rrect is None:
                continue
            overlap = max(0.0, lrect[1] - rrect[0])
            key = (overlap, abs(float(mcut) - M / 2), float(mcut))
            if best is None or key < best[0]:
                best = (key, left, right, lrect, rrect)
        if best is not None:
            _, left, right, lrect, rrect = best
            stats.cuts += 1
            stats.overlapping += best[0][0] > 0
            stack.append((r.with_interval(axis, *rrect), right, depth + 1, ok))
            stack.append((r.with_interval(axis, *lrect), left, depth + 1, ok))
            continue

        # a child support is longer than 2L/3: cut nearest the middle third and
        # extend the short child to length L/3
        k = int(np.argmin(np.abs(evens - M / 2)))
        mcut = float(evens[k])
        a, b = _cut_interval(levels, cum, mcut, tol, hi)
        c = min(max(0.5 * (x1 + x2), a), b)
        left, right = _split_measure(m, axis, c, mcut, tol)
        stats.cuts += 1
        stats.third_violations += 1
        stack.append((r.with_interval(axis, min(c, x2), hi), right, depth + 1, False))
        stack.append((r.with_interval(axis, lo, max(c, x1)), left, depth + 1, False))
    return pieces, stats


def partition_mass_two(
    rect: LogRectangle,
    nu: Measure,
    max_depth: int = 10_000,
    mass_tol: float = 1e-9,
) -> list[PartitionPiece]:
    """Partition ``nu`` into pieces of mass exactly two.

    Parameters
    ----------
    rect : LogRectangle
        Rectangle containing the support of ``nu``.
    nu : Measure
        Atomic measure whose total mass is a positive even integer
        (within ``mass_tol``). Atoms should be in general position: distinct
        atoms with distinct coordinates along both axes.

    Returns
    -------
    list of PartitionPiece
        In construction order (depth-first, lower coordinate first).
    """
    pieces, _ = partition_with_stats(rect, nu, max_depth=max_depth, mass_tol=mass_tol)
    return pieces


# ---------------------------------------------------------------------------
# Verification


@dataclass
class PropertyReport:
    support: bool
    mass: bool
    hulls_disjoint: bool
    aspect: bool
    cover: bool
    max_cover_exact: int = 0
    max_cover_sampled: int = 0
    structural_cover: bool = False
    details: list[str] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return self.support and self.mass and self.hulls_disjoint and self.aspect and self.cover

    def as_dict(self) -> dict:
        return {
            "1_support": self.support,
            "2_mass": self.mass,
            "3_hulls_disjoint": self.hulls_disjoint,
            "4_aspect": self.aspect,
            "5_cover": self.cover,
        }


def _hull(points: np.ndarray):
    from shapely.geometry import MultiPoint

    return MultiPoint([(p.real, p.imag) for p in np.unique(points)]).convex_hull


def max_interior_cover(rects: list[LogRectangle]) -> int:
    """Exact maximum number of rectangle interiors containing a common point."""
    if not rects:
        return 0
    xs = np.unique([v for r in rects for v in (r.sigma_min, r.sigma_max)])
    ys = np.unique([v for r in rects for v in (r.t_min, r.t_max)])
    diff = np.zeros((xs.size + 1, ys.size + 1), dtype=np.int64)
    for r in rects:
        i0, i1 = np.searchsorted(xs, [r.sigma_min, r.sigma_max])
        j0, j1 = np.searchsorted(ys, [r.t_min, r.t_max])
        # open interior covers the grid cells [i0, i1) x [j0, j1)
        diff[i0, j0] += 1
        diff[i1, j0] -= 1
        diff[i0, j1] -= 1
        diff[i1, j1] += 1
    cover = diff.cumsum(axis=0).cumsum(axis=1)
    return int(cover.max())


def verify_partition(
    pieces: list[PartitionPiece],
    rect: LogRectangle,
    nu: Measure,
    samples: int = 10_000,
    seed: int = 0,
    mass_tol: float = 1e-9,
) -> PropertyReport:
    """Check the five partition properties independently of the construction.

    1. every piece's support lies in its rectangle, and rectangles lie in ``rect``;
    2. each piece has mass two and the pieces add up to ``nu``;
    3. interiors of the convex hulls of the piece supports are pairwise disjoint;
    4. aspect ratios lie in ``[1, max(3, l0)]``; a ratio above 3 forces the
       short side to equal the short side of ``rect``;
    5. no point lies in the interiors of more than four piece rectangles
       (exact count on the compressed edge grid plus random sampling).
    """
    details: list[str] = []

    support = True
    for i, p in enumerate(pieces):
        if not np.all(p.rect.contains(p.nu.positions)):
            support = False
            details.append(f"piece {i}: support outside its rectangle")
        if not rect.contains_rect(p.rect):
            support = False
            details.append(f"piece {i}: rectangle leaves the root rectangle")

    mass = True
    for i, p in enumerate(pieces):
        if abs(total_mass(p.nu) - 2.0) > mass_tol:
            mass = False
            details.append(f"piece {i}: mass {total_mass(p.nu)!r}")
    joined = canonicalize(
        Measure(
            np.concatenate([p.nu.positions for p in pieces]) if pieces else [],
            np.concatenate([p.nu.masses for p in pieces]) if pieces else [],
        )
    )
    ref = canonicalize(nu)
    if joined.positions.shape != ref.positions.shape or not np.array_equal(
        joined.positions, ref.positions
    ):
        mass = False
        details.append("pieces do not reassemble the measure (atom positions differ)")
    elif np.max(np.abs(joined.masses - ref.masses), initial=0.0) > mass_tol:
        mass = False
        details.append("pieces do not reassemble the measure (masses differ)")

    hulls_disjoint = True
    area_tol = 1e-12 * rect.area
    hulls = [_hull(p.nu.positions) for p in pieces]
    boxes = [h.bounds for h in hulls]
    for i in range(len(pieces)):
        if hulls[i].area <= area_tol:
            continue
        for j in range(i + 1, len(pieces)):
            if hulls[j].area <= area_tol:
                continue
            a, b = boxes[i], boxes[j]
            if a[2] <= b[0] or b[2] <= a[0] or a[3] <= b[1] or b[3] <= a[1]:
                continue
            if hulls[i].intersection(hulls[j]).area > area_tol:
                hulls_disjoint = False
                details.append(f"pieces {i},{j}: convex hull interiors overlap")

    aspect = True
    l0 = rect.aspect
    bound = max(3.0, l0) * (1 + 1e-9)
    for i, p in enumerate(pieces):
        ratio = p.rect.aspect
        if not (1.0 <= ratio <= bound):
            aspect = False
            details.append(f"piece {i}: aspect {ratio:.6g} outside [1, {bound:.6g}]")
        if ratio > 3 * (1 + 1e-9) and not math.isclose(
            p.rect.short_side, rect.short_side, rel_tol=1e-9
        ):
            aspect = False
            details.append(f"piece {i}: aspect {ratio:.6g} > 3 with a shortened short side")

    exact = max_interior_cover([p.rect for p in pieces])
    rng = np.random.default_rng(seed)
    s = rect.sigma_min + rect.width * rng.random(samples)
    t = rect.t_min + rect.height * rng.random(samples)
    counts = np.zeros(samples, dtype=np.int64)
    for p in pieces:
        r = p.rect
        counts += (s > r.sigma_min) & (s < r.sigma_max) & (t > r.t_min) & (t < r.t_max)
    sampled = int(counts.max(initial=0))
    structural = all(p.middle_third_ok for p in pieces)
    cover = exact <= 4 and sampled <= 4
    if not cover:
        details.append(f"cover multiplicity exact={exact} sampled={sampled}")

    return PropertyReport(
        support=support,
        mass=mass,
        hulls_disjoint=hulls_disjoint,
        aspect=aspect,
        cover=cover,
        max_cover_exact=exact,
        max_cover_sampled=sampled,
        structural_cover=structural and exact <= 1,
        details=details,
    )


def write_pieces_csv(pieces: list[PartitionPiece], path: str | Path) -> None:
    """Rows ``sigma_min,sigma_max,t_min,t_max,mass,depth``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma_min", "sigma_max", "t_min", "t_max", "mass", "depth"])
        for p in pieces:
            r = p.rect
            w.writerow([repr(float(r.sigma_min)), repr(float(r.sigma_max)), repr(float(r.t_min)), repr(float(r.t_max)),
                        repr(float(p.mass)), p.depth])

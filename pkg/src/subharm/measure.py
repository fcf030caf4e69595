"""Finite atomic measures in the plane.

Every measure handled by the package is a finite list of point masses
``(position, mass)`` with complex positions and positive real masses.
Continuous Riesz measures enter through :func:`discretize_radial_density`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class MeasureError(ValueError):
    """Invalid measure data (nonpositive or non-finite masses, bad positions)."""


class MeasureFormatError(MeasureError):
    """Malformed measure text file; ``lineno`` names the offending line."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def angle(z) -> np.ndarray:
    """Argument of ``z`` in ``[0, 2*pi)``."""
    a = np.angle(z)
    return np.where(a < 0, a + TWO_PI, a)


@dataclass(frozen=True)
class Measure:
    """Finite atomic measure: complex ``positions`` with positive ``masses``.

    Instances are immutable. Positions may repeat; :func:`canonicalize`
    merges them.
    """

    positions: np.ndarray
    masses: np.ndarray

    def __init__(self, positions=(), masses=()):
        pos = np.array(positions, dtype=complex).reshape(-1)
        mas = np.array(masses, dtype=float).reshape(-1)
        if pos.shape != mas.shape:
            raise MeasureError(
                f"positions ({pos.size}) and masses ({mas.size}) differ in length"
            )
        if not np.all(np.isfinite(pos)):
            raise MeasureError("non-finite atom position")
        if not np.all(np.isfinite(mas)):
            raise MeasureError("non-finite atom mass")
        if np.any(mas <= 0):
            raise MeasureError("atom masses must be positive")
        pos.setflags(write=False)
        mas.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", mas)

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[complex, float]]) -> "Measure":
        atoms = list(atoms)
        if not atoms:
            return cls()
        pos, mas = zip(*atoms)
        return cls(pos, mas)

    @classmethod
    def empty(cls) -> "Measure":
        return cls()

    def __len__(self) -> int:
        return self.positions.size

    def __add__(self, other: "Measure") -> "Measure":
        return Measure(
            np.concatenate([self.positions, other.positions]),
            np.concatenate([self.masses, other.masses]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Measure):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(
            self.masses, other.masses
        )

    __hash__ = None

    @property
    def atoms(self) -> list[tuple[complex, float]]:
        return [(complex(p), float(m)) for p, m in zip(self.positions, self.masses)]

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.positions)

    def total_mass(self) -> float:
        return total_mass(self)

    def translate(self, offset: complex) -> "Measure":
        return Measure(self.positions + offset, self.masses)

    def map_positions(self, func: Callable[[np.ndarray], np.ndarray]) -> "Measure":
        return Measure(func(self.positions), self.masses)

    def select(self, mask) -> "Measure":
        mask = np.asarray(mask)
        return Measure(self.positions[mask], self.masses[mask])


def total_mass(m: Measure) -> float:
    """Sum of the atom masses (numpy pairwise summation, fixed order)."""
    if len(m) == 0:
        return 0.0
    return float(np.sum(m.masses))


def radial_order(positions) -> np.ndarray:
    """Indices sorting positions by (modulus, angle, real, imag)."""
    positions = np.asarray(positions, dtype=complex)
    # np.lexsort uses the last key as the primary one.
    return np.lexsort((positions.imag, positions.real, angle(positions), np.abs(positions)))


def canonicalize(m: Measure) -> Measure:
    """Merge coincident atoms and sort by (modulus, angle, real, imag).

    >>> canonicalize(Measure([2, 2], [1.0, 0.5])).atoms
    [((2+0j), 1.5)]
    """
    if len(m) == 0:
        return Measure()
    uniq, inverse = np.unique(m.positions, return_inverse=True)
    masses = np.zeros(uniq.size)
    np.add.at(masses, inverse, m.masses)
    order = radial_order(uniq)
    return Measure(uniq[order], masses[order])


# ---------------------------------------------------------------------------
# Regions


@dataclass(frozen=True)
class Region:
    """Disk, annulus, axis-aligned rectangle or the whole plane.

    Use the constructors :meth:`disk`, :meth:`annulus`, :meth:`rectangle`
    and :meth:`plane` rather than building instances directly.
    """

    kind: str
    params: tuple = field(default=())

    def __post_init__(self):
        if self.kind == "disk":
            _, r = self.params
            if not r > 0:
                raise MeasureError("disk radius must be positive")
        elif self.kind == "annulus":
            _, inner, outer = self.params
            if not 0 <= inner < outer:
                raise MeasureError("annulus radii must satisfy 0 <= inner < outer")
        elif self.kind == "rectangle":
            x0, x1, y0, y1 = self.params
            if not (x0 < x1 and y0 < y1):
                raise MeasureError("rectangle sides must be positive")
        elif self.kind != "plane":
            raise MeasureError(f"unknown region kind {self.kind!r}")

    @classmethod
    def disk(cls, radius: float, center: complex = 0j) -> "Region":
        return cls("disk", (complex(center), float(radius)))

    @classmethod
    def annulus(cls, inner: float, outer: float, center: complex = 0j) -> "Region":
        return cls("annulus", (complex(center), float(inner), float(outer)))

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float) -> "Region":
        return cls("rectangle", (float(x0), float(x1), float(y0), float(y1)))

    @classmethod
    def plane(cls) -> "Region":
        return cls("plane", ())

    def contains(self, z, boundary_rule: str = "closed") -> np.ndarray:
        """Membership mask.

        ``"closed"`` includes every boundary point; ``"open-inner"``
        excludes the inner circle of an annulus and the lower-left edges
        of a rectangle (disks and the plane are unaffected).
        """
        if boundary_rule not in ("closed", "open-inner"):
            raise MeasureError(f"unknown boundary rule {boundary_rule!r}")
        z = np.asarray(z, dtype=complex)
        open_inner = boundary_rule == "open-inner"
        if self.kind == "plane":
            return np.ones(z.shape, dtype=bool)
        if self.kind == "disk":
            c, r = self.params
            return np.abs(z - c) <= r
        if self.kind == "annulus":
            c, inner, outer = self.params
            d = np.abs(z - c)
            lower = d > inner if open_inner else d >= inner
            return lower & (d <= outer)
        x0, x1, y0, y1 = self.params
        x, y = z.real, z.imag
        if open_inner:
            return (x > x0) & (x <= x1) & (y > y0) & (y <= y1)
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


def restrict(
    m: Measure,
    region: Region,
    boundary_rule: str = "closed",
    complement: bool = False,
) -> Measure:
    """Atoms of ``m`` inside ``region`` (or outside it with ``complement``)."""
    mask = region.contains(m.positions, boundary_rule)
    if complement:
        mask = ~mask
    return m.select(mask)


# ---------------------------------------------------------------------------
# Quantile splitting


def _axis_coordinate(positions: np.ndarray, axis: str) -> np.ndarray:
    if axis == "horizontal":
        return positions.real
    if axis == "vertical":
        return positions.imag
    raise MeasureError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def split_at_quantile(
    m: Measure, axis: str, target: float, rtol: float = 1e-12
) -> tuple[Measure, Measure, float]:
    """Split ``m`` by a line perpendicular to ``axis`` so the left part has mass ``target``.

    The cut is the smallest coordinate ``c`` with ``m({coord <= c}) >= target``.
    Atoms lying exactly on the cut are divided fractionally, both halves
    keeping the original position.

    Returns
    -------
    left, right : Measure
    cut : float
    """
    total = total_mass(m)
    if not target > 0:
        raise MeasureError("quantile target must be positive")
    if target > total * (1 + rtol):
        raise MeasureError(f"target {target} exceeds total mass {total}")
    coord = _axis_coordinate(m.positions, axis)
    order = np.lexsort((m.positions.imag if axis == "horizontal" else m.positions.real, coord))
    pos, mas, crd = m.positions[order], m.masses[order], coord[order]

    levels, starts = np.unique(crd, return_index=True)
    level_mass = np.add.reduceat(mas, starts)
    cum = np.cumsum(level_mass)
    j = int(np.searchsorted(cum, target * (1 - rtol), side="left"))
    j = min(j, levels.size - 1)
    cut = float(levels[j])

    before = crd < cut
    at = crd == cut
    after = crd > cut
    need = target - (cum[j - 1] if j > 0 else 0.0)
    left_pos = list(pos[before])
    left_mas = list(mas[before])
    right_pos = list(pos[after])
    right_mas = list(mas[after])
    # atoms on the cut line, consumed in order of the other coordinate
    tol = rtol * max(total, 1.0)
    for p, w in zip(pos[at], mas[at]):
        if need <= tol:
            right_pos.append(p)
            right_mas.append(w)
        elif w <= need + tol:
            left_pos.append(p)
            left_mas.append(w)
            need -= w
        else:
            left_pos.append(p)
            left_mas.append(need)
            right_pos.append(p)
            right_mas.append(w - need)
            need = 0.0
    return Measure(left_pos, left_mas), Measure(right_pos, right_mas), cut


def take_mass_in_order(
    positions: np.ndarray, masses: np.ndarray, amount: float, tol: float = 1e-12
) -> tuple[Measure, Measure]:
    """Consume ``amount`` of mass from atoms in the given order.

    The last consumed atom is split fractionally. Returns ``(taken, rest)``.
    """
    taken_pos, taken_mas, rest_pos, rest_mas = [], [], [], []
    need = float(amount)
    for p, w in zip(positions, masses):
        if need <= tol:
            rest_pos.append(p)
            rest_mas.append(w)
        elif w <= need + tol:
            taken_pos.append(p)
            taken_mas.append(w)
            need -= w
        else:
            taken_pos.append(p)
            taken_mas.append(need)
            rest_pos.append(p)
            rest_mas.append(w - need)
            need = 0.0
    return Measure(taken_pos, taken_mas), Measure(rest_pos, rest_mas)


# ---------------------------------------------------------------------------
# Density discretization


def discretize_radial_density(
    n_of_t: Callable[[float], float] | Sequence[tuple[float, float]],
    atoms_per_ring: int,
    radii: Sequence[float] | None = None,
    phase: float = 0.0,
) -> Measure:
    """Replace a radially symmetric measure by rings of equal atoms.

    Parameters
    ----------
    n_of_t : callable or sequence of (radius, mass)
        Either a nondecreasing counting function ``n(t)`` (mass of the closed
        disk of radius ``t``), evaluated at ``radii``, or an explicit list of
        rings.
    atoms_per_ring : int
        Number of equally spaced atoms on each ring.
    radii : sequence of float, optional
        Ring radii, required when ``n_of_t`` is callable. The ring at
        ``radii[j]`` carries ``n(radii[j]) - n(radii[j-1])``.
    phase : float
        Angular offset of the first atom, in units of the atom spacing.
    """
    if atoms_per_ring < 1:
        raise MeasureError("atoms_per_ring must be positive")
    if callable(n_of_t):
        if radii is None:
            raise MeasureError("radii are required for a callable counting function")
        radii = np.asarray(radii, dtype=float)
        counts = np.array([n_of_t(float(t)) for t in radii])
        ring_mass = np.diff(np.concatenate([[0.0], counts]))
        if np.any(ring_mass < -1e-12):
            raise MeasureError("counting function must be nondecreasing")
        rings = list(zip(radii, ring_mass))
    else:
        rings = [(float(r), float(w)) for r, w in n_of_t]

    k = np.arange(atoms_per_ring)
    unit = np.exp(1j * TWO_PI * (k + phase) / atoms_per_ring)
    pos, mas = [], []
    for r, w in rings:
        if w <= 0:
            continue
        if r <= 0:
            raise MeasureError("ring radius must be positive")
        pos.append(r * unit)
        mas.append(np.full(atoms_per_ring, w / atoms_per_ring))
    if not pos:
        return Measure()
    return Measure(np.concatenate(pos), np.concatenate(mas))


# ---------------------------------------------------------------------------
# Generic origin


def _bad_lines(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lines through each pair of atoms and their perpendicular bisectors.

    Each line is returned as ``(point, unit direction)``.
    """
    i, j = np.triu_indices(points.size, k=1)
    p, q = points[i], points[j]
    d = q - p
    u = d / np.abs(d)
    through = (p, u)
    bisect = ((p + q) / 2, 1j * u)
    return (
        np.concatenate([through[0], bisect[0]]),
        np.concatenate([through[1], bisect[1]]),
    )


def generic_origin_shift(
    m: Measure,
    neighborhood_radius: float,
    seed: int = 0,
    max_tries: int = 10_000,
) -> complex:
    """Point ``z'`` with ``|z'| < neighborhood_radius`` in general position for ``m``.

    Every line through ``z'`` and every circle centred at ``z'`` carries at
    most one atom of ``m``. Candidates are drawn uniformly from the disk
    with a seeded generator and rejected when they come close to a line
    through two atoms or to the perpendicular bisector of two atoms.
    """
    if not neighborhood_radius > 0:
        raise MeasureError("neighborhood_radius must be positive")
    pts = canonicalize(m).positions
    rng = np.random.default_rng(seed)
    if pts.size >= 2:
        base, direction = _bad_lines(pts)
        margin = neighborhood_radius / (10.0 * base.size)
    else:
        base = direction = np.empty(0, dtype=complex)
        margin = 0.0
    atom_margin = neighborhood_radius * 1e-6
    for _ in range(max_tries):
        r = neighborhood_radius * math.sqrt(rng.random()) * (1 - 1e-9)
        z = r * np.exp(1j * TWO_PI * rng.random())
        if pts.size and np.min(np.abs(pts - z)) <= atom_margin:
            continue
        if base.size:
            w = z - base
            dist = np.abs(w.real * direction.imag - w.imag * direction.real)
            if np.min(dist) <= margin:
                continue
        return complex(z)
    raise RuntimeError("failed to find a generic origin; measure is too crowded")


def verify_generic_origin(m: Measure, z0: complex, rtol: float = 1e-12) -> dict:
    """Exhaustive check of the two general-position conditions at ``z0``.

    Works directly from pairwise data: collinearity of ``z0`` with every
    pair of atoms (cross product) and equality of the distances from
    ``z0`` to both atoms of a pair (circle coincidence).

    Returns a dict with boolean ``lines``, ``circles``, ``not_atom`` and
    ``ok`` plus the offending pairs.
    """
    pts = np.unique(np.asarray(m.positions, dtype=complex))
    v = pts - z0
    scale = max(float(np.max(np.abs(v))) if v.size else 1.0, 1e-300)
    not_atom = bool(np.all(np.abs(v) > rtol * scale))
    bad_lines, bad_circles = [], []
    n = v.size
    for a in range(n):
        for b in range(a + 1, n):
            cross = v[a].real * v[b].imag - v[a].imag * v[b].real
            if abs(cross) <= rtol * abs(v[a]) * abs(v[b]):
                bad_lines.append((complex(pts[a]), complex(pts[b])))
            if abs(abs(v[a]) - abs(v[b])) <= rtol * max(abs(v[a]), abs(v[b])):
                bad_circles.append((complex(pts[a]), complex(pts[b])))
    return {
        "lines": not bad_lines,
        "circles": not bad_circles,
        "not_atom": not_atom,
        "ok": not bad_lines and not bad_circles and not_atom,
        "bad_lines": bad_lines,
        "bad_circles": bad_circles,
    }


# ---------------------------------------------------------------------------
# Text format


def read_measure(path: str | Path) -> Measure:
    """Read ``re im mass`` lines; ``#`` starts a comment."""
    pos, mas = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise MeasureFormatError(f"expected 're im mass', got {raw.strip()!r}", lineno)
            try:
                re_, im_, w = (float(x) for x in parts)
            except ValueError:
                raise MeasureFormatError(f"not a number in {raw.strip()!r}", lineno) from None
            if not all(math.isfinite(x) for x in (re_, im_, w)):
                raise MeasureFormatError("NaN or infinite value", lineno)
            if w <= 0:
                raise MeasureFormatError(f"nonpositive mass {w}", lineno)
            pos.append(complex(re_, im_))
            mas.append(w)
    return Measure(pos, mas)


def write_measure(m: Measure, path: str | Path, header: str | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for p, w in zip(m.positions, m.masses):
            fh.write(f"{float(p.real)!r} {float(p.imag)!r} {float(w)!r}\n")

"""Counting functions, circle means and the L1 disk error.

The central quantity is

    I(R) = int_{|z|<R} |u(z) - log|f(z)| - alpha log|z|| dm(z),

computed by adaptive Gauss quadrature on polar cells. Cells near a
logarithmic singularity carry a closed-form bound on the integral of
``|log|z - a||`` over a disk, so the reported error bound stays honest
where the integrand blows up.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .measure import Measure, MeasureError
from .potential import ZeroSet

TWO_PI = 2 * np.pi
_GX = {n: np.polynomial.legendre.leggauss(n) for n in (5, 8)}


def _atoms(src) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(src, ZeroSet):
        return src.positions, src.multiplicities.astype(float)
    if isinstance(src, Measure):
        return src.positions, src.masses
    raise TypeError(f"expected Measure or ZeroSet, got {type(src).__name__}")


# ---------------------------------------------------------------------------
# Counting functions


def counting_function(src, r):
    """Mass (or zeros with multiplicity) in the closed disk of radius ``r``.

    Examples
    --------
    >>> counting_function(Measure([2, 4, 8], [0.5, 0.5, 0.5]), 5.0)
    1.0
    """
    pos, w = _atoms(src)
    r = np.asarray(r, dtype=float)
    mod = np.abs(pos)
    order = np.argsort(mod, kind="stable")
    cum = np.concatenate([[0.0], np.cumsum(w[order])])
    out = cum[np.searchsorted(mod[order], r, side="right")]
    return float(out) if out.ndim == 0 else out


def integrated_counting(src, r):
    """``N(r) = int_0^r n(t)/t dt = sum_{|a| <= r} w log(r/|a|)``."""
    pos, w = _atoms(src)
    mod = np.abs(pos)
    if np.any(mod == 0):
        raise MeasureError("mass at the origin: N(r) diverges")
    r = np.asarray(r, dtype=float)
    flat = r.reshape(-1)
    out = np.array([float(np.sum(w[mod <= x] * np.log(x / mod[mod <= x]))) for x in flat])
    out = out.reshape(r.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Circle means


@dataclass(frozen=True)
class Signed:
    """``sum_j w_j log|1 - z/p_j| + alpha log|z|`` with signed weights."""

    positions: np.ndarray
    weights: np.ndarray
    alpha: float = 0.0

    @classmethod
    def difference(cls, u, f=None, alpha: float = 0.0) -> "Signed":
        """``u - log|f| - alpha log|z|``."""
        pu, wu = _atoms(u)
        if f is None:
            return cls(np.asarray(pu, dtype=complex), np.asarray(wu, dtype=float), -alpha)
        pf, wf = _atoms(f)
        # coincident atoms are merged so exact matches cancel exactly
        pos, inv = np.unique(np.concatenate([pu, pf]), return_inverse=True)
        w = np.bincount(inv.reshape(-1), weights=np.concatenate([wu, -wf]), minlength=pos.size)
        keep = np.abs(w) > 1e-12
        return cls(pos[keep], w[keep], -alpha)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1)
        out = np.zeros(flat.shape)
        if self.positions.size:
            # log|1 - z/a| = log|z - a| - log|a| in real arithmetic
            ar, ai = self.positions.real, self.positions.imag
            const = float(np.log(np.abs(self.positions)) @ self.weights)
            half = 0.5 * self.weights
            step = max(1, (1 << 20) // self.positions.size)
            for s in range(0, flat.size, step):
                zr, zi = flat[s:s + step, None].real, flat[s:s + step, None].imag
                d2 = (zr - ar) ** 2 + (zi - ai) ** 2
                out[s:s + step] = np.log(np.maximum(d2, 1e-300)) @ half - const
        if self.alpha:
            out += self.alpha * np.log(np.maximum(np.abs(flat), 1e-300))
        return out.reshape(z.shape)

    def singular_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Positions and absolute weights of the log singularities."""
        pos, w = self.positions, np.abs(self.weights)
        if self.alpha:
            pos = np.concatenate([pos, [0j]])
            w = np.concatenate([w, [abs(self.alpha)]])
        return pos, w


class _SplitField:
    """``g`` on ``|z| <= R`` with atoms beyond ``2R`` summed as a power series.

    ``sum w log|1 - z/a| = -Re sum_k (z^k / k) sum w a^-k`` converges like
    ``2^-k`` there; the near atoms and the ``alpha`` term are evaluated directly.
    """

    def __init__(self, g: Signed, R: float, eps: float = 1e-17):
        far = np.abs(g.positions) > 2 * R
        self.near = Signed(g.positions[~far], g.weights[~far], g.alpha)
        self.coef = np.zeros(0, dtype=complex)
        if np.any(far):
            a, w = g.positions[far], g.weights[far]
            q = float(np.max(R / np.abs(a)))
            K = int(math.ceil(math.log(eps) / math.log(q))) + 1
            k = np.arange(1, K + 1)
            # a^-k by repeated products keeps the powers accurate
            inv = 1.0 / a
            pw = np.cumprod(np.broadcast_to(inv, (K, a.size)), axis=0)
            self.coef = -(pw @ w) / k

    def __call__(self, z):
        out = self.near(z)
        if self.coef.size:
            z = np.asarray(z, dtype=complex)
            acc = np.full(z.shape, self.coef[-1])
            for c in self.coef[-2::-1]:
                acc = acc * z + c
            out = out + (acc * z).real
        return out


def _as_signed(src) -> Signed:
    return src if isinstance(src, Signed) else Signed.difference(src)


def _aliasing_bound(pos, w, r, n) -> float:
    """Error bound for the n-node trapezoid mean of ``w log|1 - z/a|``.

    The Fourier coefficients of ``log|1 - r e^{it}/a|`` decay like
    ``rho^k/(2k)`` with ``rho = min(r/|a|, |a|/r)``; the trapezoid rule
    aliases ``k = n, 2n, ...``.
    """
    mod = np.abs(pos)
    rho = np.minimum(r / mod, mod / r)
    rho = np.minimum(rho, 1 - 1e-16)
    return float(np.sum(np.abs(w) * rho ** n / (n * (1 - rho ** n))))


def circle_mean(src, r: float, nodes: int = 4096, tol: float = 1e-12,
                max_nodes: int = 1 << 20, margin: float = 1e-6) -> float:
    """Mean of ``u`` over the circle ``|z| = r`` by the trapezoid rule.

    ``src`` is a Measure, a ZeroSet or a :class:`Signed` combination. The
    node count is doubled until the aliasing bound falls below ``tol`` or
    ``max_nodes`` is reached.
    """
    s = _as_signed(src)
    pos, w = s.positions, s.weights
    if pos.size:
        rel = np.min(np.abs(np.abs(pos) - r) / r)
        if rel < margin:
            warnings.warn(f"circle |z|={r:g} passes within {rel:.2e} (relative) of an atom",
                          RuntimeWarning, stacklevel=2)
    n = int(nodes)
    while pos.size and _aliasing_bound(pos, w, r, n) > tol and n < max_nodes:
        n *= 2
    t = TWO_PI * (np.arange(n) + 0.5) / n
    return float(np.mean(s(r * np.exp(1j * t))))


def jensen_residual(m: Measure, r: float, nodes: int = 4096, **kw) -> float:
    """``circle_mean(u, r) - N(r) - u(0)``; vanishes by the Jensen formula."""
    return circle_mean(m, r, nodes=nodes, **kw) - integrated_counting(m, r)


def sup_on_circle(src, r: float, nodes: int = 4096) -> float:
    """``max_{|z|=r} u(z)`` from a dense grid plus one Newton step per local max."""
    s = _as_signed(src)
    if s.positions.size == 0:
        return float(s.alpha * math.log(r)) if s.alpha else 0.0
    t = TWO_PI * np.arange(nodes) / nodes
    v = s(r * np.exp(1j * t))
    peaks = np.flatnonzero((v >= np.roll(v, 1)) & (v >= np.roll(v, -1)))
    best = float(np.max(v))
    for j in peaks:
        th = t[j]
        z = r * np.exp(1j * th)
        d = z - s.positions
        d1 = float(np.sum(s.weights * np.real(1j * z / d)))
        d2 = float(np.sum(s.weights * np.real(z * s.positions / d ** 2)))
        if d2 < 0:
            th_new = th - d1 / d2
            if abs(th_new - th) < TWO_PI / nodes:
                best = max(best, float(s(r * np.exp(1j * th_new))))
    return best


# ---------------------------------------------------------------------------
# L1 disk error


def log_disk_bound(rho):
    """``int_{|z|<rho} |log|z|| dm(z)`` in closed form."""
    rho = np.asarray(rho, dtype=float)
    small = np.pi * rho ** 2 * (0.5 - np.log(np.maximum(rho, 1e-300)))
    big = np.pi * (rho ** 2 * np.log(np.maximum(rho, 1e-300)) - rho ** 2 / 2 + 1)
    out = np.where(rho < 1, small, big)
    return float(out) if out.ndim == 0 else out


@dataclass
class QuadResult:
    value: float
    error_bound: float
    cells: int
    converged: bool


def _polar_nodes(r0, r1, t0, t1, n):
    """Gauss nodes (cells x n x n) and matching area weights."""
    x, wq = _GX[n]
    hr, ht = (r1 - r0) / 2, (t1 - t0) / 2
    rr = (r0 + r1)[:, None] / 2 + hr[:, None] * x[None, :]
    tt = (t0 + t1)[:, None] / 2 + ht[:, None] * x[None, :]
    z = rr[:, :, None] * np.exp(1j * tt[:, None, :])
    w = rr[:, :, None] * wq[None, :, None] * wq[None, None, :] * (hr * ht)[:, None, None]
    return z, w


def _polar_distance(pr, pt, r0, r1, t0, t1):
    """Euclidean distance from points to polar cells (broadcast, approximate)."""
    tc = (t0 + t1) / 2
    dt = np.abs(((pt - tc + np.pi) % TWO_PI) - np.pi) - (t1 - t0) / 2
    dt = np.maximum(dt, 0)
    rc = np.clip(pr, r0, r1)
    ang = np.minimum(dt, np.pi)
    d_ang = 2 * np.minimum(pr, rc) * np.sin(ang / 2)
    d_rad = np.where((pr >= r0) & (pr <= r1), 0.0, np.abs(pr - rc))
    return np.hypot(d_rad, d_ang)


def integrate_abs_disk(g: Signed, R: float, rtol: float = 1e-3, atol: float | None = None,
                       max_cells: int = 400_000, sectors: int = 16) -> QuadResult:
    """``int_{|z|<R} |g(z)| dm(z)`` by adaptive polar Gauss cells."""
    if not R > 0:
        raise MeasureError("R must be positive")
    if atol is None:
        atol = 1e-12 * R * R
    # signed singular terms w log|z - a|, coincident points merged; the constants
    # -w log|a| stay in the smooth part
    gp = np.concatenate([g.positions, [0j]]) if g.alpha else g.positions
    gw = np.concatenate([g.weights, [g.alpha]]) if g.alpha else g.weights
    gp, inv = np.unique(gp, return_inverse=True)
    gw = np.bincount(inv.reshape(-1), weights=gw, minlength=gp.size)
    nz = np.abs(gw) > 1e-13
    gp, gw = gp[nz], gw[nz]
    gpr, gpt = np.abs(gp), np.angle(gp) % TWO_PI
    inner = R / 64
    if np.any(gpr > 0):
        inner = min(inner, float(np.min(gpr[gpr > 0])) / 2)
    edges = [0.0]
    e = inner
    while e < R:
        edges.append(e)
        e *= 2
    edges.append(R)
    edges = np.array(edges)
    te = TWO_PI * np.arange(sectors + 1) / sectors
    R0, T0 = np.meshgrid(edges[:-1], te[:-1], indexing="ij")
    R1, T1 = np.meshgrid(edges[1:], te[1:], indexing="ij")
    cells = [a.ravel() for a in (R0, R1, T0, T1)]

    field_ = _SplitField(g, R)

    def smooth_part(r0, r1, t0, t1, n, near):
        """|g| at the nodes with the near singular terms removed."""
        z, w = _polar_nodes(r0, r1, t0, t1, n)
        v = field_(z)
        ci, sj = np.nonzero(near)
        if ci.size:
            v[ci] -= gw[sj, None, None] * np.log(np.maximum(np.abs(z[ci] - gp[sj, None, None]), 1e-300))
        return np.abs(v), w

    def evaluate(r0, r1, t0, t1):
        if gp.size:
            diam = (r1 - r0) + r1 * (t1 - t0)
            d = _polar_distance(gpr[None, :], gpt[None, :], r0[:, None], r1[:, None],
                                t0[:, None], t1[:, None])
            near = d < 0.5 * diam[:, None]
        else:
            diam = d = near = np.zeros((r0.size, 0))
        a8, w8 = smooth_part(r0, r1, t0, t1, 8, near)
        a5, w5 = smooth_part(r0, r1, t0, t1, 5, near)
        q8 = np.einsum("cij,cij->c", a8, w8)
        q5 = np.einsum("cij,cij->c", a5, w5)
        err = np.abs(q8 - q5)
        if np.any(near):
            # |log r| <= (-log r)^+ + log^+ r; the first is decreasing in r, so over a
            # set of area A it integrates to at most its integral over the disk of area A
            area = 0.5 * (r1 ** 2 - r0 ** 2) * (t1 - t0)
            rho_eq = np.sqrt(area / np.pi)
            small = np.pi * rho_eq ** 2 * (0.5 - np.log(np.minimum(rho_eq, 1.0)))
            small = np.where(rho_eq < 1, small, np.pi / 2)
            dmax = d + diam[:, None]
            per = small[:, None] + area[:, None] * np.log(np.maximum(dmax, 1.0))
            err = err + np.sum(np.where(near, np.abs(gw)[None, :] * per, 0.0), axis=1)
        return q8, err

    vals, errs = evaluate(*cells)
    converged = True
    while True:
        total, tot_err = float(np.sum(vals)), float(np.sum(errs))
        if tot_err <= max(rtol * total, atol):
            break
        if vals.size >= max_cells:
            converged = False
            break
        order = np.argsort(errs)[::-1]
        cum = np.cumsum(errs[order])
        k = int(np.searchsorted(cum, 0.5 * tot_err)) + 1
        k = max(1, min(k, 20_000, (max_cells - vals.size) // 3 + 1))
        split = order[:k]
        mask = np.ones(vals.size, dtype=bool)
        mask[split] = False
        r0, r1, t0, t1 = (c[split] for c in cells)
        rm, tm = (r0 + r1) / 2, (t0 + t1) / 2
        nr0 = np.concatenate([r0, r0, rm, rm])
        nr1 = np.concatenate([rm, rm, r1, r1])
        nt0 = np.concatenate([t0, tm, t0, tm])
        nt1 = np.concatenate([tm, t1, tm, t1])
        nv, ne = evaluate(nr0, nr1, nt0, nt1)
        cells = [np.concatenate([c[mask], n]) for c, n in zip(cells, (nr0, nr1, nt0, nt1))]
        vals = np.concatenate([vals[mask], nv])
        errs = np.concatenate([errs[mask], ne])
    # pairwise summation over a fixed cell order keeps results reproducible
    order = np.lexsort((cells[2], cells[0]))
    return QuadResult(float(np.sum(vals[order])), float(np.sum(errs[order])), int(vals.size), converged)


def l1_disk_error(m, f: ZeroSet | None, R: float, alpha: float = 0.0, rtol: float = 1e-3,
                  max_cells: int = 400_000) -> tuple[float, float]:
    """``int_{|z|<R} |u - log|f| - alpha log|z|| dm`` and its error bound.

    If the cell budget runs out the best value is returned together with
    its (larger) bound and a warning.
    """
    res = integrate_abs_disk(Signed.difference(m, f, alpha), R, rtol=rtol, max_cells=max_cells)
    if not res.converged:
        warnings.warn(f"l1_disk_error: tolerance not reached at R={R:g} "
                      f"(bound {res.error_bound:.3g} on {res.value:.3g})", RuntimeWarning, stacklevel=2)
    return res.value, res.error_bound


def monte_carlo_l1(m, f: ZeroSet | None, R: float, samples: int = 1_000_000, seed: int = 0,
                   alpha: float = 0.0, strata: int = 64) -> tuple[float, float]:
    """Stratified Monte Carlo estimate of the L1 disk error and its standard error.

    The disk is cut into ``strata`` annuli of equal area, each sampled
    uniformly with the same number of points.
    """
    g = Signed.difference(m, f, alpha)
    rng = np.random.default_rng(seed)
    per = max(2, samples // strata)
    area = np.pi * R * R / strata
    est, var = 0.0, 0.0
    for i in range(strata):
        u = rng.random(per)
        r = R * np.sqrt((i + u) / strata)
        t = TWO_PI * rng.random(per)
        v = np.abs(g(r * np.exp(1j * t)))
        est += area * float(np.mean(v))
        var += area ** 2 * float(np.var(v, ddof=1)) / per
    return est, math.sqrt(var)


def exceptional_set_density(m, f: ZeroSet | None, K: float, psi, R: float, samples: int = 100_000,
                            seed: int = 0) -> tuple[float, float]:
    """Area fraction of ``{|z| < R: |u - log|f|| > K log psi(|z|)}``.

    Returns the Monte Carlo estimate and a 95% binomial half-width.
    """
    if not R > 1:
        raise MeasureError("R must exceed 1")
    g = Signed.difference(m, f)
    rng = np.random.default_rng(seed)
    r = R * np.sqrt(rng.random(samples))
    z = r * np.exp(1j * TWO_PI * rng.random(samples))
    bad = np.abs(g(z)) > K * np.asarray(psi.log(r))
    p = float(np.mean(bad))
    return p, 1.96 * math.sqrt(max(p * (1 - p), 1.0 / samples) / samples)


# ---------------------------------------------------------------------------
# Reports


@dataclass
class ErrorReport:
    """``I(R)``, the normalization ``R^2 log psi(R)`` and their ratio per radius."""

    radii: list[float]
    I: list[float]
    norm: list[float]
    error_bound: list[float]
    alpha: float = 0.0

    @property
    def ratio(self) -> list[float]:
        return [i / n if n > 0 else math.inf for i, n in zip(self.I, self.norm)]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["R", "I", "norm", "ratio", "error_bound", "alpha"])
            for row in zip(self.radii, self.I, self.norm, self.ratio, self.error_bound):
                w.writerow([repr(float(x)) for x in row] + [repr(float(self.alpha))])


def error_report(m, f: ZeroSet | None, psi, radii, alpha: float = 0.0, rtol: float = 1e-3) -> ErrorReport:
    """Evaluate ``I(R)`` and ``I(R) / (R^2 log psi(R))`` on ``radii``."""
    radii = [float(R) for R in radii]
    vals, bounds = [], []
    for R in radii:
        v, b = l1_disk_error(m, f, R, alpha=alpha, rtol=rtol)
        vals.append(v)
        bounds.append(b)
    norm = [R * R * float(psi.log(R)) for R in radii]
    return ErrorReport(radii, vals, norm, bounds, alpha)


@dataclass
class GapReport:
    """Counting-function comparison between a measure and a zero set."""

    r: list[float]
    n_u: list[float]
    n_f: list[float]
    N_u: list[float]
    N_f: list[float]
    alpha: float
    violations: list[float] = field(default_factory=list)
    pattern: str = ""

    @property
    def gap(self) -> list[float]:
        return [a - b - self.alpha for a, b in zip(self.n_u, self.n_f)]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "n_u", "n_f", "N_u", "N_f", "gap", "violation"])
            bad = set(self.violations)
            for row in zip(self.r, self.n_u, self.n_f, self.N_u, self.N_f, self.gap):
                w.writerow([repr(float(x)) for x in row] + [int(row[0] in bad)])

"""Eigencurves mu -> gamma_n(mu) and their intersections with the parabola -(mu/alpha)^2.

A real number ``lam`` is an eigenvalue of the damped block operator exactly
when ``-lam^2`` is an eigenvalue of ``S_{alpha lam}``.  Writing
``mu = alpha lam`` this is a root of

    f_n(mu) = gamma_n(mu) + (mu / alpha)^2

for some curve ``n``.  The curves are only Lipschitz (constant ``||a||_inf``),
so roots are bracketed on a sampled table, brackets are certified with the
Lipschitz bound of ``f_n`` and roots are polished by bisection against
fresh eigensolves.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import RangeError, SolverError
from .grid import CoefficientSet, Grid, assemble_schrodinger
from .spectra import (
    DEFAULT_TOL,
    EssentialEstimate,
    SpectrumSlice,
    classify,
    essential_threshold_estimate,
    lowest_eigenvalues,
)

__all__ = [
    "SchrodingerFamily",
    "CurveFamily",
    "EigencurveTable",
    "IntersectionRecord",
    "ThresholdRecord",
    "AsymptoticSlope",
    "RealPointCounts",
    "sample_eigencurves",
    "tabulate",
    "default_mu_range",
    "required_curve_count",
    "asymptotic_slope",
    "intersect_all",
    "thresholds",
    "count_real_points",
    "essential_interval",
]

log = logging.getLogger(__name__)

ROOT_TOL = 1e-10
TANGENCY_TOL = 1e-6
LINEAR_TOL = 1e-7


class SchrodingerFamily:
    """Lowest ``k`` eigenvalues of ``S_mu`` (and the essential estimate) on demand.

    Results are memoised per ``mu``; the cache only ever grows, so sharing
    a family between threads is safe.
    """

    def __init__(
        self,
        grid: Grid,
        coeffs: CoefficientSet,
        k: int,
        tol: float = DEFAULT_TOL,
        radii=None,
        seed: int = 0,
    ):
        if k < 1:
            raise ValueError("need at least one curve")
        self.grid = grid
        self.coeffs = coeffs
        self.k = min(int(k), grid.size)
        self.tol = tol
        self.radii = radii
        self.seed = seed
        self.a_min = coeffs.a_min
        self.a_max = coeffs.a_max
        self.a_norm = coeffs.a_norm
        self.has_essential = grid.is_truncated
        self._slices: dict[float, SpectrumSlice] = {}
        self._essential: dict[float, EssentialEstimate] = {}

    def slice(self, mu: float) -> SpectrumSlice:
        mu = float(mu)
        hit = self._slices.get(mu)
        if hit is None:
            op = assemble_schrodinger(self.grid, self.coeffs, mu)
            hit = lowest_eigenvalues(op, self.k, self.tol, seed=self.seed)
            self._slices[mu] = hit
        return hit

    def curves(self, mu: float) -> np.ndarray:
        return self.slice(mu).eigenvalues

    def essential(self, mu: float) -> EssentialEstimate | None:
        if not self.has_essential:
            return None
        mu = float(mu)
        hit = self._essential.get(mu)
        if hit is None:
            hit = essential_threshold_estimate(self.grid, self.coeffs, mu, self.radii, self.tol)
            self._essential[mu] = hit
        return hit


class CurveFamily:
    """Closed-form eigencurves, for oracles and what-if studies.

    ``funcs`` are callables ``mu -> gamma_n(mu)``; they are sorted pointwise
    so the rows keep the min-max ordering.
    """

    def __init__(
        self,
        funcs: Sequence[Callable[[float], float]],
        a_min: float,
        a_max: float,
        essential: Callable[[float], float] | None = None,
    ):
        self.funcs = tuple(funcs)
        self.k = len(self.funcs)
        self.a_min = float(a_min)
        self.a_max = float(a_max)
        self.a_norm = max(abs(a_min), abs(a_max))
        self.tol = 1e-14
        self.has_essential = essential is not None
        self._essential_fn = essential

    def curves(self, mu: float) -> np.ndarray:
        return np.sort([float(f(mu)) for f in self.funcs])

    def essential(self, mu: float) -> EssentialEstimate | None:
        if self._essential_fn is None:
            return None
        val = float(self._essential_fn(mu))
        return EssentialEstimate(float(mu), val, (), ())


@dataclass(frozen=True, eq=False)
class EigencurveTable:
    """Sampled eigencurves ``curves[n-1, j] = gamma_n(mu_samples[j])``.

    ``essential_row`` holds the exterior-zone estimate of ``gamma_inf`` and
    ``essential_lower`` the smallest per-radius value (the ambiguity band).
    ``discrete_mask`` is true where a curve value lies strictly below the band.
    """

    mu_samples: np.ndarray
    curves: np.ndarray
    essential_row: np.ndarray | None
    essential_lower: np.ndarray | None
    discrete_mask: np.ndarray
    lipschitz_bound: float
    solver_tol: float
    residual_max: float
    family: object = field(repr=False)

    @property
    def k(self) -> int:
        return self.curves.shape[0]

    @property
    def mu_range(self) -> tuple[float, float]:
        return float(self.mu_samples[0]), float(self.mu_samples[-1])

    def zero_index(self) -> int:
        hits = np.flatnonzero(self.mu_samples == 0.0)
        if hits.size == 0:
            raise RangeError("table has no mu = 0 sample")
        return int(hits[0])

    def covers(self, mu: float) -> bool:
        lo, hi = self.mu_range
        return lo <= mu <= hi

    def lipschitz_violations(self, slack: float = 2 * DEFAULT_TOL) -> list[tuple[int, int, float]]:
        """Adjacent-sample pairs breaking ``|dgamma| <= ||a|| |dmu| + slack``.

        Returns ``(curve, sample, excess)`` triples, curves counted from 1.
        """
        dmu = np.diff(self.mu_samples)
        dgam = np.abs(np.diff(self.curves, axis=1))
        excess = dgam - (self.lipschitz_bound * dmu + slack)
        bad = np.argwhere(excess > 0)
        return [(int(n) + 1, int(j), float(excess[n, j])) for n, j in bad]

    def with_samples(self, extra: Sequence[float]) -> "EigencurveTable":
        """A new table with ``extra`` mu values merged in."""
        mus = np.union1d(self.mu_samples, np.asarray(extra, dtype=float))
        return tabulate(self.family, mus)


def tabulate(family, mu_samples: Sequence[float], workers: int | None = None) -> EigencurveTable:
    """Evaluate ``family`` on the given ``mu`` samples (sorted, deduplicated)."""
    mus = np.unique(np.asarray(mu_samples, dtype=float))
    if mus.size < 2:
        raise ValueError("need at least two mu samples")

    def one(mu):
        try:
            return family.curves(mu), family.essential(mu)
        except SolverError as exc:
            exc.context.setdefault("mu", float(mu))
            raise

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, mus))
    else:
        rows = [one(mu) for mu in mus]
    curves = np.column_stack([r[0] for r in rows])
    if family.has_essential:
        ess = np.array([r[1].gamma_inf for r in rows])
        low = np.array([r[1].lower for r in rows])
        mask = curves < low[None, :] - family.tol
    else:
        ess = low = None
        mask = np.ones_like(curves, dtype=bool)
    res_max = 0.0
    if isinstance(family, SchrodingerFamily):
        res_max = max(float(family.slice(mu).residuals.max()) for mu in mus)
    return EigencurveTable(
        mu_samples=mus,
        curves=curves,
        essential_row=ess,
        essential_lower=low,
        discrete_mask=mask,
        lipschitz_bound=family.a_norm,
        solver_tol=family.tol,
        residual_max=res_max,
        family=family,
    )


def sample_eigencurves(
    grid: Grid,
    coeffs: CoefficientSet,
    mu_range: tuple[float, float],
    samples: int,
    k: int,
    tol: float = DEFAULT_TOL,
    radii=None,
    workers: int | None = None,
    include_zero: bool = True,
) -> EigencurveTable:
    """Sample the ``k`` lowest eigencurves on ``samples`` equispaced ``mu`` values.

    ``mu = 0`` is added when it lies in the range (``include_zero``), since
    counting and threshold routines read ``S_0`` from the table.  Truncated
    grids also get the essential-threshold row.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    lo, hi = map(float, mu_range)
    if not hi > lo:
        raise ValueError(f"empty mu range ({lo}, {hi})")
    mus = np.linspace(lo, hi, int(samples))
    if include_zero and lo <= 0.0 <= hi:
        mus = np.union1d(mus, [0.0])
    family = SchrodingerFamily(grid, coeffs, k, tol=tol, radii=radii)
    return tabulate(family, mus, workers=workers)


def default_mu_range(gamma1_0: float, a_norm: float, alpha: float) -> tuple[float, float]:
    """Symmetric range outside which no curve can meet the parabola.

    Combines ``alpha^2 * max(1, |gamma_1(0)|, ||a||^2)`` with the bound
    ``alpha^2 ||a|| + alpha sqrt(max(0, -gamma_1(0)))`` beyond which
    ``gamma_1(0) - ||a|| |mu| + (mu/alpha)^2 > 0``.
    """
    big = max(1.0, abs(gamma1_0), a_norm**2)
    certified = alpha**2 * a_norm + alpha * math.sqrt(max(0.0, -gamma1_0))
    m = 1.05 * max(alpha**2 * big, certified)
    return -m, m


def required_curve_count(gamma_0: np.ndarray, a_norm: float, alpha: float) -> int:
    """Number of curves that can meet the parabola at all.

    From ``gamma_n(mu) >= gamma_n(0) - ||a|| |mu|`` a root needs
    ``gamma_n(0) <= (alpha ||a||)^2 / 4``.
    """
    return int(np.count_nonzero(np.asarray(gamma_0) <= (alpha * a_norm) ** 2 / 4.0))


@dataclass(frozen=True)
class AsymptoticSlope:
    curve: int
    side: int
    mu: float
    slope: float
    previous_slope: float
    ratio: float

    @property
    def error(self) -> float:
        return abs(self.slope - self.previous_slope)


def asymptotic_slope(
    table: EigencurveTable, n: int, side: int, onset: float | None = None
) -> AsymptoticSlope:
    """Finite-difference slope of ``gamma_n`` at the extreme sample on ``side``.

    ``ratio`` is ``gamma_n(mu)/mu`` at that sample; both tend to ``a_min``
    (``side=+1``) or ``a_max`` (``side=-1``).  ``onset`` defaults to
    ``100 ||a||_inf``; a table not reaching it raises :class:`RangeError`.
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    if not 1 <= n <= table.k:
        raise ValueError(f"curve {n} not in table (k={table.k})")
    onset = 100.0 * max(table.lipschitz_bound, 1e-12) if onset is None else onset
    mus = table.mu_samples
    idx = np.flatnonzero(mus * side > 0)
    if idx.size < 3 or abs(mus[idx]).max() < onset:
        raise RangeError(f"table does not reach |mu| >= {onset} with 3 samples on side {side:+d}")
    order = idx[np.argsort(abs(mus[idx]))]
    i2, i1, i0 = order[-1], order[-2], order[-3]
    g = table.curves[n - 1]
    slope = (g[i2] - g[i1]) / (mus[i2] - mus[i1])
    prev = (g[i1] - g[i0]) / (mus[i1] - mus[i0])
    return AsymptoticSlope(n, side, float(mus[i2]), float(slope), float(prev), float(g[i2] / mus[i2]))


@dataclass(frozen=True)
class IntersectionRecord:
    """A point where an eigencurve (or the essential row) meets the parabola.

    ``curve`` counts from 1; ``None`` marks the essential row.  ``kind`` is
    one of ``transversal``, ``tangency``, ``essential-endpoint`` or
    ``range-warning`` (roots may exist beyond ``mu_star``).
    """

    curve: int | None
    alpha: float
    mu_star: float
    lam: float
    kind: str
    bracket: tuple
    residual: float
    classification: str = "discrete"

    def as_dict(self) -> dict:
        return {
            "curve": "inf" if self.curve is None else self.curve,
            "alpha": self.alpha,
            "mu_star": self.mu_star,
            "lambda": self.lam,
            "kind": self.kind,
            "bracket": list(self.bracket),
            "residual": self.residual,
            "classification": self.classification,
        }


def _bisect(f, lo, hi, flo, fhi, root_tol, max_iter=200):
    """Bisection on a sign change; stops when ``|f| <= root_tol``."""
    if flo == 0.0:
        return lo, 0.0, (lo, lo)
    if fhi == 0.0:
        return hi, 0.0, (hi, hi)
    best = (lo, flo) if abs(flo) < abs(fhi) else (hi, fhi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fm = f(mid)
        if abs(fm) < abs(best[1]):
            best = (mid, fm)
        if abs(fm) <= root_tol:
            break
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return best[0], best[1], (lo, hi)


def _scan(f, mus, vals, lip, root_tol, tangency_tol, max_depth=8):
    """Certified root search for ``f`` on the sampled intervals.

    ``lip(l, r)`` bounds ``|f'|`` on ``[l, r]``.  An interval without a sign
    change is discarded once ``|f(l)| + |f(r)| > lip * (r - l)`` proves it
    root-free; otherwise it is halved, at most ``max_depth`` times.  Runs of
    adjacent intervals still uncertified at that depth are searched for the
    extremum of ``f``: a dip through zero gives two roots, a dip to within
    ``tangency_tol`` of zero a tangency.
    """
    roots, tangents, zeros, leaves = [], [], set(), []
    for x, fx in zip(mus, vals):
        if fx == 0.0:
            zeros.add(float(x))
    stack = [(mus[i], mus[i + 1], vals[i], vals[i + 1], 0) for i in range(len(mus) - 1)]
    stack.reverse()
    while stack:
        l, r, fl, fr, depth = stack.pop()
        if fl != 0.0 and fr != 0.0 and (fl < 0) != (fr < 0):
            roots.append(_bisect(f, l, r, fl, fr, root_tol))
            continue
        if abs(fl) + abs(fr) > lip(l, r) * (r - l):
            continue
        if depth >= max_depth:
            leaves.append((l, r, fl, fr))
            continue
        m = 0.5 * (l + r)
        fm = f(m)
        if fm == 0.0:
            zeros.add(m)
        stack.append((m, r, fm, fr, depth + 1))
        stack.append((l, m, fl, fm, depth + 1))

    clusters = []
    for leaf in leaves:
        if clusters and clusters[-1][1] == leaf[0]:
            l, _, fl, _ = clusters[-1]
            clusters[-1] = (l, leaf[1], fl, leaf[3])
        else:
            clusters.append(leaf)
    for l, r, fl, fr in clusters:
        if fl == 0.0 or fr == 0.0:
            continue
        sign = 1.0 if fl > 0 else -1.0
        opt = minimize_scalar(
            lambda x: sign * f(x), bounds=(l, r), method="bounded",
            options={"xatol": 1e-12 * max(1.0, abs(l), abs(r))},
        )
        x, fx = float(opt.x), sign * float(opt.fun)
        if fx == 0.0:
            zeros.add(x)
        elif (fx < 0) != (fl < 0):
            roots.append(_bisect(f, l, x, fl, fx, root_tol))
            roots.append(_bisect(f, x, r, fx, fr, root_tol))
        elif abs(fx) <= tangency_tol:
            tangents.append((x, fx, (l, r)))

    for z in sorted(zeros):
        # an exact zero is a crossing or a touching point depending on the sides
        d = 1e-9 * max(1.0, abs(z))
        zl, zr = f(z - d), f(z + d)
        if (zl < 0) != (zr < 0):
            roots.append((z, 0.0, (z, z)))
        else:
            tangents.append((z, 0.0, (z - d, z + d)))
    return _dedupe(roots), _dedupe(tangents)


def _dedupe(items, rel=1e-8):
    out = []
    for item in sorted(items, key=lambda t: t[0]):
        if out and abs(item[0] - out[-1][0]) <= rel * max(1.0, abs(item[0])):
            if abs(item[1]) < abs(out[-1][1]):
                out[-1] = item
            continue
        out.append(item)
    return out


def _fit_line(mus, row):
    coef = np.polyfit(mus, row, 1)
    dev = float(np.max(np.abs(np.polyval(coef, mus) - row)))
    return float(coef[0]), float(coef[1]), dev


def intersect_all(
    table: EigencurveTable,
    alpha: float,
    root_tol: float = ROOT_TOL,
    tangency_tol: float = TANGENCY_TOL,
    max_depth: int = 8,
    curves: Sequence[int] | None = None,
    include_essential: bool = True,
) -> list[IntersectionRecord]:
    """All meeting points of the eigencurves with ``mu -> -(mu/alpha)^2``.

    Every root is polished against fresh eigensolves until
    ``|f_n(mu*)| <= root_tol``.  A ``range-warning`` record is appended for
    a curve whose roots cannot be excluded beyond the sampled range.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    alpha = float(alpha)
    fam = table.family
    mus = table.mu_samples
    a_norm = table.lipschitz_bound
    records: list[IntersectionRecord] = []

    def lip(l, r):
        return a_norm + 2.0 * max(abs(l), abs(r)) / alpha**2 + 1e-12

    def classify_at(mu, gamma):
        return classify(gamma, fam.essential(mu), tol=fam.tol) if fam.has_essential else "discrete"

    for n in curves or range(1, table.k + 1):
        def f(mu, n=n):
            return float(fam.curves(mu)[n - 1]) + (mu / alpha) ** 2

        vals = table.curves[n - 1] + (mus / alpha) ** 2
        roots, tangents = _scan(f, mus, vals, lip, root_tol, tangency_tol, max_depth)
        for kind, items in (("transversal", roots), ("tangency", tangents)):
            for x, fx, br in items:
                gamma = -((x / alpha) ** 2)
                records.append(
                    IntersectionRecord(
                        n, alpha, float(x), float(x / alpha), kind, tuple(map(float, br)),
                        float(fx), classify_at(x, gamma),
                    )
                )
        for end, sign in ((0, -1), (-1, 1)):
            mu_end = float(mus[end])
            if not (vals[end] > 0 and sign * mu_end >= alpha**2 * a_norm / 2.0):
                records.append(
                    IntersectionRecord(
                        n, alpha, mu_end, mu_end / alpha, "range-warning", (mu_end, mu_end),
                        float(vals[end]), "unknown",
                    )
                )

    if include_essential and table.essential_row is not None:
        records.extend(_essential_intersections(table, alpha, root_tol))
    records.sort(key=lambda r: (r.curve is None, r.curve or 0, r.mu_star))
    return records


def _essential_intersections(table, alpha, root_tol):
    mus, row = table.mu_samples, table.essential_row
    slope, icpt, dev = _fit_line(mus, row)
    out = []
    if dev <= LINEAR_TOL * max(1.0, float(np.abs(row).max())):
        span = essential_interval(icpt, slope, alpha)
        if span is not None:
            for lam in sorted(set(span)):
                mu = alpha * lam
                res = icpt + slope * mu + (mu / alpha) ** 2
                out.append(
                    IntersectionRecord(
                        None, alpha, mu, lam, "essential-endpoint", span, float(res), "essential"
                    )
                )
        return out
    fam = table.family

    def f(mu):
        return fam.essential(mu).gamma_inf + (mu / alpha) ** 2

    vals = row + (mus / alpha) ** 2
    for i in range(len(mus) - 1):
        fl, fr = vals[i], vals[i + 1]
        if fl == 0.0 or (fl < 0) != (fr < 0):
            x, fx, br = _bisect(f, mus[i], mus[i + 1], fl, fr, root_tol)
            out.append(
                IntersectionRecord(
                    None, alpha, float(x), float(x / alpha), "transversal", br, float(fx), "essential"
                )
            )
    return out


def essential_interval(gamma_inf_0: float, a_inf: float, alpha: float) -> tuple | None:
    """Real interval guaranteed in the essential spectrum of the damped operator.

    Points between the roots of ``x^2 + alpha a_inf x + gamma_inf_0 = 0``;
    ``None`` when the discriminant ``alpha^2 a_inf^2 - 4 gamma_inf_0`` is negative.

    >>> essential_interval(0.0, 1.0, 2.0)
    (-2.0, 0.0)
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    delta = alpha**2 * a_inf**2 - 4.0 * gamma_inf_0
    if delta < 0:
        return None
    root = math.sqrt(delta)
    return (0.5 * (-alpha * a_inf - root), 0.5 * (-alpha * a_inf + root))


@dataclass(frozen=True)
class ThresholdRecord:
    """Smallest ``alpha`` at which curve ``n`` meets the parabola on ``side``.

    ``mechanism`` is ``crossing`` for a curve already below ``min(0, gamma_inf)``
    at ``mu = 0`` (every ``alpha > 0`` works, threshold 0) or one whose
    value at 0 is not positive, and ``tangency`` for a curve starting
    positive that the parabola first touches at ``witness``.
    """

    curve: int
    side: int
    alpha_threshold: float
    witness: float
    mechanism: str
    found: bool = True
    objective_inf: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "curve": self.curve,
            "side": "+" if self.side > 0 else "-",
            "alpha_threshold": self.alpha_threshold,
            "witness_mu": self.witness,
            "mechanism": self.mechanism,
            "found": self.found,
            "objective_inf": self.objective_inf,
        }


def _essential_at(table, j):
    if table.essential_row is None:
        return math.inf
    return float(table.essential_row[j])


def thresholds(table: EigencurveTable, n: int, side: int, refine: bool = True) -> ThresholdRecord:
    """Instability threshold of curve ``n`` on the ``mu`` half-line ``side``.

    The threshold is ``min |mu| / sqrt(-gamma_n(mu))`` over ``mu`` on the
    side with ``gamma_n(mu) < min(0, gamma_inf(mu))``; equivalently the
    smallest ``alpha`` for which ``min f_n = 0``.  It is found by minimising
    ``q(mu) = gamma_n(mu) / mu^2`` (``alpha = 1/sqrt(-q)``) on the table and
    polishing with a bounded scalar search on fresh eigensolves.
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    if not 1 <= n <= table.k:
        raise ValueError(f"curve {n} not in table (k={table.k})")
    mus = table.mu_samples
    g = table.curves[n - 1]
    j0 = table.zero_index()
    g0 = float(g[j0])
    if g0 < min(0.0, _essential_at(table, j0)):
        return ThresholdRecord(n, side, 0.0, 0.0, "crossing", True, 0.0)
    on_side = np.flatnonzero(mus * side > 0)
    ess = table.essential_row if table.essential_row is not None else np.full(mus.shape, np.inf)
    ok = on_side[g[on_side] < np.minimum(0.0, ess[on_side])]
    if ok.size == 0:
        return ThresholdRecord(n, side, math.inf, math.nan, "none", False, math.inf)
    q = g[ok] / mus[ok] ** 2
    best = int(np.argmin(q))
    jbest = int(ok[best])
    mu_best, q_best = float(mus[jbest]), float(q[best])
    if refine:
        fam = table.family
        lo = float(mus[max(jbest - 1, 0)])
        hi = float(mus[min(jbest + 1, len(mus) - 1)])
        if side > 0:
            lo = max(lo, 1e-12 * max(1.0, abs(hi)))
        else:
            hi = min(hi, -1e-12 * max(1.0, abs(lo)))

        def qfun(mu):
            return float(fam.curves(mu)[n - 1]) / mu**2

        opt = minimize_scalar(
            qfun, bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-10 * max(1.0, abs(mu_best))},
        )
        if opt.fun < q_best:
            mu_best, q_best = float(opt.x), float(opt.fun)
    alpha_star = 1.0 / math.sqrt(-q_best)
    mechanism = "tangency" if g0 > 0 else "crossing"
    return ThresholdRecord(n, side, alpha_star, mu_best, mechanism, True, alpha_star)


@dataclass(frozen=True)
class RealPointCounts:
    """Real spectral points of the damped operator predicted at one ``alpha``.

    ``positive``/``negative`` map a classification (``discrete``,
    ``essential``, ``ambiguous``) to a count of intersection records.
    ``assertions`` pairs each guaranteed lower bound with whether it holds.
    """

    alpha: float
    n0: int
    positive: dict
    negative: dict
    essential_flags: dict
    lower_bounds: dict
    assertions: tuple
    warnings: tuple = ()

    @property
    def holds(self) -> bool:
        return all(ok for _, ok in self.assertions)

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "N0": self.n0,
            "positive": dict(self.positive),
            "negative": dict(self.negative),
            "essential_flags": dict(self.essential_flags),
            "lower_bounds": dict(self.lower_bounds),
            "assertions": [{"statement": s, "holds": ok} for s, ok in self.assertions],
            "warnings": list(self.warnings),
        }


def count_real_points(
    table: EigencurveTable,
    alpha: float,
    records: Sequence[IntersectionRecord] | None = None,
) -> RealPointCounts:
    """Count predicted real eigenvalues per sign and check the guaranteed minima.

    ``N0`` counts curves with ``gamma_n(0) < min(0, gamma_inf(0))``.  On a
    side where the essential row stays nonnegative those ``N0`` curves each
    give a real eigenvalue of that sign, and every positive curve whose
    threshold lies below ``alpha`` adds two more.
    """
    if records is None:
        records = intersect_all(table, alpha)
    j0 = table.zero_index()
    ess0 = _essential_at(table, j0)
    g0 = table.curves[:, j0]
    n0 = int(np.count_nonzero(g0 < min(0.0, ess0)))
    counts = {}
    for side, name in ((1, "positive"), (-1, "negative")):
        c = {"discrete": 0, "essential": 0, "ambiguous": 0}
        for r in records:
            if r.kind == "range-warning" or r.curve is None:
                continue
            if r.mu_star * side > 0:
                # a tangency is a double real eigenvalue
                c[r.classification] = c.get(r.classification, 0) + (2 if r.kind == "tangency" else 1)
        counts[name] = c
    flags = {
        "positive": any(r.curve is None and r.lam > 0 for r in records),
        "negative": any(r.curve is None and r.lam < 0 for r in records),
        "zero": any(r.curve is None and r.lam == 0 for r in records),
    }
    bounds, assertions = {}, []
    for side, name in ((1, "positive"), (-1, "negative")):
        mask = table.mu_samples * side >= 0
        ess_ok = table.essential_row is None or bool(np.all(table.essential_row[mask] >= 0))
        if not ess_ok:
            bounds[name] = 0
            continue
        bound = n0
        for n in range(n0 + 1, table.k + 1):
            if g0[n - 1] <= 0:
                continue
            th = thresholds(table, n, side)
            if th.found and th.alpha_threshold < alpha:
                bound += 2
        bounds[name] = bound
        stmt = f"alpha={alpha:g}: at least {bound} {name} real eigenvalue(s) (N0={n0})"
        assertions.append((stmt, counts[name]["discrete"] + counts[name]["ambiguous"] >= bound))
    warnings = tuple(
        f"curve {r.curve}: roots not excluded beyond mu={r.mu_star:g}"
        for r in records
        if r.kind == "range-warning"
    )
    return RealPointCounts(alpha, n0, counts["positive"], counts["negative"], flags, bounds,
                           tuple(assertions), warnings)

"""Lowest eigenvalues of S_mu and exterior-zone estimates of the essential threshold."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .grid import CoefficientSet, Grid, SymmetricOperator, assemble_schrodinger

__all__ = [
    "SpectrumSlice",
    "EssentialEstimate",
    "lowest_eigenvalues",
    "essential_threshold_estimate",
    "default_radii",
    "classify",
]

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_RADIUS_FRACTIONS = (0.5, 0.6, 0.7, 0.8)


@dataclass(frozen=True, eq=False)
class SpectrumSlice:
    """The ``k`` lowest eigenvalues of ``S_mu``, ascending with multiplicity."""

    mu: float
    eigenvalues: np.ndarray
    residuals: np.ndarray
    method: str
    iterations: int = 0
    vectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return len(self.eigenvalues)


def _lowest_dense_tridiagonal(d, e, k):
    vals, vecs = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
    return vals, vecs, "tridiagonal", 1


def _lowest_sparse(mat, k, tol, seed, max_iter):
    n = mat.shape[0]
    if k >= n - 1 or n <= 200:
        vals, vecs = sla.eigh(mat.toarray(), subset_by_index=(0, k - 1))
        return vals, vecs, "dense", 1
    # Gershgorin lower bound, shifted so S - sigma is positive definite
    diag = mat.diagonal()
    gershgorin = diag - (np.asarray(abs(mat).sum(axis=1)).ravel() - np.abs(diag))
    sigma = float(gershgorin.min()) - 1.0
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    try:
        vals, vecs = spla.eigsh(
            mat.tocsc(), k=k, sigma=sigma, which="LM", v0=v0, tol=0.0, maxiter=max_iter
        )
    except spla.ArpackNoConvergence as exc:
        best = np.inf
        if len(exc.eigenvalues):
            r = mat @ exc.eigenvectors - exc.eigenvectors * exc.eigenvalues
            best = float(np.min(np.linalg.norm(r, axis=0)))
        raise SolverError("shift-invert Lanczos did not converge", best_residual=best) from exc
    return vals, vecs, "shift-invert-lanczos", max_iter


def _lowest(mat: sp.spmatrix, k: int, tol: float, tridiagonal: bool, seed: int = 0, max_iter=None):
    n = mat.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"requested k={k} eigenvalues of an {n}x{n} matrix")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if tridiagonal:
        vals, vecs, method, its = _lowest_dense_tridiagonal(mat.diagonal(0), mat.diagonal(1), k)
    else:
        vals, vecs, method, its = _lowest_sparse(mat, k, tol, seed, max_iter or 10 * n)
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(mat @ vecs - vecs * vals, axis=0) / np.linalg.norm(vecs, axis=0)
    if np.any(res > tol):
        raise SolverError(
            f"eigen-residual {res.max():.3g} exceeds tolerance {tol:.3g}",
            best_residual=float(res.min()),
        )
    return vals, vecs, res, method, its


def lowest_eigenvalues(
    op: SymmetricOperator,
    k: int,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    return_vectors: bool = False,
) -> SpectrumSlice:
    """The ``k`` smallest eigenvalues of ``op`` with per-pair residuals.

    1D operators are tridiagonal and solved densely; 2D operators use
    shift-invert Lanczos below the spectrum with a seeded start vector.
    Raises :class:`SolverError` if any residual exceeds ``tol``.
    """
    try:
        vals, vecs, res, method, its = _lowest(
            op.matrix, k, tol, op.grid.dimension == 1, seed=seed
        )
    except SolverError as exc:
        exc.context.setdefault("mu", op.mu)
        raise
    return SpectrumSlice(
        mu=op.mu,
        eigenvalues=vals,
        residuals=res,
        method=method,
        iterations=its,
        vectors=vecs if return_vectors else None,
    )


@dataclass(frozen=True)
class EssentialEstimate:
    """Exterior-zone (sup over compacts) estimate of ``inf sigma_e(S_mu)``.

    ``values[i]`` is the lowest Dirichlet eigenvalue of ``S_mu`` restricted
    to ``{|x| > radii[i]}``; ``gamma_inf`` is the value at the largest radius
    and ``spread`` the range across radii.
    """

    mu: float
    gamma_inf: float
    radii: tuple = ()
    values: tuple = ()
    note: str = ""

    @property
    def spread(self) -> float:
        if not self.values:
            return 0.0
        return float(max(self.values) - min(self.values))

    @property
    def lower(self) -> float:
        return float(min(self.values)) if self.values else self.gamma_inf

    @property
    def monotone(self) -> bool:
        v = np.asarray(self.values)
        return bool(np.all(np.diff(v) >= -1e-8 * max(1.0, np.abs(v).max(initial=0.0))))


def default_radii(grid: Grid) -> tuple:
    radius = min(r for r, t in zip(grid.radius, grid.truncated) if t)
    return tuple(f * radius for f in DEFAULT_RADIUS_FRACTIONS)


def essential_threshold_estimate(
    grid: Grid,
    coeffs: CoefficientSet,
    mu: float,
    radii=None,
    tol: float = DEFAULT_TOL,
) -> EssentialEstimate:
    """Estimate ``gamma_inf(mu)`` from nested exterior zones.

    Bounded grids return the ``+inf`` sentinel (purely discrete spectrum).
    """
    if not grid.is_truncated:
        return EssentialEstimate(mu, float("inf"), note="purely discrete spectrum expected")
    radii = tuple(default_radii(grid) if radii is None else radii)
    limit = min(r for r, t in zip(grid.radius, grid.truncated) if t)
    if list(radii) != sorted(radii) or radii[-1] >= limit:
        raise ValueError(f"radii must be ascending and below the truncation radius {limit}")
    S = assemble_schrodinger(grid, coeffs, mu).matrix
    dist = grid.truncated_distance()
    values = []
    for rho in radii:
        idx = np.flatnonzero(dist > rho)
        if idx.size == 0:
            raise ValueError(f"exterior zone beyond radius {rho} contains no grid nodes")
        sub = S[idx][:, idx].tocsr()
        vals, *_ = _lowest(sub, 1, tol, grid.dimension == 1)
        values.append(float(vals[0]))
    return EssentialEstimate(float(mu), values[-1], radii, tuple(values))


def classify(gamma: float, estimate: EssentialEstimate | None, tol: float = 1e-8) -> str:
    """``'discrete'``, ``'essential'`` or ``'ambiguous'`` relative to the estimate.

    Values inside the band spanned by the per-radius estimates are ambiguous.
    """
    if estimate is None or not np.isfinite(estimate.gamma_inf):
        return "discrete"
    if gamma < estimate.lower - tol:
        return "discrete"
    if gamma > estimate.gamma_inf + tol:
        return "essential"
    return "ambiguous"

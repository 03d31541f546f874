"""Finite-difference grids, sampled coefficients and the Dirichlet operator S_mu.

The discrete Schrödinger operator is

    S_mu = -Delta_h + diag(b) + mu * diag(a)

on the interior nodes of a uniform grid, with homogeneous Dirichlet
values on the (excluded) boundary nodes.  Unbounded directions are
truncated to ``[-R, R]`` with the same Dirichlet condition at ``±R``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Union

import numpy as np
import scipy.sparse as sp

from .errors import CoefficientError, CoefficientValidationError, ConfigError
from .expr import Expression, parse_expression

__all__ = [
    "Grid",
    "CoefficientSet",
    "SymmetricOperator",
    "build_grid",
    "sample_coefficients",
    "assemble_schrodinger",
    "dirichlet_laplacian",
    "s0_norm",
    "l2_norm",
]

CoefficientSpec = Union[str, float, int, Expression, Callable, np.ndarray]


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid of interior nodes in one or two dimensions.

    ``radius[i]`` is set (and ``truncated[i]`` is true) when axis ``i``
    stands in for an unbounded direction; the axis then spans ``[-R, R]``.
    """

    lower: tuple
    upper: tuple
    points: tuple
    truncated: tuple = ()
    radius: tuple = ()

    def __post_init__(self):
        dim = len(self.points)
        if dim not in (1, 2):
            raise ConfigError(f"only 1D and 2D grids are supported, got dimension {dim}")
        if not (len(self.lower) == len(self.upper) == dim):
            raise ConfigError("lower/upper/points must have one entry per axis")
        if not self.truncated:
            object.__setattr__(self, "truncated", (False,) * dim)
        if not self.radius:
            object.__setattr__(self, "radius", (None,) * dim)
        for lo, hi, m in zip(self.lower, self.upper, self.points):
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
                raise ConfigError(f"axis extent ({lo}, {hi}) must be a non-empty finite interval")
            if int(m) != m or m < 3:
                raise ConfigError(f"each axis needs at least 3 interior points, got {m}")

    @property
    def dimension(self) -> int:
        return len(self.points)

    @property
    def spacing(self) -> tuple:
        return tuple((hi - lo) / (m + 1) for lo, hi, m in zip(self.lower, self.upper, self.points))

    @property
    def shape(self) -> tuple:
        return tuple(int(m) for m in self.points)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def is_truncated(self) -> bool:
        return any(self.truncated)

    def axis_coordinates(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.lower[axis] + h * np.arange(1, self.points[axis] + 1)

    def coordinates(self) -> tuple:
        """Flattened node coordinates, x-major (node ``k = i * ny + j``)."""
        axes = [self.axis_coordinates(i) for i in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return tuple(m.ravel() for m in mesh)

    def flat_index(self, *idx: int) -> int:
        return int(np.ravel_multi_index(idx, self.shape))

    def truncated_distance(self) -> np.ndarray:
        """Euclidean distance of each node from the origin along truncated axes."""
        coords = self.coordinates()
        d2 = np.zeros(self.size)
        for axis, (c, t) in enumerate(zip(coords, self.truncated)):
            if t:
                d2 += c**2
        return np.sqrt(d2)

    def boundary_zone(self, fraction: float = 0.1) -> np.ndarray:
        """Mask of nodes in the outermost ``fraction`` of every truncated axis."""
        mask = np.zeros(self.shape, dtype=bool)
        for axis, t in enumerate(self.truncated):
            if not t:
                continue
            m = self.points[axis]
            width = max(1, int(np.ceil(fraction * m)))
            sl = [slice(None)] * self.dimension
            sl[axis] = slice(0, width)
            mask[tuple(sl)] = True
            sl[axis] = slice(m - width, m)
            mask[tuple(sl)] = True
        return mask.ravel()

    def refined(self, factor: int = 2) -> "Grid":
        """Same domain with the spacing divided by ``factor``."""
        pts = tuple((m + 1) * factor - 1 for m in self.points)
        return Grid(self.lower, self.upper, pts, self.truncated, self.radius)

    def enlarged(self, factor: float = 2.0) -> "Grid":
        """Truncation radii scaled by ``factor`` at (approximately) fixed spacing."""
        lower, upper, pts, rad = [], [], [], []
        for lo, hi, m, t, r in zip(self.lower, self.upper, self.points, self.truncated, self.radius):
            if t:
                r2 = r * factor
                m2 = int(round((m + 1) * factor)) - 1
                lower.append(-r2), upper.append(r2), pts.append(m2), rad.append(r2)
            else:
                lower.append(lo), upper.append(hi), pts.append(m), rad.append(None)
        return Grid(tuple(lower), tuple(upper), tuple(pts), self.truncated, tuple(rad))

    def describe(self) -> dict:
        axes = []
        for lo, hi, m, t, r in zip(self.lower, self.upper, self.points, self.truncated, self.radius):
            if t:
                axes.append({"truncated": True, "radius": r, "points": m})
            else:
                axes.append({"lower": lo, "upper": hi, "points": m})
        return {"dimension": self.dimension, "axes": axes}


def build_grid(descriptor: Mapping) -> Grid:
    """Build a :class:`Grid` from a domain descriptor.

    The descriptor has an ``axes`` list; each axis is either
    ``{"lower": l, "upper": u, "points": m}`` or
    ``{"truncated": true, "radius": R, "points": m}``.

    >>> g = build_grid({"axes": [{"lower": 0.0, "upper": 4.0, "points": 3}]})
    >>> g.spacing
    (1.0,)
    """
    try:
        axes = descriptor["axes"]
    except (KeyError, TypeError):
        raise ConfigError("domain descriptor needs an 'axes' list") from None
    if "dimension" in descriptor and int(descriptor["dimension"]) != len(axes):
        raise ConfigError(
            f"dimension {descriptor['dimension']} does not match {len(axes)} axis entries"
        )
    lower, upper, points, trunc, rad = [], [], [], [], []
    for ax in axes:
        m = ax.get("points")
        if m is None or int(m) != m or m <= 0:
            raise ConfigError(f"axis resolution must be a positive integer, got {m!r}")
        if ax.get("truncated", False):
            r = float(ax.get("radius", 0.0))
            if not r > 0:
                raise ConfigError(f"truncation radius must be positive, got {r}")
            lower.append(-r), upper.append(r), trunc.append(True), rad.append(r)
        else:
            lo, hi = float(ax["lower"]), float(ax["upper"])
            if not hi > lo:
                raise ConfigError(f"axis extent ({lo}, {hi}) must be positive")
            lower.append(lo), upper.append(hi), trunc.append(False), rad.append(None)
        points.append(int(m))
    return Grid(tuple(lower), tuple(upper), tuple(points), tuple(trunc), tuple(rad))


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Damping ``a`` and potential ``b`` sampled on the interior nodes."""

    a_values: np.ndarray
    b_values: np.ndarray
    a_min: float
    a_max: float
    b_min: float
    a_inf: float | None = None
    b_inf: float | None = None
    gamma_inf_0: float | None = None

    @property
    def a_norm(self) -> float:
        """``||a||_inf``, the Lipschitz constant of every eigencurve."""
        return max(abs(self.a_min), abs(self.a_max))

    @property
    def indefinite(self) -> bool:
        return self.a_min < 0 < self.a_max


def _evaluate(spec: CoefficientSpec, grid: Grid, name: str) -> np.ndarray:
    if isinstance(spec, np.ndarray):
        vals = np.asarray(spec, dtype=float).ravel()
        if vals.size != grid.size:
            raise CoefficientError(f"{name}: array has {vals.size} entries, grid has {grid.size}")
        return vals.copy()
    if isinstance(spec, (str, int, float)) and not isinstance(spec, bool):
        spec = parse_expression(spec)
    coords = grid.coordinates()
    if isinstance(spec, Expression):
        return spec(*coords)
    if callable(spec):
        return np.broadcast_to(np.asarray(spec(*coords), dtype=float), (grid.size,)).copy()
    raise CoefficientError(f"{name}: unsupported coefficient specification {spec!r}")


def sample_coefficients(
    grid: Grid,
    a_spec: CoefficientSpec,
    b_spec: CoefficientSpec,
    a_inf: float | None = None,
    b_inf: float | None = None,
    gamma_inf_0: float | None = None,
    boundary_fraction: float = 0.1,
    inf_tolerance: float = 1e-2,
) -> CoefficientSet:
    """Sample ``a`` and ``b`` on ``grid`` and compute their summary statistics.

    Declared limits ``a_inf``/``b_inf`` are checked against the outermost
    ``boundary_fraction`` of nodes on each truncated axis; a deviation of
    ``inf_tolerance`` or more raises :class:`CoefficientValidationError`.
    """
    a = _evaluate(a_spec, grid, "a")
    b = _evaluate(b_spec, grid, "b")
    for name, vals in (("a", a), ("b", b)):
        bad = ~np.isfinite(vals)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            where = tuple(float(c[k]) for c in grid.coordinates())
            raise CoefficientError(f"coefficient {name} is not finite at {where}")
    zone = grid.boundary_zone(boundary_fraction) if grid.is_truncated else None
    for name, declared, vals in (("a_inf", a_inf, a), ("b_inf", b_inf, b)):
        if declared is None:
            continue
        if zone is None:
            raise CoefficientValidationError(f"{name} declared but the grid has no truncated axis")
        dev = float(np.max(np.abs(vals[zone] - declared)))
        if dev >= inf_tolerance:
            raise CoefficientValidationError(
                f"declared {name}={declared} deviates by {dev:.3g} from boundary-zone samples "
                f"(tolerance {inf_tolerance})"
            )
    a.setflags(write=False)
    b.setflags(write=False)
    return CoefficientSet(
        a_values=a,
        b_values=b,
        a_min=float(a.min()),
        a_max=float(a.max()),
        b_min=float(b.min()),
        a_inf=None if a_inf is None else float(a_inf),
        b_inf=None if b_inf is None else float(b_inf),
        gamma_inf_0=None if gamma_inf_0 is None else float(gamma_inf_0),
    )


@lru_cache(maxsize=32)
def _laplacian_1d(m: int, h: float) -> sp.csr_matrix:
    main = np.full(m, 2.0 / h**2)
    off = np.full(m - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


@lru_cache(maxsize=16)
def dirichlet_laplacian(grid: Grid) -> sp.csr_matrix:
    """Second-order finite-difference ``-Delta_h`` with Dirichlet rows eliminated."""
    h = grid.spacing
    if grid.dimension == 1:
        return _laplacian_1d(grid.points[0], h[0])
    mx, my = grid.shape
    lx = _laplacian_1d(mx, h[0])
    ly = _laplacian_1d(my, h[1])
    return (sp.kron(lx, sp.identity(my)) + sp.kron(sp.identity(mx), ly)).tocsr()


@dataclass(frozen=True, eq=False)
class SymmetricOperator:
    """Sparse symmetric matrix ``-Delta_h + diag(b) + mu diag(a)``."""

    matrix: sp.csr_matrix
    mu: float
    grid: Grid = field(repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        """Main and first off-diagonal (1D grids only)."""
        if self.grid.dimension != 1:
            raise ValueError("tridiagonal form only exists for 1D grids")
        return self.matrix.diagonal(0), self.matrix.diagonal(1)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def assemble_schrodinger(grid: Grid, coeffs: CoefficientSet, mu: float = 0.0) -> SymmetricOperator:
    """Assemble ``S_mu``; ``mu = 0`` gives ``S_0``."""
    if coeffs.a_values.size != grid.size:
        raise ConfigError("coefficients were sampled on a different grid")
    potential = coeffs.b_values + float(mu) * coeffs.a_values
    mat = (dirichlet_laplacian(grid) + sp.diags(potential, 0, format="csr")).tocsr()
    mat.sort_indices()
    return SymmetricOperator(mat, float(mu), grid)


def s0_norm(S0: SymmetricOperator, coeffs: CoefficientSet, psi: np.ndarray) -> float:
    """Discrete ``||psi||_{s0}``: H^1 norm plus the ``(b - b_min)`` weight.

    Summation by parts makes ``||grad_h psi||^2 + (psi, b psi)`` equal to
    ``h^d psi^* S_0 psi`` exactly, so the norm is
    ``h^d psi^* (S_0 + (1 - b_min)) psi``.
    """
    psi = np.asarray(psi)
    q = np.vdot(psi, S0.matrix @ psi).real + (1.0 - coeffs.b_min) * np.vdot(psi, psi).real
    return float(np.sqrt(max(q, 0.0) * S0.grid.cell_volume))


def l2_norm(grid: Grid, v: np.ndarray) -> float:
    return float(np.sqrt(grid.cell_volume) * np.linalg.norm(v))

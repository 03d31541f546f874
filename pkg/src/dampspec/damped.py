"""The damped wave operator A_alpha as a 2N x 2N block matrix, and its real spectrum.

    A_alpha = [[ 0,    I            ],
               [ -S_0, -alpha diag(a) ]]

acting on pairs ``(psi1, psi2)`` (displacement, velocity).  Its real
eigenvalues are cross-checked against the eigencurve intersections.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .eigencurves import EigencurveTable, IntersectionRecord, intersect_all
from .errors import ConfigError, SolverError, TableExtensionRequired
from .grid import CoefficientSet, SymmetricOperator
from .spectra import lowest_eigenvalues

__all__ = [
    "BlockOperator",
    "SpectrumReport",
    "ValidationSummary",
    "assemble_block",
    "spectrum",
    "cross_validate",
    "qep_residual",
]

log = logging.getLogger(__name__)

REALITY_TOL = 1e-8
DENSE_BUDGET = 4000
MATCH_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """``A_alpha`` built from ``S_0`` and the sampled damping ``a``."""

    S0: SymmetricOperator
    a: np.ndarray = field(repr=False)
    alpha: float

    @property
    def n(self) -> int:
        return self.S0.n

    def apply(self, psi1, psi2):
        """``A_alpha (psi1, psi2) = (psi2, -S_0 psi1 - alpha a psi2)``."""
        return psi2, -(self.S0.matrix @ psi1) - self.alpha * self.a * psi2

    def matvec(self, v: np.ndarray) -> np.ndarray:
        n = self.n
        top, bottom = self.apply(v[:n], v[n:])
        return np.concatenate([top, bottom])

    def sparse(self) -> sp.csr_matrix:
        n = self.n
        eye = sp.identity(n, format="csr")
        damp = sp.diags(-self.alpha * self.a, 0, format="csr")
        return sp.bmat([[None, eye], [-self.S0.matrix, damp]], format="csr")

    def dense(self) -> np.ndarray:
        return self.sparse().toarray()

    def linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator((2 * self.n, 2 * self.n), matvec=self.matvec, dtype=float)


def assemble_block(S0: SymmetricOperator, coeffs: CoefficientSet, alpha: float) -> BlockOperator:
    if not alpha >= 0:
        raise ConfigError(f"alpha must be nonnegative, got {alpha}")
    if S0.mu != 0.0:
        raise ConfigError("the block operator is built from S_0 (mu = 0)")
    return BlockOperator(S0, np.asarray(coeffs.a_values, dtype=float), float(alpha))


def qep_residual(block: BlockOperator, lam: complex, v1: np.ndarray) -> float:
    """Backward error of ``(lam^2 + alpha lam a + S_0) v1 = 0``."""
    r = lam**2 * v1 + block.alpha * lam * block.a * v1 + block.S0.matrix @ v1
    scale = abs(lam) ** 2 + block.alpha * abs(lam) * np.abs(block.a).max(initial=0.0)
    scale += sp.linalg.norm(block.S0.matrix, 1)
    return float(np.linalg.norm(r) / (scale * np.linalg.norm(v1)))


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Eigenvalues of ``A_alpha`` with residuals and the real sublist.

    ``cross_check[i]`` is ``dist(-lam_i^2, lowest-k spectrum of S_{alpha lam_i})``
    for the real eigenvalue ``lam_i`` (filled when ``curve_count`` is given).
    """

    alpha: float
    mode: str
    eigenvalues: np.ndarray
    residuals: np.ndarray
    real_mask: np.ndarray
    real_eigenvalues: np.ndarray
    real_vectors: np.ndarray = field(repr=False)
    qep_residuals: np.ndarray
    cross_check: np.ndarray | None = None
    shifts: tuple = ()

    @property
    def max_real_part(self) -> float:
        return float(self.eigenvalues.real.max())

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "mode": self.mode,
            "count": int(self.eigenvalues.size),
            "real_eigenvalues": self.real_eigenvalues.tolist(),
            "qep_residuals": self.qep_residuals.tolist(),
            "cross_check": None if self.cross_check is None else self.cross_check.tolist(),
            "max_residual": float(self.residuals.max(initial=0.0)),
            "max_real_part": self.max_real_part if self.eigenvalues.size else None,
            "shifts": list(self.shifts),
        }


def _real_part_vector(v1: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(v1)))
    phase = v1[j] / abs(v1[j]) if abs(v1[j]) > 0 else 1.0
    w = (v1 / phase).real
    return w / np.linalg.norm(w)


def _dedupe_eigs(vals, vecs, resid, rel=1e-6):
    """Merge copies found from several shifts, keeping the best-resolved one."""
    keep = []
    for i in np.argsort(resid, kind="stable"):
        if any(abs(vals[i] - vals[j]) <= rel * max(1.0, abs(vals[i])) for j in keep):
            continue
        keep.append(i)
    keep = np.array(sorted(keep, key=lambda i: (vals[i].real, vals[i].imag)), dtype=int)
    return vals[keep], vecs[:, keep]


def spectrum(
    block: BlockOperator,
    mode: str = "full",
    shifts: Sequence[float] = (),
    k_per_shift: int = 6,
    reality_tol: float = REALITY_TOL,
    dense_budget: int = DENSE_BUDGET,
    curve_count: int | None = None,
    seed: int = 0,
    ritz_tol: float = 1e-12,
) -> SpectrumReport:
    """Eigenvalues of ``A_alpha``.

    ``mode='full'`` is a dense nonsymmetric eigensolve (``2N <= dense_budget``);
    ``mode='real-window'`` runs shift-invert Arnoldi at each real shift and
    keeps the ``k_per_shift`` eigenvalues nearest to it; Ritz pairs whose
    residual exceeds ``ritz_tol * ||A||_1`` are discarded.  An eigenvalue is
    real when ``|Im lam| < reality_tol * max(1, |lam|)``.
    """
    n2 = 2 * block.n
    if mode == "full":
        if n2 > dense_budget:
            raise ConfigError(f"dense solve of size {n2} exceeds budget {dense_budget}; use real-window")
        A = block.dense()
        vals, vecs = sla.eig(A)
    elif mode == "real-window":
        if not len(shifts):
            raise ConfigError("real-window mode needs at least one shift")
        A = block.sparse().tocsc()
        rng = np.random.default_rng(seed)
        kk = min(k_per_shift, n2 - 2)
        all_vals, all_vecs = [], []
        for sigma in shifts:
            try:
                w, v = spla.eigs(A, k=kk, sigma=float(sigma), which="LM", v0=rng.standard_normal(n2))
            except spla.ArpackNoConvergence as exc:
                raise SolverError(f"shift-invert Arnoldi failed at shift {sigma}", shift=sigma) from exc
            except RuntimeError:
                # exactly singular shift: nudge off the eigenvalue
                nudged = float(sigma) + 1e-9 * max(1.0, abs(sigma))
                w, v = spla.eigs(A, k=kk, sigma=nudged, which="LM", v0=rng.standard_normal(n2))
            all_vals.append(w)
            all_vecs.append(v)
        w, v = np.concatenate(all_vals), np.hstack(all_vecs)
        r = np.linalg.norm(A @ v - v * w, axis=0) / np.linalg.norm(v, axis=0)
        # Ritz pairs far from every shift are poorly resolved
        good = r <= ritz_tol * max(1.0, spla.norm(A, 1))
        vals, vecs = _dedupe_eigs(w[good], v[:, good], r[good])
    else:
        raise ConfigError(f"unknown spectrum mode {mode!r}")

    norms = np.linalg.norm(vecs, axis=0)
    resid = np.linalg.norm(A @ vecs - vecs * vals, axis=0) / np.where(norms > 0, norms, 1.0)
    real_mask = np.abs(vals.imag) < reality_tol * np.maximum(1.0, np.abs(vals))
    ridx = np.flatnonzero(real_mask)
    ridx = ridx[np.argsort(vals[ridx].real, kind="stable")]
    reals = vals[ridx].real.copy()
    rvecs = np.column_stack([_real_part_vector(vecs[: block.n, i]) for i in ridx]) if ridx.size else np.zeros((block.n, 0))
    qres = np.array([qep_residual(block, lam, rvecs[:, j]) for j, lam in enumerate(reals)])
    cross = None
    if curve_count is not None:
        cross = np.array([_curve_distance(block, lam, curve_count)[0] for lam in reals])
    return SpectrumReport(
        alpha=block.alpha,
        mode=mode,
        eigenvalues=vals,
        residuals=resid,
        real_mask=real_mask,
        real_eigenvalues=reals,
        real_vectors=rvecs,
        qep_residuals=qres,
        cross_check=cross,
        shifts=tuple(float(s) for s in shifts),
    )


def _curve_distance(block: BlockOperator, lam: float, k: int):
    S0 = block.S0
    # S_{alpha lam} = S_0 + alpha lam diag(a), assembled directly from S_0
    mat = (S0.matrix + sp.diags(block.alpha * lam * block.a, 0)).tocsr()
    op = SymmetricOperator(mat, block.alpha * lam, S0.grid)
    gam = lowest_eigenvalues(op, min(k, op.n)).eigenvalues
    d = np.abs(gam + lam**2)
    j = int(np.argmin(d))
    return float(d[j]), j + 1, gam


@dataclass(frozen=True)
class ValidationSummary:
    """Outcome of comparing the block spectrum with the eigencurve predictions."""

    alpha: float
    n_real: int
    n_predicted: int
    matches: tuple
    mismatches: tuple
    ambiguous_unmatched: tuple = ()
    max_distance: float = 0.0
    real_curves: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "ok": self.ok,
            "n_real": self.n_real,
            "n_predicted": self.n_predicted,
            "max_distance": self.max_distance,
            "matches": list(self.matches),
            "mismatches": list(self.mismatches),
            "ambiguous_unmatched": list(self.ambiguous_unmatched),
            "real_curves": list(self.real_curves),
        }


def cross_validate(
    report: SpectrumReport,
    table: EigencurveTable,
    alpha: float,
    tol: float = MATCH_TOL,
    records: Sequence[IntersectionRecord] | None = None,
    block: BlockOperator | None = None,
) -> ValidationSummary:
    """Check both directions of the real-eigenvalue equivalence.

    Every real ``lam`` of the block spectrum must satisfy
    ``dist(-lam^2, lowest-k spectrum of S_{alpha lam}) <= tol``, and every
    discrete intersection record must have a block eigenvalue within ``tol``
    (tangencies, being double roots, within ``sqrt`` of the tangency tolerance).
    ``real_curves[i]`` is the curve matched by the ``i``-th real eigenvalue
    (0 when unmatched).
    In ``real-window`` reports only predictions near a shift are checked.
    """
    fam = table.family
    outside = [alpha * lam for lam in report.real_eigenvalues if not table.covers(alpha * lam)]
    if outside:
        raise TableExtensionRequired(
            f"{len(outside)} real eigenvalue(s) map outside the table range {table.mu_range}",
            outside,
        )
    mismatches, matches, real_curves = [], [], []
    max_d = 0.0
    for lam in report.real_eigenvalues:
        mu = alpha * lam
        gam = fam.curves(mu)
        d = np.abs(gam + lam**2)
        j = int(np.argmin(d))
        max_d = max(max_d, float(d[j]))
        real_curves.append(j + 1 if d[j] <= tol else 0)
        if d[j] > tol:
            beyond = bool(-(lam**2) > gam[-1])
            mismatches.append({
                "direction": "block->curves",
                "lambda": float(lam),
                "mu": float(mu),
                "distance": float(d[j]),
                "nearest_curve": j + 1,
                "beyond_k": beyond,
            })
    if records is None:
        records = intersect_all(table, alpha) if alpha > 0 else []
    preds = [r for r in records if r.curve is not None and r.kind in ("transversal", "tangency")]
    ambiguous = []
    window = None
    if report.mode == "real-window":
        near = np.abs(report.eigenvalues[None, :] - np.asarray(report.shifts)[:, None]).min(axis=0)
        window = float(near.max(initial=0.0))
    for r in preds:
        if window is not None and min(abs(r.lam - s) for s in report.shifts) > window:
            continue
        if r.kind == "tangency":
            cand = report.eigenvalues
            lim = max(tol, math.sqrt(1e-6))
        else:
            cand = report.real_eigenvalues
            lim = tol
        dist = float(np.min(np.abs(cand - r.lam))) if len(cand) else math.inf
        entry = {"curve": r.curve, "lambda": r.lam, "mu": r.mu_star, "kind": r.kind, "distance": dist}
        if dist <= lim:
            matches.append(entry)
        elif r.classification == "discrete":
            mismatches.append({"direction": "curves->block", **entry})
        else:
            ambiguous.append(entry)
    return ValidationSummary(
        alpha=float(alpha),
        n_real=int(report.real_eigenvalues.size),
        n_predicted=len(preds),
        matches=tuple(matches),
        mismatches=tuple(mismatches),
        ambiguous_unmatched=tuple(ambiguous),
        max_distance=max_d,
        real_curves=tuple(real_curves),
    )

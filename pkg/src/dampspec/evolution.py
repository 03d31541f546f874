"""Time evolution of ``Psi_t = A_alpha Psi`` and the resolvent bounds behind it.

Everything is measured in the discrete energy norm

    ||Psi||_H^2 = ||psi1||_{s0,h}^2 + h^d ||psi2||^2.

The resolvent ``(I - eta A_alpha)^{-1}`` is applied through two solves with
``M = I + eta alpha diag(a) + eta^2 S_0``, and the time stepper is the
trapezoidal rule expressed through that resolvent.
"""

from __future__ import annotations

import logging
import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .damped import BlockOperator, assemble_block
from .errors import ConfigError, RangeError, SolverError
from .grid import CoefficientSet, Grid, assemble_schrodinger

__all__ = [
    "StateVector",
    "SemigroupConstants",
    "DampedSystem",
    "EvolutionTrace",
    "BoundReport",
    "RefinementStudy",
    "ResolventRangeWarning",
    "resolvent_solve",
    "check_apriori_bound",
    "check_resolvent_bound",
    "evolve",
    "growth_rate",
    "check_semigroup_bound",
    "refinement_study",
    "random_state",
]

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
RENORMALIZE_ABOVE = 1e12


class ResolventRangeWarning(UserWarning):
    """``eta`` lies outside the range where solvability is guaranteed."""


@dataclass(frozen=True)
class SemigroupConstants:
    """``eta_alpha = 1 / (2 (1 + alpha |a_min| + |b_min|))`` and ``omega_alpha = 1 / eta_alpha``."""

    eta_alpha: float
    omega_alpha: float

    @classmethod
    def from_coefficients(cls, alpha: float, coeffs: CoefficientSet) -> "SemigroupConstants":
        s = 1.0 + alpha * abs(coeffs.a_min) + abs(coeffs.b_min)
        return cls(0.5 / s, 2.0 * s)


@dataclass(frozen=True, eq=False)
class StateVector:
    """A state ``(psi1, psi2)`` with its cached H-norm."""

    psi1: np.ndarray = field(repr=False)
    psi2: np.ndarray = field(repr=False)
    h_norm: float

    def scaled(self, c: float) -> "StateVector":
        return StateVector(self.psi1 * c, self.psi2 * c, self.h_norm * abs(c))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.psi1, self.psi2])


@dataclass(eq=False)
class DampedSystem:
    """Block operator plus the coefficient data the energy norm needs.

    Factorisations of the reduced matrix are cached per ``eta``.
    """

    block: BlockOperator
    coeffs: CoefficientSet
    _factors: dict = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    @classmethod
    def build(cls, grid: Grid, coeffs: CoefficientSet, alpha: float) -> "DampedSystem":
        S0 = assemble_schrodinger(grid, coeffs, 0.0)
        return cls(assemble_block(S0, coeffs, alpha), coeffs)

    @property
    def alpha(self) -> float:
        return self.block.alpha

    @property
    def n(self) -> int:
        return self.block.n

    @property
    def cell_volume(self) -> float:
        return self.block.S0.grid.cell_volume

    @property
    def constants(self) -> SemigroupConstants:
        return SemigroupConstants.from_coefficients(self.alpha, self.coeffs)

    def s0_norm(self, psi: np.ndarray) -> float:
        q = np.vdot(psi, self.block.S0.matrix @ psi).real
        q += (1.0 - self.coeffs.b_min) * np.vdot(psi, psi).real
        return math.sqrt(max(q, 0.0) * self.cell_volume)

    def l2_norm(self, v: np.ndarray) -> float:
        return math.sqrt(self.cell_volume) * float(np.linalg.norm(v))

    def h_norm(self, psi1: np.ndarray, psi2: np.ndarray) -> float:
        return math.hypot(self.s0_norm(psi1), self.l2_norm(psi2))

    def energy(self, psi1: np.ndarray, psi2: np.ndarray) -> float:
        """Wave energy ``h^d (psi1^T S_0 psi1 + |psi2|^2)``, conserved when ``alpha a = 0``."""
        q = np.vdot(psi1, self.block.S0.matrix @ psi1).real + np.vdot(psi2, psi2).real
        return float(q * self.cell_volume)

    def state(self, psi1, psi2) -> StateVector:
        psi1 = np.asarray(psi1)
        psi2 = np.asarray(psi2)
        if psi1.shape != (self.n,) or psi2.shape != (self.n,):
            raise ValueError(f"state components must have shape ({self.n},)")
        return StateVector(psi1, psi2, self.h_norm(psi1, psi2))

    def apply(self, Psi: StateVector) -> StateVector:
        return self.state(*self.block.apply(Psi.psi1, Psi.psi2))

    def reduced_matrix(self, eta: float) -> sp.csc_matrix:
        """``I + eta alpha diag(a) + eta^2 S_0``."""
        diag = 1.0 + eta * self.alpha * self.block.a
        return (sp.diags(diag, 0) + eta**2 * self.block.S0.matrix).tocsc()

    def factor(self, eta: float):
        with self._lock:
            lu = self._factors.get(eta)
            if lu is None:
                try:
                    lu = spla.splu(self.reduced_matrix(eta))
                except RuntimeError as exc:
                    raise SolverError(f"reduced resolvent system is singular at eta={eta}", eta=eta) from exc
                self._factors[eta] = lu
            return lu


def _check_eta(system: DampedSystem, eta: float) -> None:
    if not eta > 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    if eta >= system.constants.eta_alpha:
        warnings.warn(
            f"eta={eta:.4g} >= eta_alpha={system.constants.eta_alpha:.4g}; "
            "the bound constants no longer apply",
            ResolventRangeWarning,
            stacklevel=3,
        )


def resolvent_solve(system: DampedSystem, eta: float, Phi: StateVector, check: bool = True) -> StateVector:
    """Solve ``Psi - eta A_alpha Psi = Phi``.

    With ``M phi1 = Phi.psi1`` and ``M phi2 = alpha a Phi.psi1 + Phi.psi2``,
    the solution is ``psi1 = phi1 + eta phi2`` and
    ``psi2 = phi2 - (alpha a + eta S_0) phi1``.  The residual is checked in
    the H-norm against ``RESIDUAL_TOL * ||Phi||_H``.
    """
    _check_eta(system, eta)
    lu = system.factor(eta)
    a, S0 = system.block.a, system.block.S0.matrix
    alpha = system.alpha
    rhs = np.column_stack([Phi.psi1, alpha * a * Phi.psi1 + Phi.psi2])
    sol = lu.solve(rhs)
    phi1, phi2 = sol[:, 0], sol[:, 1]
    psi1 = phi1 + eta * phi2
    psi2 = phi2 - alpha * a * phi1 - eta * (S0 @ phi1)
    Psi = system.state(psi1, psi2)
    if check:
        top, bottom = system.block.apply(psi1, psi2)
        r = system.h_norm(psi1 - eta * top - Phi.psi1, psi2 - eta * bottom - Phi.psi2)
        if r > RESIDUAL_TOL * max(Phi.h_norm, np.finfo(float).tiny):
            raise SolverError(
                f"resolvent residual {r:.3g} exceeds {RESIDUAL_TOL:g} * ||Phi||_H",
                best_residual=r,
                eta=eta,
            )
    return Psi


@dataclass(frozen=True)
class BoundReport:
    """``value <= bound * (1 + tol)`` with the ratio ``value / bound``."""

    name: str
    value: float
    bound: float
    tol: float

    @property
    def ratio(self) -> float:
        return self.value / self.bound if self.bound > 0 else math.inf

    @property
    def holds(self) -> bool:
        return self.value <= self.bound * (1.0 + self.tol)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "bound": self.bound,
            "ratio": self.ratio,
            "tol": self.tol,
            "holds": self.holds,
        }


def check_apriori_bound(system: DampedSystem, eta: float, phi: np.ndarray, tol: float = 1e-10) -> BoundReport:
    """Solve ``M psi = phi`` and compare ``||psi||_{s0}`` with ``||phi|| / (sqrt(2) eta)``."""
    _check_eta(system, eta)
    psi = system.factor(eta).solve(np.asarray(phi, dtype=float))
    return BoundReport(
        "apriori",
        system.s0_norm(psi),
        system.l2_norm(phi) / (math.sqrt(2.0) * eta),
        tol,
    )


def check_resolvent_bound(system: DampedSystem, eta: float, Phi: StateVector, tol: float = 1e-10) -> BoundReport:
    """``||(I - eta A)^{-1} Phi||_H <= (1 - eta/eta_alpha)^{-1} ||Phi||_H``."""
    eta_a = system.constants.eta_alpha
    if not 0 < eta < eta_a:
        raise ConfigError(f"the resolvent bound needs 0 < eta < eta_alpha = {eta_a:.6g}")
    Psi = resolvent_solve(system, eta, Phi)
    return BoundReport("resolvent", Psi.h_norm, Phi.h_norm / (1.0 - eta / eta_a), tol)


def random_state(system: DampedSystem, seed: int = 0) -> StateVector:
    rng = np.random.default_rng(seed)
    Psi = system.state(rng.standard_normal(system.n), rng.standard_normal(system.n))
    return Psi.scaled(1.0 / Psi.h_norm)


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    """H-norm history of one trajectory.

    ``log_norms`` is authoritative; ``h_norms`` may overflow for long runs
    because the state itself is renormalised whenever its norm passes 1e12.
    """

    times: np.ndarray
    log_norms: np.ndarray
    dt: float
    steps: int
    scheme: str = "trapezoidal"
    order: int = 2
    alpha: float = 0.0
    renormalizations: int = 0
    energy_drift: float | None = None
    final: StateVector | None = field(default=None, repr=False)

    @property
    def h_norms(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_norms)

    def as_dict(self) -> dict:
        return {
            "dt": self.dt,
            "steps": self.steps,
            "scheme": self.scheme,
            "order": self.order,
            "alpha": self.alpha,
            "renormalizations": self.renormalizations,
            "energy_drift": self.energy_drift,
            "T": float(self.times[-1]),
        }


def default_dt(system: DampedSystem) -> float:
    return min(0.1 * system.constants.eta_alpha, 1e-2)


def evolve(
    system: DampedSystem,
    Psi0: StateVector,
    T: float,
    dt: float | None = None,
) -> EvolutionTrace:
    """Trapezoidal integration: ``(I - dt/2 A) Psi_{k+1} = (I + dt/2 A) Psi_k``.

    ``dt`` is shrunk slightly if needed so that a whole number of steps
    reaches ``T``.  In the undamped case the largest relative change of the
    wave energy (which the scheme conserves exactly) is recorded as
    ``energy_drift``.  The H-norm itself is not conserved there, since it
    carries an extra ``|psi1|^2`` term.
    """
    dt = default_dt(system) if dt is None else float(dt)
    if not dt > 0 or not T >= dt:
        raise ConfigError(f"need dt > 0 and T >= dt, got dt={dt}, T={T}")
    if not (np.all(np.isfinite(Psi0.psi1)) and np.all(np.isfinite(Psi0.psi2))):
        raise ConfigError("initial state is not finite")
    steps = int(math.ceil(T / dt - 1e-9))
    dt = T / steps
    eta = 0.5 * dt
    times = np.arange(steps + 1) * dt
    logs = np.empty(steps + 1)
    if Psi0.h_norm == 0:
        raise ConfigError("initial state is zero")
    logs[0] = math.log(Psi0.h_norm)
    offset = 0.0
    renorm = 0
    Psi = Psi0
    undamped = system.alpha == 0 or not np.any(system.block.a)
    e0 = system.energy(Psi0.psi1, Psi0.psi2) if undamped else 0.0
    drift = 0.0 if undamped and e0 != 0 else None
    for k in range(steps):
        top, bottom = system.block.apply(Psi.psi1, Psi.psi2)
        rhs = system.state(Psi.psi1 + eta * top, Psi.psi2 + eta * bottom)
        try:
            Psi = resolvent_solve(system, eta, rhs)
        except SolverError as exc:
            exc.context["step"] = k
            raise
        if not math.isfinite(Psi.h_norm) or Psi.h_norm == 0:
            raise SolverError(f"state norm degenerated at step {k}", step=k)
        logs[k + 1] = offset + math.log(Psi.h_norm)
        if drift is not None:
            drift = max(drift, abs(system.energy(Psi.psi1, Psi.psi2) / e0 - 1.0))
        if Psi.h_norm > RENORMALIZE_ABOVE:
            offset += math.log(Psi.h_norm)
            Psi = Psi.scaled(1.0 / Psi.h_norm)
            renorm += 1
    return EvolutionTrace(
        times=times,
        log_norms=logs,
        dt=dt,
        steps=steps,
        alpha=system.alpha,
        renormalizations=renorm,
        energy_drift=drift,
        final=Psi,
    )


def growth_rate(trace: EvolutionTrace, tail_fraction: float = 0.5) -> float:
    """Least-squares slope of ``log ||Psi(t)||_H`` over the last ``tail_fraction`` of the run."""
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    n = len(trace.times)
    start = int(math.floor((1.0 - tail_fraction) * (n - 1)))
    t, y = trace.times[start:], trace.log_norms[start:]
    if t.size < 10:
        raise RangeError(f"tail window holds {t.size} samples; need 10 (lengthen T or raise tail_fraction)")
    if not np.all(np.isfinite(y)):
        raise RangeError("non-finite log-norms in the tail window; shorten T or check for underflow")
    slope, _ = np.polyfit(t, y, 1)
    return float(slope)


def scheme_tolerance(trace: EvolutionTrace, omega: float) -> float:
    """Relative slack for the trapezoidal amplification at rate ``omega``.

    ``log((1 + w dt/2) / (1 - w dt/2)) - w dt`` is ``(w dt)^3 / 12`` to leading
    order; it is summed over the steps with a safety factor ``1 + w dt``.
    """
    x = omega * trace.dt
    if x >= 2:
        return math.inf
    per_step = math.log((1 + x / 2) / (1 - x / 2)) - x
    return math.expm1(trace.steps * max(per_step, 0.0) * (1 + x)) + 1e-12


def check_semigroup_bound(
    trace: EvolutionTrace, constants: SemigroupConstants, tol: float | None = None
) -> BoundReport:
    """``||Psi(t)||_H <= e^{omega_alpha t} ||Psi(0)||_H (1 + tol)`` at every sample.

    Compared in log space; the reported value is the worst ratio.
    """
    omega = constants.omega_alpha
    tol = scheme_tolerance(trace, omega) if tol is None else tol
    excess = trace.log_norms - trace.log_norms[0] - omega * trace.times
    worst = float(excess.max())
    return BoundReport("semigroup", math.exp(worst), 1.0, tol)


@dataclass(frozen=True)
class RefinementStudy:
    """Growth rates at ``dt`` and ``dt/2`` with a Richardson estimate."""

    dt: float
    rate: float
    rate_half: float
    extrapolated: float
    order: int = 2

    @property
    def change(self) -> float:
        return abs(self.rate_half - self.rate)

    def as_dict(self) -> dict:
        return {
            "dt": self.dt,
            "rate": self.rate,
            "rate_half": self.rate_half,
            "extrapolated": self.extrapolated,
            "change": self.change,
        }


def refinement_study(
    system: DampedSystem,
    Psi0: StateVector,
    T: float,
    dt: float | None = None,
    tail_fraction: float = 0.5,
) -> tuple[RefinementStudy, EvolutionTrace, EvolutionTrace]:
    dt = default_dt(system) if dt is None else dt
    coarse = evolve(system, Psi0, T, dt)
    fine = evolve(system, Psi0, T, coarse.dt / 2)
    r1 = growth_rate(coarse, tail_fraction)
    r2 = growth_rate(fine, tail_fraction)
    p = coarse.order
    study = RefinementStudy(coarse.dt, r1, r2, r2 + (r2 - r1) / (2**p - 1), p)
    return study, coarse, fine

"""Scenario pipeline: assemble -> eigencurves -> intersections -> block validation -> evolution.

Every stage is timed and tagged; artifacts are written as they are produced
and listed with their SHA-256 in ``manifest.json``, which is written even
when a stage fails.
"""

from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from . import __version__
from . import writers
from .config import ScenarioConfig
from .damped import BlockOperator, SpectrumReport, ValidationSummary, assemble_block, cross_validate, spectrum
from .eigencurves import (
    EigencurveTable,
    count_real_points,
    default_mu_range,
    essential_interval,
    intersect_all,
    required_curve_count,
    sample_eigencurves,
    thresholds,
)
from .errors import CoefficientError, ConfigError, DampSpecError, SolverError, TableExtensionRequired
from .evolution import (
    DampedSystem,
    check_semigroup_bound,
    random_state,
    refinement_study,
)
from .expr import ExpressionError
from .grid import CoefficientSet, Grid, SymmetricOperator, assemble_schrodinger, build_grid, sample_coefficients

__all__ = [
    "EXIT_OK",
    "EXIT_MISMATCH",
    "EXIT_SOLVER",
    "EXIT_CONFIG",
    "OUTPUT_ENV",
    "PipelineError",
    "RunManifest",
    "Pipeline",
    "SweepResult",
    "run_pipeline",
    "sweep_alpha",
]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 2
EXIT_SOLVER = 3
EXIT_CONFIG = 4
OUTPUT_ENV = "DAMPSPEC_OUTPUT_DIR"


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI status: 4 for bad input, 3 otherwise."""
    if isinstance(exc, (ConfigError, CoefficientError, ExpressionError)):
        return EXIT_CONFIG
    return EXIT_SOLVER


class PipelineError(DampSpecError):
    """A stage failed; ``stage`` names it and ``exit_code`` is the CLI status."""

    def __init__(self, stage: str, cause: BaseException, exit_code: int, manifest=None):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = exit_code
        self.manifest = manifest


@dataclass
class RunManifest:
    """Record of one run: config hash, stage timings, artifacts and warnings."""

    config_sha256: str
    scenario: str
    seed: int
    tool_version: str = __version__
    output_dir: str = ""
    stages: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK
    error: dict | None = None

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK

    def as_dict(self) -> dict:
        return {
            "config_sha256": self.config_sha256,
            "scenario": self.scenario,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "output_dir": self.output_dir,
            "stages": self.stages,
            "artifacts": self.artifacts,
            "warnings": self.warnings,
            "summary": self.summary,
            "exit_code": self.exit_code,
            "error": self.error,
        }


def resolve_output_dir(config: ScenarioConfig, override: str | os.PathLike | None = None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(OUTPUT_ENV)
    return Path(env) if env else Path(config.output.directory)


def spectrum_at_zero(S0: SymmetricOperator) -> np.ndarray:
    """All eigenvalues of ``S_0`` (used to size the curve count)."""
    if S0.grid.dimension == 1:
        d, e = S0.tridiagonal()
        return sla.eigvalsh_tridiagonal(d, e)
    return np.linalg.eigvalsh(S0.toarray())


class Pipeline:
    """Stateful driver; each public method is one stage."""

    def __init__(self, config: ScenarioConfig, output_dir=None, figures: bool | None = None):
        self.config = config
        self.out = resolve_output_dir(config, output_dir)
        self.figures = config.output.figures if figures is None else figures
        self.manifest = RunManifest(config.sha256(), config.name, config.seed, output_dir=str(self.out))
        self.grid: Grid | None = None
        self.coeffs: CoefficientSet | None = None
        self.S0: SymmetricOperator | None = None
        self.table: EigencurveTable | None = None
        self.gamma_0: np.ndarray | None = None
        self.records: dict = {}
        self.counts: dict = {}
        self.reports: dict = {}
        self.validations: dict = {}
        self.threshold_records: list = []
        self.mismatch = False

    # bookkeeping

    def _stage(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        entry = {"name": name, "status": "ok"}
        try:
            return fn(*args, **kwargs)
        except PipelineError:
            entry["status"] = "failed"
            raise
        except Exception as exc:
            entry["status"] = "failed"
            code = exit_code_for(exc)
            self.manifest.exit_code = code
            self.manifest.error = {"stage": name, "type": type(exc).__name__, "message": str(exc)}
            if isinstance(exc, SolverError):
                self.manifest.error["best_residual"] = exc.best_residual
                self.manifest.error["context"] = writers.to_jsonable(exc.context)
            raise PipelineError(name, exc, code, self.manifest) from exc
        finally:
            entry["seconds"] = round(time.perf_counter() - t0, 6)
            self.manifest.stages.append(entry)

    def _artifact(self, path: Path) -> Path:
        rel = os.path.relpath(path, self.out)
        self.manifest.artifacts[rel] = writers.sha256_file(path)
        return path

    def _csv(self, name, header, rows):
        return self._artifact(writers.write_csv(self.out / name, header, rows))

    def _json(self, name, payload):
        return self._artifact(writers.write_json(self.out / name, payload))

    def warn(self, message: str) -> None:
        log.warning(message)
        self.manifest.warnings.append(message)

    def finish(self) -> RunManifest:
        if self.mismatch and self.manifest.exit_code == EXIT_OK:
            self.manifest.exit_code = EXIT_MISMATCH
        path = writers.write_json(self.out / "manifest.json", self.manifest)
        log.info("manifest written to %s", path)
        return self.manifest

    # stages

    def setup(self) -> None:
        def _setup():
            cfg = self.config
            self.grid = build_grid(cfg.domain)
            c = cfg.coefficients
            self.coeffs = sample_coefficients(
                self.grid, c.a, c.b, a_inf=c.a_inf, b_inf=c.b_inf, gamma_inf_0=c.gamma_inf_0,
                boundary_fraction=c.boundary_fraction, inf_tolerance=c.inf_tolerance,
            )
            self.S0 = assemble_schrodinger(self.grid, self.coeffs, 0.0)
            self.out.mkdir(parents=True, exist_ok=True)
            self.manifest.summary["grid"] = self.grid.describe()
            self.manifest.summary["coefficients"] = {
                "a_min": self.coeffs.a_min, "a_max": self.coeffs.a_max, "b_min": self.coeffs.b_min,
                "a_inf": self.coeffs.a_inf, "b_inf": self.coeffs.b_inf, "gamma_inf_0": self.coeffs.gamma_inf_0,
            }
            if self.coeffs.a_min >= 0:
                self.warn("a is nonnegative: no instability is expected (sign change required)")

        self._stage("setup", _setup)

    def curves(self, alpha_max: float | None = None) -> EigencurveTable:
        def _curves():
            cfg = self.config
            alphas = [a for a in cfg.alpha if a > 0]
            amax = alpha_max if alpha_max is not None else max(alphas, default=1.0)
            self.gamma_0 = spectrum_at_zero(self.S0)
            need = required_curve_count(self.gamma_0, self.coeffs.a_norm, amax)
            k = min(max(cfg.curves.k, need), self.grid.size)
            if k > cfg.curves.k:
                self.warn(f"curve count raised from {cfg.curves.k} to {k} so every curve that can meet the parabola at alpha={amax:g} is tracked")
            if cfg.curves.mu_range == "auto":
                mu_range = default_mu_range(float(self.gamma_0[0]), self.coeffs.a_norm, amax)
            else:
                mu_range = tuple(cfg.curves.mu_range)
            self.table = sample_eigencurves(
                self.grid, self.coeffs, mu_range, cfg.curves.samples, k,
                tol=cfg.solver.eig_tol, radii=cfg.curves.radii, workers=cfg.solver.workers,
            )
            viol = self.table.lipschitz_violations()
            if len(viol):
                self.mismatch = True
                self.warn(f"{len(viol)} Lipschitz-law violations in the eigencurve table")
            self.threshold_records = [
                thresholds(self.table, n, side) for side in (+1, -1) for n in range(1, k + 1)
            ]
            self._csv("curves.csv", *writers.curve_rows(self.table))
            self._csv("thresholds.csv", *writers.threshold_rows(self.threshold_records))
            self.manifest.summary["curves"] = {
                "k": k,
                "mu_range": list(self.table.mu_range),
                "samples": int(self.table.mu_samples.size),
                "lipschitz_violations": int(len(viol)),
                "residual_max": self.table.residual_max,
                "gamma_0": self.gamma_0[:k].tolist(),
            }
            pos = [t for t in self.threshold_records if t.side > 0 and t.found]
            self.manifest.summary["first_threshold_positive"] = min((t.alpha_threshold for t in pos), default=None)
            return self.table

        return self._stage("curves", _curves)

    def intersections(self, alphas: Sequence[float]) -> dict:
        def _inter():
            cfg = self.config.solver
            for alpha in alphas:
                recs = intersect_all(self.table, alpha, cfg.root_tol, cfg.tangency_tol) if alpha > 0 else []
                self.records[alpha] = recs
                self.counts[alpha] = count_real_points(self.table, alpha, recs)
                for r in recs:
                    if r.kind == "range-warning":
                        self.warn(f"alpha={alpha:g}: roots may lie beyond mu={r.mu_star:g}")
                    if r.classification == "ambiguous":
                        self.warn(f"alpha={alpha:g}: intersection at mu={r.mu_star:.6g} lies in the essential ambiguity band")
                if not self.counts[alpha].holds:
                    self.warn(f"alpha={alpha:g}: guaranteed minimum real-point counts not met")
            self._csv("intersections.csv", *writers.intersection_rows(self.records))
            return self.records

        return self._stage("intersections", _inter)

    def block(self, alpha: float) -> BlockOperator:
        return assemble_block(self.S0, self.coeffs, alpha)

    def spectrum(self, alpha: float) -> SpectrumReport:
        def _spec():
            cfg = self.config.solver
            blk = self.block(alpha)
            k = self.table.k if self.table is not None else None
            if 2 * blk.n <= cfg.dense_budget:
                rep = spectrum(blk, "full", reality_tol=cfg.reality_tol, dense_budget=cfg.dense_budget, curve_count=k)
            else:
                shifts = sorted({0.0} | {r.lam for r in self.records.get(alpha, ()) if r.curve is not None and r.kind in ("transversal", "tangency")})
                rep = spectrum(blk, "real-window", shifts=shifts, reality_tol=cfg.reality_tol, curve_count=k, seed=self.config.seed)
            bad = rep.qep_residuals > 1e-8
            if np.any(bad):
                self.warn(f"alpha={alpha:g}: {int(bad.sum())} real eigenpairs with QEP residual above 1e-8")
            self.reports[alpha] = rep
            return rep

        return self._stage(f"spectrum[alpha={alpha:g}]", _spec)

    def _extend_table(self, mu_values) -> None:
        lo, hi = self.table.mu_range
        m = 1.05 * max(abs(lo), abs(hi), *(abs(v) for v in mu_values))
        step = (hi - lo) / (len(self.table.mu_samples) - 1)
        samples = int(math.ceil(2 * m / step)) + 1
        self.warn(f"table extended from [{lo:g}, {hi:g}] to [{-m:g}, {m:g}] to cover real eigenvalues")
        self.table = sample_eigencurves(
            self.grid, self.coeffs, (-m, m), samples, self.table.k,
            tol=self.config.solver.eig_tol, radii=self.config.curves.radii, workers=self.config.solver.workers,
        )
        cfg = self.config.solver
        for alpha in list(self.records):
            recs = intersect_all(self.table, alpha, cfg.root_tol, cfg.tangency_tol) if alpha > 0 else []
            self.records[alpha] = recs
            self.counts[alpha] = count_real_points(self.table, alpha, recs)
        self._csv("curves.csv", *writers.curve_rows(self.table))
        self._csv("intersections.csv", *writers.intersection_rows(self.records))

    def validate(self, alpha: float) -> ValidationSummary:
        def _val():
            rep = self.reports[alpha]
            tol = self.config.solver.match_tol
            try:
                summary = cross_validate(rep, self.table, alpha, tol, self.records.get(alpha))
            except TableExtensionRequired as exc:
                self._extend_table(exc.mu_values)
                summary = cross_validate(rep, self.table, alpha, tol, self.records.get(alpha))
            if not summary.ok:
                self.mismatch = True
                self.warn(f"alpha={alpha:g}: {len(summary.mismatches)} mismatches between block spectrum and eigencurves")
            for entry in summary.ambiguous_unmatched:
                self.warn(f"alpha={alpha:g}: ambiguous prediction at lambda={entry['lambda']:.6g} has no block eigenvalue")
            self.validations[alpha] = summary
            tag = writers.alpha_tag(alpha)
            matched = dict(enumerate(summary.real_curves))
            self._csv(f"spectrum_alpha_{tag}.csv", *writers.spectrum_rows(rep, matched))
            return summary

        return self._stage(f"validate[alpha={alpha:g}]", _val)

    def instability(self, alpha: float) -> dict:
        """Positive real spectral points, reported only when both paths agree."""
        preds = [r for r in self.records.get(alpha, ()) if r.curve is not None and r.lam > 0
                 and r.kind in ("transversal", "tangency") and r.classification != "essential"]
        summary = self.validations.get(alpha)
        confirmed = []
        if summary is not None:
            matched = {(m["curve"], round(m["lambda"], 12)) for m in summary.matches}
            confirmed = [r.lam for r in preds if (r.curve, round(r.lam, 12)) in matched]
        block_pos = [float(l) for l in self.reports[alpha].real_eigenvalues if l > 0] if alpha in self.reports else []
        return {
            "predicted_positive": [r.lam for r in preds],
            "block_positive": block_pos,
            "confirmed_positive": confirmed,
            "unstable": bool(confirmed),
        }

    def evolution(self) -> dict:
        ev = self.config.evolution

        def _evolve():
            alpha = ev.alpha if ev.alpha is not None else (self.config.alpha[0] if self.config.alpha else 0.0)
            system = DampedSystem(self.block(alpha), self.coeffs)
            rep = self.reports.get(alpha)
            if rep is None and 2 * system.n <= self.config.solver.dense_budget:
                rep = spectrum(system.block, "full", reality_tol=self.config.solver.reality_tol)
            Psi0 = None
            if ev.initial == "dominant":
                if rep is not None and rep.real_eigenvalues.size:
                    j = int(np.argmax(rep.real_eigenvalues))
                    lam, v = rep.real_eigenvalues[j], rep.real_vectors[:, j]
                    Psi0 = system.state(v, lam * v)
                    Psi0 = Psi0.scaled(1.0 / Psi0.h_norm)
                else:
                    self.warn("no real eigenvector available for 'dominant' initial data; using random data")
            if Psi0 is None:
                Psi0 = random_state(system, self.config.seed)
            study, coarse, fine = refinement_study(system, Psi0, ev.T, ev.dt, ev.tail_fraction)
            bound = check_semigroup_bound(fine, system.constants)
            if not bound.holds:
                self.mismatch = True
                self.warn("semigroup bound violated beyond the scheme tolerance")
            reference = rep.max_real_part if rep is not None else None
            result = {
                "alpha": alpha,
                "constants": {"eta_alpha": system.constants.eta_alpha, "omega_alpha": system.constants.omega_alpha},
                "refinement": study.as_dict(),
                "trace": fine.as_dict(),
                "semigroup_bound": bound.as_dict(),
                "reference_rate": reference,
                "relative_rate_error": None if not reference else abs(study.extrapolated - reference) / abs(reference),
            }
            err = result["relative_rate_error"]
            if err is not None and reference > 0 and err > 0.02:
                self.warn(f"growth rate {study.extrapolated:.6g} is {100 * err:.1f}% off the largest real part "
                          f"{reference:.6g}; lengthen T or use initial: dominant")
            self._csv("evolution_trace.csv", *writers.trace_rows(fine))
            self._json("evolution.json", result)
            if self.figures:
                from .plotting import plot_trace

                self._artifact(plot_trace(fine, self.out / "evolution.png", study.extrapolated, system.constants.omega_alpha))
            self.manifest.summary["evolution"] = {
                "alpha": alpha,
                "growth_rate": study.extrapolated,
                "reference_rate": reference,
                "semigroup_bound_holds": bound.holds,
            }
            return result

        return self._stage("evolution", _evolve)

    def write_reports(self, alphas: Sequence[float]) -> None:
        per_alpha = {}
        for alpha in alphas:
            entry = {"counts": self.counts[alpha].as_dict() if alpha in self.counts else None}
            if alpha in self.reports:
                entry["spectrum"] = self.reports[alpha].as_dict()
            if alpha in self.validations:
                entry["validation"] = self.validations[alpha].as_dict()
                entry["instability"] = self.instability(alpha)
            if self.coeffs.a_inf is not None and self.coeffs.gamma_inf_0 is not None and alpha > 0:
                iv = essential_interval(self.coeffs.gamma_inf_0, self.coeffs.a_inf, alpha)
                entry["essential_interval"] = None if iv is None else list(iv)
            per_alpha[writers.alpha_tag(alpha)] = {"alpha": alpha, **entry}
        self._json("validation.json", {"alphas": per_alpha, "thresholds": [t.as_dict() for t in self.threshold_records]})
        self.manifest.summary["alphas"] = {
            tag: {
                "alpha": e["alpha"],
                "validated": e.get("validation", {}).get("ok"),
                "unstable": e.get("instability", {}).get("unstable"),
            }
            for tag, e in per_alpha.items()
        }

    def write_figures(self, alphas: Sequence[float]) -> None:
        if not self.figures:
            return
        from .plotting import plot_eigencurves, plot_spectrum

        if self.table is not None:
            self._artifact(plot_eigencurves(self.table, list(alphas), self.out / "curves.png", self.records))
        for alpha, rep in self.reports.items():
            self._artifact(plot_spectrum(rep, self.out / f"spectrum_alpha_{writers.alpha_tag(alpha)}.png"))


def run_pipeline(
    config: ScenarioConfig,
    output_dir=None,
    stages: Sequence[str] = ("curves", "spectrum", "validate", "evolution"),
    alphas: Sequence[float] | None = None,
    figures: bool | None = None,
) -> RunManifest:
    """Run the requested stages and return the manifest.

    Raises :class:`PipelineError` on a stage failure (after writing the
    manifest); validation mismatches do not raise but set ``exit_code = 2``.
    """
    p = Pipeline(config, output_dir, figures)
    alphas = tuple(config.alpha if alphas is None else alphas)
    try:
        p.setup()
        if "curves" in stages or "validate" in stages:
            p.curves(alpha_max=max([a for a in alphas if a > 0], default=1.0))
            p.intersections(alphas)
        if "spectrum" in stages or "validate" in stages:
            for alpha in alphas:
                p.spectrum(alpha)
                if "validate" in stages:
                    p.validate(alpha)
        if "evolution" in stages and config.evolution is not None:
            p.evolution()
        if p.table is not None or p.reports:
            p.write_reports(alphas)
            p.write_figures(alphas)
    except BaseException:
        p.finish()
        raise
    return p.finish()


@dataclass(frozen=True)
class SweepResult:
    """Outcome of the alpha bisection for the first positive real eigenvalue."""

    found: bool
    alpha0: float | None
    bracket: tuple
    evaluations: tuple
    direct_threshold: float | None = None
    note: str = ""

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def as_dict(self) -> dict:
        return {
            "found": self.found,
            "alpha0": self.alpha0,
            "bracket": list(self.bracket),
            "width": self.width,
            "direct_threshold": self.direct_threshold,
            "evaluations": [dict(e) for e in self.evaluations],
            "note": self.note,
        }


def _positive_validated(p: Pipeline, alpha: float, tol: float) -> dict:
    cfg = p.config.solver
    k = p.table.k
    recs = intersect_all(p.table, alpha, cfg.root_tol, cfg.tangency_tol, curves=range(1, k + 1), include_essential=False)
    preds = [r for r in recs if r.curve is not None and r.lam > 0 and r.kind in ("transversal", "tangency")
             and r.classification != "essential"]
    entry = {"alpha": alpha, "predicted": [r.lam for r in preds], "validated": []}
    if not preds:
        return entry
    blk = p.block(alpha)
    rep = spectrum(blk, "real-window", shifts=[r.lam for r in preds], reality_tol=cfg.reality_tol, seed=p.config.seed)
    for r in preds:
        cand = rep.eigenvalues if r.kind == "tangency" else rep.real_eigenvalues
        lim = max(tol, math.sqrt(cfg.tangency_tol)) if r.kind == "tangency" else tol
        if len(cand) and np.min(np.abs(cand - r.lam)) <= lim:
            entry["validated"].append(r.lam)
    return entry


def sweep_alpha(
    config: ScenarioConfig,
    alpha_min: float | None = None,
    alpha_max: float | None = None,
    bracket: float | None = None,
    output_dir=None,
    write: bool = True,
) -> SweepResult:
    """Bisect for the smallest alpha with a positive real eigenvalue that is predicted and validated.

    Only the first ``curves.k`` curves are tracked: on ``mu > 0`` a root of
    any curve forces one of curve 1, since ``gamma_1 <= gamma_n``.
    """
    sw = config.sweep
    alpha_min = alpha_min if alpha_min is not None else (sw.alpha_min if sw else None)
    alpha_max = alpha_max if alpha_max is not None else (sw.alpha_max if sw else None)
    bracket = bracket if bracket is not None else (sw.bracket if sw else 1e-2)
    if alpha_min is None or alpha_max is None or not 0 < alpha_min < alpha_max:
        raise ConfigError("sweep needs 0 < alpha_min < alpha_max")
    p = Pipeline(config, output_dir, figures=False)
    p.setup()
    cfg = config.curves

    def _table():
        gamma_0 = spectrum_at_zero(p.S0)
        if cfg.mu_range == "auto":
            mu_range = default_mu_range(float(gamma_0[0]), p.coeffs.a_norm, alpha_max)
        else:
            mu_range = tuple(cfg.mu_range)
        p.table = sample_eigencurves(p.grid, p.coeffs, mu_range, cfg.samples, min(cfg.k, p.grid.size),
                                     tol=config.solver.eig_tol, radii=cfg.radii, workers=config.solver.workers)
        return p.table

    p._stage("curves", _table)
    tol = config.solver.match_tol
    evals = []

    def unstable(alpha):
        e = _positive_validated(p, alpha, tol)
        if e["predicted"] and not e["validated"]:
            p.warn(f"alpha={alpha:g}: positive real point predicted but not confirmed by the block spectrum")
        evals.append(e)
        return bool(e["validated"])

    direct = thresholds(p.table, 1, +1)
    direct_alpha = direct.alpha_threshold if direct.found else None

    def _bisect():
        lo, hi = alpha_min, alpha_max
        if not unstable(hi):
            return SweepResult(False, None, (lo, hi), tuple(evals), direct_alpha, "no validated positive real eigenvalue up to alpha_max")
        if unstable(lo):
            return SweepResult(True, lo, (0.0, lo), tuple(evals), direct_alpha, "already unstable at alpha_min")
        while hi - lo > bracket:
            mid = 0.5 * (lo + hi)
            if unstable(mid):
                hi = mid
            else:
                lo = mid
        return SweepResult(True, 0.5 * (lo + hi), (lo, hi), tuple(evals), direct_alpha)

    result = p._stage("sweep", _bisect)
    p.manifest.summary["sweep"] = result.as_dict()
    if write:
        p._json("sweep.json", result)
        p.finish()
    return result

"""Regularized Gauss-Newton iteration with truncated-SVD steps.

Each step solves the linearized least-squares problem through a
Moore-Penrose pseudo-inverse in which singular values below a threshold
are zeroed, which keeps ill-conditioned feature directions out of the
update.  The loop stops when the relative loss variation drops below the
configured tolerance, when the step vanishes, or at the iteration cap.
"""

from __future__ import annotations

import csv
import enum
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, NumericalError

_MAX_HALVINGS = 40


class Termination(enum.Enum):
    TOLERANCE_MET = "tolerance_met"
    MAX_ITERATIONS = "max_iterations"
    STAGNANT_STEP = "stagnant_step"


@dataclass(frozen=True)
class GNConfig:
    max_iterations: int = 500
    svd_threshold: float = 1e-12
    svd_threshold_relative: bool = True  # threshold scales with the largest singular value
    tolerance: float = 1e-12
    initial_params: Optional[np.ndarray] = None
    resample_each_iter: bool = True
    # Full Newton steps along near-null feature directions can explode the
    # loss by many orders early in a solve; steps that inflate it past this
    # factor are halved (bounded number of times, best trial kept).  Set to
    # inf to recover the pure full-step iteration.
    max_loss_increase: float = 4.0


@dataclass
class GNReport:
    loss_history: list[float] = field(default_factory=list)
    iterations_used: int = 0
    termination: Termination = Termination.MAX_ITERATIONS
    rank_history: list[int] = field(default_factory=list)
    wall_ms_history: list[float] = field(default_factory=list)
    step_halvings: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1]


class FunctionAssembler:
    """Adapter turning plain callables into the assembler protocol."""

    def __init__(self, residual_jacobian: Callable, on_step: Optional[Callable] = None):
        self._rj = residual_jacobian
        self._on_step = on_step

    def residual_jacobian(self, eta):
        return self._rj(eta)

    def on_step(self, eta, iteration):
        if self._on_step is not None:
            self._on_step(eta, iteration)


def truncated_pinv_step(jacobian: np.ndarray, residual: np.ndarray, rho: float, relative: bool = False):
    """Gauss-Newton update ``-V sigma^+ U^T r`` with singular values < rho zeroed.

    Returns ``(delta, rank_kept)``.  With ``relative=True`` the threshold
    is ``rho * sigma_max``.
    """
    jacobian = np.asarray(jacobian, dtype=float)
    residual = np.asarray(residual, dtype=float)
    if jacobian.ndim != 2 or jacobian.shape[1] < 1:
        raise NumericalError(f"jacobian must be a matrix with >= 1 column, got shape {jacobian.shape}")
    try:
        u, s, vt = np.linalg.svd(jacobian, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed on a {jacobian.shape} jacobian: {exc}") from exc
    cutoff = rho * s[0] if (relative and s.size and s[0] > 0) else rho
    keep = s >= cutoff
    rank_kept = int(np.count_nonzero(keep))
    if rank_kept == 0:
        return np.zeros(jacobian.shape[1]), 0
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    delta = -(vt.T * inv) @ (u.T @ residual)
    return delta, rank_kept


def minimize(assembler, config: GNConfig):
    """Run the Gauss-Newton loop; returns ``(eta, GNReport)``.

    ``assembler`` provides ``residual_jacobian(eta) -> (T, J)`` and may
    expose ``on_step(eta, iteration)``, called after each accepted step so
    interface-dependent collocation can be refreshed.  After a refresh the
    loss is re-anchored on the new point set, keeping the stopping test a
    same-set comparison.
    """
    if config.initial_params is None:
        raise NumericalError("GNConfig.initial_params must be set (use zeros of the parameter size)")
    eta = np.array(config.initial_params, dtype=float)
    report = GNReport()

    residual, jac = assembler.residual_jacobian(eta)
    loss = float(residual @ residual)
    if not np.isfinite(loss):
        raise DivergenceError("initial loss is not finite", last_params=None)
    report.loss_history.append(loss)
    anchor_loss = loss

    for iteration in range(1, config.max_iterations + 1):
        t_start = time.perf_counter()
        delta, rank = truncated_pinv_step(jac, residual, config.svd_threshold, relative=config.svd_threshold_relative)
        report.rank_history.append(rank)

        if rank == 0 or not np.any(delta):
            report.loss_history.append(loss)
            report.iterations_used = iteration
            report.termination = Termination.STAGNANT_STEP
            report.wall_ms_history.append(1e3 * (time.perf_counter() - t_start))
            return eta, report

        scale = 1.0
        best = None  # (loss, scale, residual, jacobian, eta)
        for _ in range(_MAX_HALVINGS + 1):
            trial = eta + scale * delta
            trial_res, trial_jac = assembler.residual_jacobian(trial)
            trial_loss = float(trial_res @ trial_res)
            if np.isfinite(trial_loss):
                if best is None or trial_loss < best[0]:
                    best = (trial_loss, scale, trial_res, trial_jac, trial)
                if trial_loss <= config.max_loss_increase * loss:
                    break
            scale *= 0.5
            report.step_halvings += 1
        if best is None:
            raise DivergenceError(
                f"loss stayed non-finite after {_MAX_HALVINGS} step halvings at iteration {iteration}",
                last_params=eta,
            )
        trial_loss, scale, trial_res, trial_jac, trial = best
        if scale != 1.0:
            report.notes.append(f"iteration {iteration}: step scaled by {scale} to tame the loss")

        eta = trial
        loss = trial_loss
        report.loss_history.append(loss)
        report.iterations_used = iteration
        report.wall_ms_history.append(1e3 * (time.perf_counter() - t_start))

        if abs(loss - anchor_loss) <= config.tolerance * abs(loss):
            report.termination = Termination.TOLERANCE_MET
            return eta, report

        residual, jac = trial_res, trial_jac
        anchor_loss = loss
        if config.resample_each_iter and iteration < config.max_iterations and hasattr(assembler, "on_step"):
            assembler.on_step(eta, iteration)
            residual, jac = assembler.residual_jacobian(eta)
            anchor_loss = float(residual @ residual)

    report.termination = Termination.MAX_ITERATIONS
    return eta, report


def write_history_csv(report: GNReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss", "rank_kept", "wall_ms"])
        writer.writerow([0, repr(report.loss_history[0]), "", ""])
        for i in range(report.iterations_used):
            rank = report.rank_history[i] if i < len(report.rank_history) else ""
            wall = report.wall_ms_history[i] if i < len(report.wall_ms_history) else ""
            writer.writerow([i + 1, repr(report.loss_history[i + 1]), rank, wall])

"""Adaptive Cash-Karp 5(4) integration of the rate equations.

Steps are error-controlled on the embedded 4th-order estimate, samples come
from cubic Hermite interpolation between accepted steps, and the horizon is
split at drive discontinuities (signal start, OOK symbol edges) so that no
step straddles a jump in the pump.
"""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field

from rbcc.errors import (
    NegativeStateError,
    NonFiniteStateError,
    NumericalError,
    StepSizeUnderflowError,
)
from rbcc.laser import output_power, photon_energy
from rbcc.params import LaserParams, PumpDrive, SimConfig
from rbcc.transducers import drive_breakpoints, drive_max_step, drive_power_at, segment_pump_power

logger = structlog.get_logger(__name__)

RHS = Callable[[float, np.ndarray], np.ndarray]

# Cash-Karp tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
_A = np.zeros((6, 6))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [3 / 10, -9 / 10, 6 / 5]
_A[4, :4] = [-11 / 54, 5 / 2, -70 / 27, 35 / 27]
_A[5, :5] = [1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096]
_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
# 5th minus embedded 4th order weights
_E = np.array(
    [-277 / 64512, 0.0, 6925 / 370944, -6925 / 202752, -277 / 14336, 277 / 7084]
)

ORDER = 5
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class Step(BaseModel):
    """An accepted step."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    y: np.ndarray
    error: np.ndarray
    h: float
    h_next: float
    rejected: int


class TimeSeries(BaseModel):
    """Sampled trajectory of one integration."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    p_out: np.ndarray
    drive: np.ndarray
    n_steps: int = 0
    n_rejected: int = 0
    # componentwise sum of accepted local error vectors, m^-3
    error_estimate: np.ndarray = Field(default_factory=lambda: np.zeros(2))

    def __len__(self) -> int:
        return int(self.t.size)

    def window(self, t0: float, t1: float) -> TimeSeries:
        """Samples with t0 <= t < t1."""
        mask = (self.t >= t0) & (self.t < t1)
        return TimeSeries(
            t=self.t[mask],
            v1=self.v1[mask],
            v2=self.v2[mask],
            p_out=self.p_out[mask],
            drive=self.drive[mask],
            n_steps=self.n_steps,
            n_rejected=self.n_rejected,
            error_estimate=self.error_estimate,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t[s]": self.t,
                "v1[m^-3]": self.v1,
                "v2[m^-3]": self.v2,
                "p_out[W]": self.p_out,
                "drive[W]": self.drive,
            }
        )


# =============================================================================
# Single steps
# =============================================================================


class CashKarpStepper:
    """Embedded 5(4) pair with mixed absolute/relative RMS error control."""

    def __init__(self, fun: RHS, rel_tol: float, abs_tol: float):
        self.fun = fun
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol

    def attempt(
        self, t: float, y: np.ndarray, f0: np.ndarray, h: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """One trial step; returns the 5th-order candidate and its error vector."""
        k = np.empty((6, y.size))
        k[0] = f0
        for i in range(1, 6):
            k[i] = self.fun(t + _C[i] * h, y + h * (_A[i, :i] @ k[:i]))
        return y + h * (_B5 @ k), h * (_E @ k)

    def error_norm(self, y: np.ndarray, y_new: np.ndarray, err: np.ndarray) -> float:
        scale = self.abs_tol + self.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        return float(np.sqrt(np.mean((err / scale) ** 2)))

    def step(self, t: float, y: np.ndarray, f0: np.ndarray, h: float, h_min: float) -> Step:
        """Retry with shrinking h until a candidate is accepted.

        Candidates that are non-finite or below -abs_tol are rejected like
        candidates with too large an error. Accepted components in
        [-abs_tol, 0) are clamped to zero.
        """
        rejected = 0
        negative: np.ndarray | None = None
        while True:
            if h < h_min:
                if negative is not None:
                    raise NegativeStateError(t, negative.tolist())
                raise StepSizeUnderflowError(t, h)
            y_new, err = self.attempt(t, y, f0, h)
            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(err))):
                h *= 0.25
                rejected += 1
                continue

            norm = self.error_norm(y, y_new, err)
            if norm > 1.0:
                h *= max(0.1, min(0.5, SAFETY * norm ** (-1.0 / ORDER)))
                rejected += 1
                continue
            if np.any(y_new < -self.abs_tol):
                negative = y_new
                h *= 0.5
                rejected += 1
                continue

            y_new = np.where(y_new < 0.0, 0.0, y_new)
            if norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * norm ** (-1.0 / ORDER)))
            return Step(y=y_new, error=err, h=h, h_next=h * factor, rejected=rejected)


def step_dense(
    fun: RHS,
    t: float,
    y: np.ndarray,
    dt_target: float,
    rel_tol: float = 1e-6,
    abs_tol: float = 1e-12,
) -> Step:
    """Take one accepted step starting with dt_target (halving on error excess)."""
    if dt_target <= 0:
        raise ValueError("dt_target must be positive")
    y = np.asarray(y, dtype=float)
    stepper = CashKarpStepper(fun, rel_tol, abs_tol)
    h_min = 10.0 * np.spacing(max(abs(t), abs(t + dt_target)))
    return stepper.step(t, y, np.asarray(fun(t, y), dtype=float), dt_target, h_min)


def initial_step(
    fun: RHS,
    t: float,
    y: np.ndarray,
    f0: np.ndarray,
    rel_tol: float,
    abs_tol: float,
    t_bound: float,
) -> float:
    """Starting step size from derivative magnitudes (Hairer, Norsett, Wanner)."""
    scale = abs_tol + np.abs(y) * rel_tol
    d0 = float(np.sqrt(np.mean((y / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_bound - t)

    f1 = fun(t + h0, y + h0 * f0)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (ORDER + 1))
    return min(100.0 * h0, h1, t_bound - t)


def hermite(
    t0: float,
    y0: np.ndarray,
    f0: np.ndarray,
    t1: float,
    y1: np.ndarray,
    f1: np.ndarray,
    t: np.ndarray,
) -> np.ndarray:
    """Cubic Hermite interpolant on [t0, t1] evaluated at t; shape (len(t), dim)."""
    h = t1 - t0
    s = ((t - t0) / h)[:, None]
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


# =============================================================================
# Trajectories
# =============================================================================


def sample_times(sim: SimConfig) -> np.ndarray:
    n = int(math.floor(sim.t_end / sim.sample_dt + 1e-9)) + 1
    return np.arange(n) * sim.sample_dt


def laser_rhs(params: LaserParams, pump_power: Callable[[float], float]) -> RHS:
    """Right-hand side closure with the pump given as optical power over time."""
    g = params.c_medium * params.sigma
    inv_tau_c = 1.0 / params.tau_c
    inv_tau_f = 1.0 / params.tau_f
    seed = params.s_spont
    to_rate = 1.0 / (photon_energy(params) * params.gain_volume)

    def fun(t: float, y: np.ndarray) -> np.ndarray:
        v1 = y[0]
        v2 = y[1]
        stimulated = g * v1 * v2
        return np.array(
            (
                stimulated - v1 * inv_tau_c + seed,
                -stimulated - v2 * inv_tau_f + pump_power(t) * to_rate,
            )
        )

    return fun


def integrate(drive: PumpDrive, params: LaserParams, sim: SimConfig) -> TimeSeries:
    """Integrate from sim.initial_state over [0, sim.t_end].

    Steps never exceed ``drive_max_step(drive)``.

    Raises:
        StepSizeUnderflowError: the step shrank below machine resolution.
        NegativeStateError: it shrank that far while candidates stayed below -abs_tol.
        NonFiniteStateError: the right-hand side produced NaN or Inf.
        NumericalError: the step budget (sim.max_steps) was exhausted.
    """
    t_grid = sample_times(sim)
    out = np.empty((t_grid.size, 2))
    y = np.array([sim.initial_state.v1, sim.initial_state.v2], dtype=float)
    out[0] = y
    k = 1

    error_sum = np.zeros(2)
    n_steps = 0
    n_rejected = 0
    h: float | None = None
    h_max = drive_max_step(drive)

    bounds = drive_breakpoints(drive, sim.t_end)
    for a, b in zip(bounds[:-1], bounds[1:], strict=True):
        fun = laser_rhs(params, segment_pump_power(drive, a, b))
        stepper = CashKarpStepper(fun, sim.rel_tol, sim.abs_tol)
        h_min = 10.0 * np.spacing(b)
        t = a
        f = fun(t, y)
        if not np.all(np.isfinite(f)):
            raise NonFiniteStateError(t, y.tolist())
        if h is None:
            h = initial_step(fun, t, y, f, sim.rel_tol, sim.abs_tol, b)

        while t < b:
            remaining = b - t
            h_try = min(h, remaining, h_max)
            step = stepper.step(t, y, f, h_try, h_min)
            t_new = b if step.h == remaining else t + step.h
            f_new = fun(t_new, step.y)
            if not np.all(np.isfinite(f_new)):
                raise NonFiniteStateError(t_new, step.y.tolist())

            j = int(np.searchsorted(t_grid, t_new, side="right"))
            if j > k:
                out[k:j] = hermite(t, y, f, t_new, step.y, f_new, t_grid[k:j])
                k = j

            error_sum += np.abs(step.error)
            n_steps += 1
            n_rejected += step.rejected
            if n_steps > sim.max_steps:
                raise NumericalError(
                    f"step budget of {sim.max_steps} exhausted at t={t_new:.6g} s"
                )
            t, y, f = t_new, step.y, f_new
            # a step cut short by a breakpoint says nothing about the next one
            h = max(step.h_next, h) if step.h == remaining and step.rejected == 0 else step.h_next

    if k < t_grid.size:
        out[k:] = y

    np.maximum(out, 0.0, out=out)
    logger.debug(
        "integration_complete",
        t_end=sim.t_end,
        steps=n_steps,
        rejected=n_rejected,
        segments=len(bounds) - 1,
    )
    return TimeSeries(
        t=t_grid,
        v1=out[:, 0],
        v2=out[:, 1],
        p_out=output_power(out[:, 0], params),
        drive=np.asarray(drive_power_at(drive, t_grid), dtype=float),
        n_steps=n_steps,
        n_rejected=n_rejected,
        error_estimate=error_sum,
    )

"""Time integration with constraint diagnostics.

The field evolution keeps the state in spectral form between steps and
shares its right-hand sides with the field module, so the integrator
contains no physics of its own. Diagnostics are sampled on a stride,
written as CSV with a fixed column set, and evolution aborts (flagged,
not raised) as soon as a non-finite value appears in the state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import fields
from .constraints import ConstraintSet, extended_flow
from .fields import FieldState, FormulationKind, SpectralWorkspace
from .phase import HamiltonianSystem, as_phase_point, hamiltonian_flow

CSV_HEADER = "t,energy,norm_divA,norm_divPi,norm_A_L,norm_pi_L,l2_error"


class StepperKind(Enum):
    RK4 = "rk4"
    STORMER_VERLET = "stormer_verlet"


@dataclass
class DiagnosticsSeries:
    """Sampled scalar diagnostics of one field evolution."""

    t: np.ndarray
    energy: np.ndarray
    norm_divA: np.ndarray
    norm_divPi: np.ndarray
    norm_A_L: np.ndarray
    norm_pi_L: np.ndarray
    l2_error: np.ndarray
    final_state: FieldState
    aborted: bool = False
    abort_time: float | None = None

    def to_csv(self, path) -> None:
        """Write all rows; missing reference errors serialize as 'nan'."""
        columns = (self.t, self.energy, self.norm_divA, self.norm_divPi,
                   self.norm_A_L, self.norm_pi_L, self.l2_error)
        with open(Path(path), "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in zip(*columns):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _coerce_formulation(formulation) -> FormulationKind:
    if isinstance(formulation, FormulationKind):
        return formulation
    return FormulationKind(str(formulation).replace("-", "_"))


def _coerce_stepper(stepper) -> StepperKind:
    if isinstance(stepper, StepperKind):
        return stepper
    return StepperKind(str(stepper).replace("-", "_"))


def _finite(y_hat: np.ndarray) -> bool:
    total = complex(y_hat.sum())
    return bool(np.isfinite(total.real) and np.isfinite(total.imag))


def evolve(initial: FieldState, formulation, stepper, dt: float, t_end: float,
           reproject_every: int | None = None, reference=None,
           stride: int | None = None,
           workspace: SpectralWorkspace | None = None) -> DiagnosticsSeries:
    """Integrate the field equations and collect diagnostics.

    t_end is rounded to a whole number of steps. Diagnostics rows land at
    t = 0, every `stride` steps (default 1 for N <= 32, else 10), and the
    final step. With `reference` (a callable t -> (a, pi)) the l2_error
    column holds the joint L2 distance to it, otherwise NaN. When
    reproject_every = n, the transverse projection is applied to both
    fields every n steps, before any diagnostics due at that step.
    """
    kind = _coerce_formulation(formulation)
    method = _coerce_stepper(stepper)
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    n_steps = int(round(t_end / dt))
    if n_steps < 1:
        raise ValueError(f"t_end={t_end} is less than one step dt={dt}")
    if reproject_every is not None and reproject_every < 1:
        raise ValueError("reproject_every must be a positive integer")
    ws = workspace or initial.workspace()
    if stride is None:
        stride = 1 if initial.grid_n <= 32 else 10
    if stride < 1:
        raise ValueError("stride must be a positive integer")

    length = initial.domain_length
    y = np.stack([ws.forward(initial.a), ws.forward(initial.pi)])

    def to_state(y_hat: np.ndarray) -> FieldState:
        return FieldState(ws.backward(y_hat[0]), ws.backward(y_hat[1]), length)

    rows: list[tuple[float, ...]] = []

    def record(t: float, y_hat: np.ndarray) -> None:
        state = to_state(y_hat)
        div_a, div_pi = fields.constraint_norms(state, ws)
        al, pil = fields.longitudinal_norms(state, ws)
        if reference is not None:
            ref_a, ref_pi = reference(t)
            err = float(np.hypot(fields.l2_norm(state.a - ref_a, length),
                                 fields.l2_norm(state.pi - ref_pi, length)))
        else:
            err = float("nan")
        rows.append((t, fields.energy(state, ws), div_a, div_pi, al, pil, err))

    if method is StepperKind.RK4:
        def advance(y_hat):
            k1 = fields.rhs_hat(y_hat, ws, kind)
            k2 = fields.rhs_hat(y_hat + 0.5 * dt * k1, ws, kind)
            k3 = fields.rhs_hat(y_hat + 0.5 * dt * k2, ws, kind)
            k4 = fields.rhs_hat(y_hat + dt * k3, ws, kind)
            return y_hat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        # Kick-drift-kick splitting: the drift uses only pi, the kick only A.
        def advance(y_hat):
            pi_half = y_hat[1] + 0.5 * dt * fields.momentum_rhs_hat(y_hat[0], ws)
            a_new = y_hat[0] + dt * fields.position_rhs_hat(pi_half, ws, kind)
            pi_new = pi_half + 0.5 * dt * fields.momentum_rhs_hat(a_new, ws)
            return np.stack([a_new, pi_new])

    record(0.0, y)
    aborted = False
    abort_time = None
    last_recorded = 0
    # Overflow on the way to a detected abort is expected, not a warning.
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, n_steps + 1):
            y_next = advance(y)
            if not _finite(y_next):
                aborted = True
                abort_time = (step - 1) * dt
                if last_recorded != step - 1:
                    record(abort_time, y)
                break
            y = y_next
            if reproject_every is not None and step % reproject_every == 0:
                y = np.stack([fields.transverse_project_hat(y[0], ws),
                              fields.transverse_project_hat(y[1], ws)])
            if step % stride == 0 or step == n_steps:
                record(step * dt, y)
                last_recorded = step

    data = np.array(rows)
    return DiagnosticsSeries(
        t=data[:, 0], energy=data[:, 1], norm_divA=data[:, 2],
        norm_divPi=data[:, 3], norm_A_L=data[:, 4], norm_pi_L=data[:, 5],
        l2_error=data[:, 6], final_state=to_state(y),
        aborted=aborted, abort_time=abort_time,
    )


@dataclass
class FiniteSeries:
    """Trajectory samples of a finite-dimensional evolution."""

    t: np.ndarray
    states: np.ndarray
    hamiltonian: np.ndarray
    constraint_values: np.ndarray | None
    aborted: bool = False
    abort_time: float | None = None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def evolve_finite(system: HamiltonianSystem, z0, dt: float, t_end: float,
                  constraint_set: ConstraintSet | None = None,
                  stride: int = 1) -> FiniteSeries:
    """RK4 trajectory of a finite system, optionally with frozen multipliers.

    Without constraints this integrates the plain Hamiltonian flow. With
    a (second-class) constraint set the flow is extended by the
    gauge-fixed multiplier terms, re-solved at every stage evaluation, so
    the constraint values should stay at their initial size up to
    integration error.
    """
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    n_steps = int(round(t_end / dt))
    if n_steps < 1:
        raise ValueError(f"t_end={t_end} is less than one step dt={dt}")
    if stride < 1:
        raise ValueError("stride must be a positive integer")

    z = as_phase_point(z0).astype(float).copy()
    if constraint_set is None:
        def rhs(pt):
            return hamiltonian_flow(system, pt)
    else:
        def rhs(pt):
            return extended_flow(system, constraint_set, pt)

    ts, zs = [], []

    def record(t, pt):
        ts.append(t)
        zs.append(pt.copy())

    record(0.0, z)
    aborted = False
    abort_time = None
    last_recorded = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, n_steps + 1):
            try:
                k1 = rhs(z)
                k2 = rhs(z + 0.5 * dt * k1)
                k3 = rhs(z + 0.5 * dt * k2)
                k4 = rhs(z + dt * k3)
                z_next = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            except (FloatingPointError, OverflowError, ValueError):
                # z0 was validated up front, so a ValueError here is the
                # phase-point check rejecting an intermediate state that
                # overflowed inside a stage; treat it like any blowup.
                z_next = np.full_like(z, np.nan)
            if not np.all(np.isfinite(z_next)):
                aborted = True
                abort_time = (step - 1) * dt
                if last_recorded != step - 1:
                    record(abort_time, z)
                break
            z = z_next
            if step % stride == 0 or step == n_steps:
                record(step * dt, z)
                last_recorded = step

    states = np.array(zs)
    # Recorded states are finite, but scalars derived from nearly
    # overflowed ones may still saturate to inf.
    with np.errstate(over="ignore", invalid="ignore"):
        hvals = np.array([system.hamiltonian(pt) for pt in states])
        cvals = None
        if constraint_set is not None:
            cvals = np.array([constraint_set.values(pt) for pt in states])
    return FiniteSeries(np.array(ts), states, hvals, cvals,
                        aborted=aborted, abort_time=abort_time)

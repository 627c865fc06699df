"""Small built-in systems exercising the constraint pipeline end to end.

Each Lagrangian toy carries its phase-space Hamiltonian, the primary
constraints read off from the singular velocity Hessian, and a point on
the constraint surface suitable for matrix evaluations. The nonlinear
circle pair exists purely to stress the iterative surface projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import Constraint, ConstraintOrigin, ConstraintSet
from .phase import (
    HamiltonianSystem,
    LagrangianSystem,
    PhaseFunction,
    linear_function,
    quadratic_function,
)


@dataclass(frozen=True)
class ToyModel:
    name: str
    system: HamiltonianSystem
    primaries: ConstraintSet
    sample_point: np.ndarray
    lagrangian: LagrangianSystem | None = None
    description: str = ""
    # Bracket pairs worth reporting for this model, as (label, function) pairs.
    check_functions: tuple = field(default=())


def _coordinate(dim: int, index: int, label: str) -> PhaseFunction:
    coeffs = np.zeros(dim)
    coeffs[index] = 1.0
    return linear_function(coeffs, label=label)


def chain_demo() -> ToyModel:
    """L = (qdot1 - q2)^2 / 2: one primary constraint, one secondary.

    Momenta: p1 = qdot1 - q2, p2 = 0. The Legendre transform gives
    H = p1^2 / 2 + q2 p1. Consistency of p2 = 0 forces [p2, H] = -p1 = 0,
    and the chain stops there ([p1, H] = 0 identically). Both constraints
    commute, so the final set is first class: q2 is pure gauge and the
    reduced dynamics is a free particle frozen at p1 = 0.
    """
    dim = 4

    def lag(q, v):
        return 0.5 * (v[0] - q[1]) ** 2

    lagrangian = LagrangianSystem(2, lag, velocity_hessian=lambda q, v: np.diag([1.0, 0.0]))

    # H = p1^2/2 + q2 p1 in ordering (q1, q2, p1, p2).
    quad = np.zeros((4, 4))
    quad[2, 2] = 1.0
    quad[1, 2] = quad[2, 1] = 1.0
    h = quadratic_function(quad, label="p1^2/2 + q2 p1")
    system = HamiltonianSystem.canonical(2, h)

    primaries = ConstraintSet(
        (Constraint(_coordinate(dim, 3, "p2"), ConstraintOrigin.PRIMARY),), dim
    )
    checks = (
        ("q1", _coordinate(dim, 0, "q1")),
        ("p1", _coordinate(dim, 2, "p1")),
    )
    return ToyModel(
        name="chain-demo",
        system=system,
        primaries=primaries,
        sample_point=np.array([0.7, -0.3, 0.0, 0.0]),
        lagrangian=lagrangian,
        description="singular kinetic term; primary p2 spawns secondary -p1, all first class",
        check_functions=checks,
    )


def second_class_demo() -> ToyModel:
    """L = qdot1 q2: two second-class primaries and an empty Hamiltonian.

    Momenta: p1 = q2, p2 = 0, so the primaries are p1 - q2 and p2, with
    H = 0 on the constraint surface. Their mutual bracket is -1, making
    the pair second class with commutation matrix [[0, -1], [1, 0]].
    The Dirac bracket then eliminates the (q2, p2) pair entirely.
    """
    dim = 4

    def lag(q, v):
        return v[0] * q[1]

    lagrangian = LagrangianSystem(2, lag)

    h = linear_function(np.zeros(dim), label="0")
    system = HamiltonianSystem.canonical(2, h)

    phi1 = linear_function(np.array([0.0, -1.0, 1.0, 0.0]), label="p1 - q2")
    phi2 = _coordinate(dim, 3, "p2")
    primaries = ConstraintSet(
        (
            Constraint(phi1, ConstraintOrigin.PRIMARY),
            Constraint(phi2, ConstraintOrigin.PRIMARY),
        ),
        dim,
    )
    checks = (
        ("q1", _coordinate(dim, 0, "q1")),
        ("q2", _coordinate(dim, 1, "q2")),
        ("p1", _coordinate(dim, 2, "p1")),
        ("p2", _coordinate(dim, 3, "p2")),
    )
    return ToyModel(
        name="second-class-demo",
        system=system,
        primaries=primaries,
        sample_point=np.array([0.4, 0.25, 0.25, 0.0]),
        lagrangian=lagrangian,
        description="two second-class primaries; Dirac bracket kills the (q2, p2) pair",
        check_functions=checks,
    )


def regular_demo() -> ToyModel:
    """L = (qdot1^2 + qdot2^2) / 2: invertible Hessian, no constraints."""
    dim = 4

    def lag(q, v):
        return 0.5 * (v[0] ** 2 + v[1] ** 2)

    lagrangian = LagrangianSystem(2, lag, velocity_hessian=lambda q, v: np.eye(2))
    quad = np.zeros((4, 4))
    quad[2, 2] = quad[3, 3] = 1.0
    h = quadratic_function(quad, label="(p1^2 + p2^2)/2")
    system = HamiltonianSystem.canonical(2, h)
    return ToyModel(
        name="regular-demo",
        system=system,
        primaries=ConstraintSet((), dim),
        sample_point=np.array([0.1, 0.2, 0.3, 0.4]),
        lagrangian=lagrangian,
        description="regular kinetic term, empty constraint chain",
    )


def circle_pair(theta0: float = 0.25) -> ConstraintSet:
    """Nonlinear second-class pair on a 2-dimensional phase space.

    C1 = (q^2 + p^2)/2 - 1 pins the unit circle, C2 = atan2(p, q) - theta0
    pins the angle. [C1, C2] = 1 everywhere away from the origin, so the
    commutation matrix is constant even though the constraints are not
    linear: the correction step contracts quadratically instead of
    terminating in one shot.
    """
    radial = quadratic_function(np.eye(2), const=-1.0, label="(q^2 + p^2)/2 - 1")

    def angle_value(z, theta0=theta0):
        return math.atan2(z[1], z[0]) - theta0

    def angle_gradient(z):
        r2 = z[0] ** 2 + z[1] ** 2
        return np.array([-z[1] / r2, z[0] / r2])

    angle = PhaseFunction(angle_value, angle_gradient, label="atan2(p, q) - theta0")
    return ConstraintSet(
        (
            Constraint(radial, ConstraintOrigin.GAUGE_FIXING),
            Constraint(angle, ConstraintOrigin.GAUGE_FIXING),
        ),
        2,
    )


def coulomb_mode_demo(k_abs: float = 1.0) -> ToyModel:
    """Single-mode surrogate of the Coulomb-gauge-fixed field system.

    One conjugate pair (a, p) standing in for a longitudinal Fourier
    amplitude with wavenumber magnitude k_abs: H = p^2 / 2 with the
    gauge-fixing pair C0 = k_abs p, C1 = k_abs a. Their commutation
    matrix is [[0, -k_abs^2], [k_abs^2, 0]] and the multipliers that
    freeze the pair are (-C0 / k_abs^2, 0).
    """
    if k_abs <= 0:
        raise ValueError("k_abs must be positive")
    dim = 2
    h = quadratic_function(np.diag([0.0, 1.0]), label="p^2/2")
    system = HamiltonianSystem.canonical(1, h)
    c0 = linear_function(np.array([0.0, k_abs]), label="k p")
    c1 = linear_function(np.array([k_abs, 0.0]), label="k a")
    pair = ConstraintSet(
        (
            Constraint(c0, ConstraintOrigin.PRIMARY),
            Constraint(c1, ConstraintOrigin.GAUGE_FIXING),
        ),
        dim,
    )
    return ToyModel(
        name="coulomb-mode",
        system=system,
        primaries=pair,
        sample_point=np.zeros(2),
        description="one Fourier amplitude with its gauge-fixing pair",
    )


BUILTIN_MODELS = {
    "chain-demo": chain_demo,
    "second-class-demo": second_class_demo,
    "regular-demo": regular_demo,
}


def get_model(name: str) -> ToyModel:
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_MODELS))
        raise KeyError(f"unknown model {name!r} (available: {known})") from None
    return factory()

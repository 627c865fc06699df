"""Dirac-Bergmann constraint machinery for finite-dimensional systems.

Covers the full pipeline: consistency chains from primary constraints,
first/second-class classification, the constraint commutation matrix
M_AB = [C_A, C_B], Dirac brackets, gauge-fixed Lagrange multipliers, and
the bracket-generated correction step that projects an off-surface point
back onto the constraint surface.

Weak equality (vanishing on the constraint surface) is made decidable by
evaluating brackets at a batch of on-surface sample points produced by a
least-squares sampler that is independent of the symplectic structure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve, null_space

from .phase import (
    CosymplecticForm,
    HamiltonianSystem,
    PhaseFunction,
    as_phase_point,
    poisson_bracket,
)


class GaugeNotFixedError(RuntimeError):
    """Singular commutation matrix: the gauge is not fully fixed, so the
    set supports no Dirac bracket and no bracket-based correction step."""


class ChainTerminationError(RuntimeError):
    """Consistency chain failed to terminate or ran into inconsistency."""


class SamplerError(RuntimeError):
    """On-surface sampler could not produce the requested points."""


class AmbiguousClassificationError(RuntimeError):
    """Bracket magnitudes sit too close to the weak tolerance to call."""


class ConstraintOrigin(Enum):
    PRIMARY = "primary"
    CONSISTENCY = "consistency"
    GAUGE_FIXING = "gauge_fixing"


class ConstraintClass(Enum):
    UNKNOWN = "unknown"
    FIRST_CLASS = "first_class"
    SECOND_CLASS = "second_class"


@dataclass(frozen=True)
class Constraint:
    """A constraint function with its provenance and class label."""

    function: PhaseFunction
    origin: ConstraintOrigin = ConstraintOrigin.PRIMARY
    class_label: ConstraintClass = ConstraintClass.UNKNOWN

    @property
    def label(self) -> str:
        return self.function.label

    def __call__(self, z) -> float:
        return self.function(z)

    def grad(self, z) -> np.ndarray:
        return self.function.grad(z)


@dataclass(frozen=True)
class ConstraintSet:
    """Ordered constraints over a fixed 2N-dimensional phase space."""

    constraints: tuple[Constraint, ...]
    dim: int

    def __post_init__(self):
        if self.dim < 2 or self.dim % 2:
            raise ValueError(f"ambient phase dimension must be even and positive, got {self.dim}")

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self) -> Iterator[Constraint]:
        return iter(self.constraints)

    def __getitem__(self, i) -> Constraint:
        return self.constraints[i]

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.constraints]

    def values(self, z) -> np.ndarray:
        z = as_phase_point(z)
        return np.array([c(z) for c in self.constraints])

    def jacobian(self, z) -> np.ndarray:
        """Stacked gradients, one row per constraint, shape (M, 2N)."""
        z = as_phase_point(z)
        if len(self.constraints) == 0:
            return np.zeros((0, self.dim))
        return np.vstack([c.grad(z) for c in self.constraints])

    def extended(self, new: Sequence[Constraint]) -> "ConstraintSet":
        return ConstraintSet(self.constraints + tuple(new), self.dim)

    def with_labels(self, labels: Sequence[ConstraintClass]) -> "ConstraintSet":
        if len(labels) != len(self.constraints):
            raise ValueError("one class label per constraint required")
        relabeled = tuple(
            replace(c, class_label=lab) for c, lab in zip(self.constraints, labels)
        )
        return ConstraintSet(relabeled, self.dim)

    def check_irreducible(self, points, rel_tol: float = 1e-8) -> None:
        """Raise if the constraint gradients degenerate at any sample point."""
        if len(self.constraints) == 0:
            return
        for z in np.atleast_2d(points):
            s = np.linalg.svd(self.jacobian(z), compute_uv=False)
            if s[0] == 0.0 or s[-1] < rel_tol * s[0]:
                raise ValueError(
                    f"constraint set is not irreducible at z={z} "
                    f"(singular values {s})"
                )


def constraint_set(functions: Sequence[PhaseFunction], dim: int,
                   origin: ConstraintOrigin = ConstraintOrigin.PRIMARY) -> ConstraintSet:
    """Convenience constructor from bare phase functions."""
    return ConstraintSet(tuple(Constraint(f, origin) for f in functions), dim)


class CommutationMatrix:
    """Mutual bracket matrix M_AB = [C_A, C_B] at a point.

    Entries are computed bracket by bracket; antisymmetry is a checked
    invariant rather than a solver assumption, and linear solves go
    through a cached LU factorization.
    """

    def __init__(self, entries: np.ndarray):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("commutation matrix must be square")
        scale = np.abs(entries).max() if entries.size else 0.0
        if entries.size and np.abs(entries + entries.T).max() > 1e-12 * (1.0 + scale):
            raise ValueError("commutation matrix is not antisymmetric to 1e-12")
        self.entries = entries
        self._lu = None
        self._sv = None

    @property
    def singular_values(self) -> np.ndarray:
        if self._sv is None:
            self._sv = np.linalg.svd(self.entries, compute_uv=False)
        return self._sv

    def is_invertible(self, rel_tol: float = 1e-10) -> bool:
        s = self.singular_values
        if s.size == 0:
            return False
        return bool(s[-1] > rel_tol * s[0])

    def solve(self, rhs, rel_tol: float = 1e-10) -> np.ndarray:
        """Solve M x = rhs, refusing when M is numerically singular."""
        if not self.is_invertible(rel_tol):
            raise GaugeNotFixedError(
                "commutation matrix is singular (gauge not fully fixed): "
                "first-class directions remain, no Dirac bracket exists"
            )
        if self._lu is None:
            self._lu = lu_factor(self.entries)
        return lu_solve(self._lu, np.asarray(rhs, dtype=float))


def commutation_matrix(cset: ConstraintSet, z, form: CosymplecticForm) -> CommutationMatrix:
    """All mutual Poisson brackets of the set's members at z."""
    z = as_phase_point(z)
    m = len(cset)
    entries = np.zeros((m, m))
    for a in range(m):
        for b in range(m):
            if a != b:
                entries[a, b] = poisson_bracket(cset[a].function, cset[b].function, z, form)
    return CommutationMatrix(entries)


def bracket_function(f: PhaseFunction, g: PhaseFunction, form: CosymplecticForm,
                     label: str = "") -> PhaseFunction:
    """The bracket [f, g] as a new phase function.

    The gradient falls back to finite differences (second derivatives of
    f and g are not part of the PhaseFunction contract), which is exact
    for the polynomial constraints the chain generates in practice.
    """

    def value(z, f=f, g=g, form=form):
        return poisson_bracket(f, g, z, form)

    return PhaseFunction(value, None, label=label or f"[{f.label}, {g.label}]")


# ---------------------------------------------------------------------------
# On-surface sampling (least-squares route, independent of the brackets)
# ---------------------------------------------------------------------------

def least_squares_project(cset: ConstraintSet, z0, tol: float = 1e-12,
                          max_iter: int = 60) -> np.ndarray:
    """Gauss-Newton projection of z0 onto the constraint surface.

    Uses minimum-norm Newton updates z <- z - G^+ C(z). Works for any
    irreducible set, including fully first-class ones where the
    bracket-generated step is unavailable; serves as the independent
    cross-check for the canonical correction machinery.
    """
    z = as_phase_point(z0).astype(float).copy()
    if len(cset) == 0:
        return z
    for _ in range(max_iter):
        c = cset.values(z)
        if np.max(np.abs(c)) < tol:
            return z
        g = cset.jacobian(z)
        step, *_ = np.linalg.lstsq(g, c, rcond=None)
        z = z - step
    raise SamplerError(
        f"least-squares projection stalled at residual {np.max(np.abs(cset.values(z))):.3e}"
    )


def make_surface_sampler(rng: np.random.Generator, n_points: int = 32,
                         scale: float = 1.0, tol: float = 1e-10,
                         max_iter: int = 60) -> Callable[[ConstraintSet], np.ndarray]:
    """Build a sampler(cset) -> (n_points, dim) array of on-surface points.

    Seeds are Gaussian with the given scale, projected by
    least_squares_project and kept only if all constraints evaluate
    below tol. Reproducible through the supplied generator.
    """

    def sampler(cset: ConstraintSet) -> np.ndarray:
        points = []
        attempts = 0
        while len(points) < n_points:
            attempts += 1
            if attempts > 50 * n_points:
                raise SamplerError(
                    f"could not find {n_points} on-surface points "
                    f"after {attempts} attempts"
                )
            z0 = scale * rng.standard_normal(cset.dim)
            if len(cset) == 0:
                points.append(z0)
                continue
            try:
                z = least_squares_project(cset, z0, tol=tol, max_iter=max_iter)
            except SamplerError:
                continue
            if np.max(np.abs(cset.values(z))) < tol:
                points.append(z)
        return np.array(points)

    return sampler


def _bracket_scale(ga: np.ndarray, gb: np.ndarray) -> float:
    # Normalization for weak-vanishing tests: 1 + product of gradient norms,
    # so the tolerance is meaningful for both O(1) and large-gradient pairs.
    return 1.0 + float(np.linalg.norm(ga) * np.linalg.norm(gb))


# ---------------------------------------------------------------------------
# Consistency chain and classification
# ---------------------------------------------------------------------------

def consistency_chain(system: HamiltonianSystem, primaries: ConstraintSet,
                      sampler: Callable[[ConstraintSet], np.ndarray],
                      tol_weak: float = 1e-8,
                      max_generations: int = 10) -> ConstraintSet:
    """Run the Dirac-Bergmann consistency algorithm from the primaries.

    Each generation demands that every constraint's bracket with the
    Hamiltonian vanish weakly, allowing multipliers of the primaries to
    absorb what they can: at each on-surface sample the residual of
    [C_i, H] + lambda^a [C_i, phi_a] = 0 is minimized over lambda, and
    only the unabsorbable part (the left-null-space component of the
    primary bracket matrix) spawns candidate constraints. Candidates are
    admitted when their gradient leaves the span of the existing ones.

    Raises ChainTerminationError if the chain is still growing after
    max_generations, or if a residual can neither be absorbed nor yield
    an independent constraint (inconsistent dynamics).
    """
    if len(primaries) == 0:
        return primaries
    h = system.hamiltonian
    form = system.form
    n_primary = len(primaries)
    cset = primaries

    for _generation in range(max_generations):
        points = sampler(cset)
        m = len(cset)
        n_pts = points.shape[0]

        # b[k, i] = [C_i, H] at sample k; a[k, i, p] = [C_i, phi_p] there.
        b = np.empty((n_pts, m))
        a = np.empty((n_pts, m, n_primary))
        scales = np.empty((n_pts, m))
        for k, z in enumerate(points):
            gh = h.grad(z)
            for i, c in enumerate(cset):
                gc = c.grad(z)
                b[k, i] = poisson_bracket(c.function, h, z, form)
                scales[k, i] = 1.0 + np.linalg.norm(gc) * np.linalg.norm(gh)
                for p in range(n_primary):
                    a[k, i, p] = poisson_bracket(c.function, cset[p].function, z, form)

        # Residual after the best pointwise multiplier fit.
        resid = np.empty_like(b)
        for k in range(n_pts):
            lam, *_ = np.linalg.lstsq(a[k], -b[k], rcond=None)
            resid[k] = b[k] + a[k] @ lam
        unabsorbed = np.max(np.abs(resid) / scales, axis=0)
        failing = np.nonzero(unabsorbed >= tol_weak)[0]
        if failing.size == 0:
            return cset

        # Directions of the consistency conditions that no multiplier choice
        # can touch. When no primary bracket is in play this is just the
        # identity, and candidates are the raw brackets [C_i, H].
        a_scale = np.max(np.abs(a)) if a.size else 0.0
        if a_scale < tol_weak:
            directions = [np.eye(m)[i] for i in failing]
        else:
            a_mean = a.mean(axis=0)
            if np.max(np.abs(a - a_mean)) > 1e-6 * (1.0 + a_scale):
                raise ChainTerminationError(
                    "primary bracket matrix varies across on-surface samples; "
                    "point-dependent multiplier structure is not supported"
                )
            basis = null_space(a_mean.T)
            directions = [basis[:, j] for j in range(basis.shape[1])
                          if np.max(np.abs(resid @ basis[:, j])) >= tol_weak]

        new = []
        for u in directions:
            cand = _combination_bracket(cset, u, h, form)
            if _gradient_is_new(cset.extended(new), cand, points):
                new.append(Constraint(cand, ConstraintOrigin.CONSISTENCY))
        if not new:
            raise ChainTerminationError(
                "consistency conditions cannot be satisfied: residuals of "
                f"{[cset[i].label for i in failing]} are neither absorbable by "
                "multipliers nor independent constraints"
            )
        cset = cset.extended(new)

    raise ChainTerminationError(
        f"consistency chain still growing after {max_generations} generations "
        f"({len(cset)} constraints so far)"
    )


def _combination_bracket(cset: ConstraintSet, weights: np.ndarray,
                         h: PhaseFunction, form: CosymplecticForm) -> PhaseFunction:
    """u_i [C_i, H] as a phase function, with single-term labels kept tidy."""
    (idx,) = np.nonzero(np.abs(weights) > 1e-12)
    if idx.size == 1 and abs(abs(weights[idx[0]]) - 1.0) < 1e-12:
        i = int(idx[0])
        sign = "-" if weights[i] < 0 else ""
        inner = bracket_function(cset[i].function, h, form)

        def value(z, f=inner, s=np.sign(weights[i])):
            return float(s) * f(z)

        return PhaseFunction(value, None, label=f"{sign}[{cset[i].label}, H]")

    terms = [(float(weights[i]), cset[int(i)].function) for i in idx]

    def value(z, terms=terms, h=h, form=form):
        return sum(w * poisson_bracket(c, h, z, form) for w, c in terms)

    label = " + ".join(f"{w:+.3g}[{c.label}, H]" for w, c in terms)
    return PhaseFunction(value, None, label=label)


def _gradient_is_new(cset: ConstraintSet, cand: PhaseFunction, points,
                     rel_tol: float = 1e-8) -> bool:
    """True if cand's gradient leaves the span of the set's gradients
    at at least one sample point (SVD residual test)."""
    for z in np.atleast_2d(points):
        g = cand.grad(z)
        gn = np.linalg.norm(g)
        if gn == 0.0:
            continue
        existing = cset.jacobian(z)
        if existing.shape[0] == 0:
            return True
        coeff, *_ = np.linalg.lstsq(existing.T, g, rcond=None)
        residual = np.linalg.norm(g - existing.T @ coeff)
        if residual > rel_tol * gn:
            return True
    return False


def classify_constraints(cset: ConstraintSet,
                         sampler: Callable[[ConstraintSet], np.ndarray],
                         tol_weak: float = 1e-8,
                         form: CosymplecticForm | None = None) -> ConstraintSet:
    """Label each constraint first or second class from on-surface brackets.

    A constraint is first class when its bracket with every other member
    vanishes weakly at all sampled points. Magnitudes within a factor of
    ten of tol_weak on either side are refused as ambiguous rather than
    silently rounded one way.
    """
    if len(cset) == 0:
        return cset
    if form is None:
        form = CosymplecticForm.canonical(cset.dim // 2)
    points = sampler(cset)
    cset.check_irreducible(points)

    m = len(cset)
    mag = np.zeros((m, m))
    for z in points:
        grads = [c.grad(z) for c in cset]
        for a in range(m):
            for b in range(a + 1, m):
                val = abs(poisson_bracket(cset[a].function, cset[b].function, z, form))
                val /= _bracket_scale(grads[a], grads[b])
                mag[a, b] = max(mag[a, b], val)
                mag[b, a] = mag[a, b]

    ambiguous = [
        (cset[a].label, cset[b].label, mag[a, b])
        for a in range(m) for b in range(a + 1, m)
        if tol_weak / 10.0 <= mag[a, b] <= tol_weak * 10.0
    ]
    if ambiguous:
        detail = ", ".join(f"[{la}, {lb}] ~ {v:.3e}" for la, lb, v in ambiguous)
        raise AmbiguousClassificationError(
            f"bracket magnitudes within a factor 10 of tol_weak={tol_weak:g}: {detail}"
        )

    labels = [
        ConstraintClass.FIRST_CLASS
        if np.all(mag[a] < tol_weak) else ConstraintClass.SECOND_CLASS
        for a in range(m)
    ]
    return cset.with_labels(labels)


# ---------------------------------------------------------------------------
# Dirac bracket, multipliers, error correction
# ---------------------------------------------------------------------------

def dirac_bracket(f: PhaseFunction, g: PhaseFunction, cset: ConstraintSet, z,
                  form: CosymplecticForm, rel_tol: float = 1e-10) -> float:
    """Dirac bracket [f, g] - [f, C_A] (M^-1)_AB [C_B, g] at z.

    Requires an invertible commutation matrix; a singular one means some
    gauge freedom is unfixed and raises GaugeNotFixedError.
    """
    z = as_phase_point(z)
    mat = commutation_matrix(cset, z, form)
    bf = np.array([poisson_bracket(f, c.function, z, form) for c in cset])
    bg = np.array([poisson_bracket(c.function, g, z, form) for c in cset])
    correction = float(bf @ mat.solve(bg, rel_tol)) if len(cset) else 0.0
    return poisson_bracket(f, g, z, form) - correction


def gauge_fixed_multipliers(cset: ConstraintSet, system: HamiltonianSystem,
                            z) -> np.ndarray:
    """Multipliers that freeze the constraints along the extended flow.

    Solves M Lambda = -[C, H] so that d/dt C_B = [C_B, H] + Lambda^A
    [C_B, C_A] vanishes; the extended Hamiltonian H + Lambda . C then
    transports the constraint surface into itself to first order.
    """
    z = as_phase_point(z)
    mat = commutation_matrix(cset, z, system.form)
    b = np.array([
        poisson_bracket(c.function, system.hamiltonian, z, system.form) for c in cset
    ])
    return -mat.solve(b)


def extended_flow(system: HamiltonianSystem, cset: ConstraintSet, z) -> np.ndarray:
    """Flow of H + Lambda . C with the multipliers evaluated at z."""
    z = as_phase_point(z)
    j = system.form.at(z)
    lam = gauge_fixed_multipliers(cset, system, z)
    flow = j @ system.hamiltonian.grad(z)
    for lam_a, c in zip(lam, cset):
        flow = flow + lam_a * (j @ c.grad(z))
    return flow


@dataclass(frozen=True)
class ProjectionReport:
    iterations: int
    initial_norm: float
    final_norm: float
    converged: bool


def error_correction_step(cset: ConstraintSet, z_bar, form: CosymplecticForm,
                          report_tol: float | None = None):
    """One bracket-generated correction step toward the constraint surface.

    The step is the canonical transformation generated by -eps . C with
    frozen coefficients eps = M(z_bar)^{-1} C(z_bar):

        delta_z = -sum_A eps_A J grad C_A (z_bar)

    which cancels the constraint values to first order, and exactly for
    constraints linear in z with constant brackets. Returns (delta_z,
    report); report.converged records whether the post-step values fell
    below report_tol (default 1e-12 scaled by the point size).
    """
    z = as_phase_point(z_bar)
    c_bar = cset.values(z)
    initial = float(np.max(np.abs(c_bar))) if len(cset) else 0.0
    if report_tol is None:
        report_tol = 1e-12 * (1.0 + float(np.max(np.abs(z))))

    mat = commutation_matrix(cset, z, form)
    eps = mat.solve(c_bar)
    jac = cset.jacobian(z)
    delta = -(form.at(z) @ jac.T) @ eps

    final = float(np.max(np.abs(cset.values(z + delta))))
    report = ProjectionReport(1, initial, final, bool(final < report_tol))
    return delta, report


def project_to_constraint_surface(cset: ConstraintSet, z_bar, tol: float = 1e-12,
                                  max_iter: int = 20,
                                  form: CosymplecticForm | None = None):
    """Iterate error_correction_step until max |C_A| < tol.

    Barred constraint values are recomputed each pass. Non-convergence
    is reported through the returned ProjectionReport, not an exception;
    a singular commutation matrix still raises GaugeNotFixedError.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if form is None:
        form = CosymplecticForm.canonical(cset.dim // 2)
    z = as_phase_point(z_bar).astype(float).copy()
    initial = float(np.max(np.abs(cset.values(z)))) if len(cset) else 0.0
    if initial < tol:
        return z, ProjectionReport(0, initial, initial, True)
    final = initial
    for it in range(1, max_iter + 1):
        delta, _ = error_correction_step(cset, z, form)
        z = z + delta
        final = float(np.max(np.abs(cset.values(z))))
        if final < tol:
            return z, ProjectionReport(it, initial, final, True)
    return z, ProjectionReport(max_iter, initial, final, False)


def second_order_coefficients(cset: ConstraintSet, z_bar,
                              form: CosymplecticForm) -> np.ndarray:
    """Second-order correction coefficients (diagnostic).

    Extends the frozen first-order coefficients with the terms that
    appear when the constraint brackets depend on the phase-space point:

        eps2_G = sum_P (M^-1)_GP [[C_P, E], E]
               + 1/2 sum_{S,P,T} (M^-1)_GS (M^-1)_PT [[C_S, C_T], E] [C_P, E]

    where E = -eps1 . C is the first-order generator. Identically zero
    when all brackets are constant, which covers every shipped scenario;
    provided so field-dependent algebras can at least be probed.
    """
    z = as_phase_point(z_bar)
    m = len(cset)
    mat = commutation_matrix(cset, z, form)
    eps1 = mat.solve(cset.values(z))
    minv = np.linalg.inv(mat.entries)

    def e_value(pt, eps=eps1, cs=cset):
        return -float(eps @ cs.values(pt))

    def e_gradient(pt, eps=eps1, cs=cset):
        return -(cs.jacobian(pt).T @ eps)

    e_fn = PhaseFunction(e_value, e_gradient, label="correction generator")

    # [C_P, E] both as numbers at z and as functions for the outer brackets.
    ce_fns = [bracket_function(c.function, e_fn, form) for c in cset]
    ce_vals = np.array([fn(z) for fn in ce_fns])
    term1 = minv @ np.array([poisson_bracket(fn, e_fn, z, form) for fn in ce_fns])

    ccbe = np.zeros((m, m))
    for s in range(m):
        for t in range(m):
            if s == t:
                continue
            pair = bracket_function(cset[s].function, cset[t].function, form)
            ccbe[s, t] = poisson_bracket(pair, e_fn, z, form)
    term2 = 0.5 * (minv @ (ccbe @ (minv.T @ ce_vals)))
    return term1 + term2

"""User-guided local control on top of a fitted surrogate.

The control coefficients are factorized as G = H C, where H stacks unit-norm
localized spatial control columns (reduced-space directions built from a
region, block, and direction the user picked) and C holds their temporal
Fourier coefficients. One column j* is selected per edit and its activation
sequence (C s_t)_{j*} is pulled toward a wrapped-Gaussian target profile,
while closure stays a hard constraint. The unknowns are q = [z_1; vec(C)].

Unlike the base solver's control-energy term, the regularizer here is the
plain coefficient norm ||C||_F^2; both forms are implemented exactly as
specified by their respective objectives.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import numerics
from .control_basis import FourierBasis, LocalBasisSet, TemporalProfile
from .cyclic_solver import REROLLOUT_TOL, rollout_blocks
from .koopman import ReducedModel
from .trajectory import FieldLayout, Trajectory
from .validation import Array, require


class EditSolveError(RuntimeError):
    """Edit solve failed (singular KKT system or broken closure)."""


@dataclass(frozen=True)
class EditWeights:
    """Weights of the edit objective; w_profile may be zero (profile off)."""

    w_red: float = 1e-2
    w_u: float = 3.0
    w_profile: float = 10.0

    def __post_init__(self):
        require(self.w_red > 0.0, f"w_red must be > 0, got {self.w_red}")
        require(self.w_u > 0.0, f"w_u must be > 0, got {self.w_u}")
        require(self.w_profile >= 0.0, f"w_profile must be >= 0, got {self.w_profile}")


@dataclass(frozen=True)
class EditProblem:
    """One localized edit: which basis column to drive, toward what profile."""

    model: ReducedModel
    basis: FourierBasis
    local_bases: LocalBasisSet
    selected_index: int
    profile: TemporalProfile
    weights: EditWeights = EditWeights()

    def __post_init__(self):
        require(
            0 <= self.selected_index < self.local_bases.k,
            f"selected_index must be in 0..{self.local_bases.k - 1}, "
            f"got {self.selected_index}",
        )
        require(
            self.profile.values.shape[0] == self.basis.period,
            f"profile length {self.profile.values.shape[0]} must equal "
            f"period {self.basis.period}",
        )


@dataclass(frozen=True)
class EditSolution:
    """Solved edit: initial state, temporal coefficients, and reconstructions."""

    z1_opt: Array
    coeffs: Array
    duals: Array
    reduced_cycle: Array
    full_cycle: Trajectory
    metrics: dict

    @property
    def period(self) -> int:
        return int(self.reduced_cycle.shape[0]) - 1


def build_edit_rollout(model: ReducedModel, basis: FourierBasis,
                       local_matrix: Array, period: int) -> Array:
    """Rollout blocks A_1..A_{T+1} for the factorized control G = H C.

    Each block maps q = [z_1; vec(C)] to one state of the recursion
    z_{t+1} = K z_t + H C s_t; the injection at step t is [0 | H (s_t^T kron I_k)].
    """
    require(basis.period == period, "basis period must match rollout period")
    local_matrix = np.asarray(local_matrix, dtype=np.float64)
    r, k = local_matrix.shape
    require(r == model.rank, f"local basis rows {r} must equal model rank {model.rank}")
    injections = np.empty((period, r, k * basis.m))
    for t in range(1, period + 1):
        injections[t - 1] = local_matrix @ numerics.control_block(basis.evaluate(t), k)
    return rollout_blocks(model.operator, injections)


def selection_matrix(basis: FourierBasis, k: int, selected_index: int) -> Array:
    """Rows map vec(C) to the selected column's activations (C s_t)_{j*}, t = 1..T."""
    unit = np.zeros(k)
    unit[selected_index] = 1.0
    rows = np.empty((basis.period, k * basis.m))
    for t in range(1, basis.period + 1):
        rows[t - 1] = np.kron(basis.evaluate(t), unit)
    return rows


def solve_edit(problem: EditProblem, observed: Array, dt: float = 1.0,
               layout: FieldLayout | None = None) -> EditSolution:
    """Solve one edit from scratch (no caching); see EditSession for the
    incremental path. `observed` holds reduced frames z_1..z_T as rows."""
    session = EditSession(
        model=problem.model,
        basis=problem.basis,
        observed=observed,
        dt=dt,
        layout=layout,
    )
    return session.solve(problem.local_bases, problem.selected_index,
                         problem.profile, problem.weights)


@dataclass
class _RolloutCache:
    """Per-spatial-basis cached QP pieces, reused across edits."""

    blocks: Array
    stacked_gram: Array
    stacked_rhs: Array
    closure: Array


class EditSession:
    """Serializes edit solves over one fitted model and caches rollout work.

    The rollout blocks, the stacked Gram matrix F^T F, the data term F^T y,
    and the closure row block depend only on (model, basis, spatial basis), so
    they are cached per spatial-basis content hash; each edit only rebuilds
    the profile-dependent Hessian and right-hand-side terms. Edits are applied
    under a lock (single writer); the latest solution is a plain immutable
    snapshot that readers may grab without locking.
    """

    def __init__(self, model: ReducedModel, basis: FourierBasis, observed: Array,
                 dt: float = 1.0, layout: FieldLayout | None = None):
        observed = np.asarray(observed, dtype=np.float64)
        require(
            observed.shape == (basis.period, model.rank),
            f"observed must be (T, r) = ({basis.period}, {model.rank}), "
            f"got {observed.shape}",
        )
        self.model = model
        self.basis = basis
        self.observed = observed
        self.dt = dt
        self.layout = layout
        self.latest: EditSolution | None = None
        self._cache: dict[str, _RolloutCache] = {}
        self._lock = threading.Lock()

    def _cache_for(self, local_matrix: Array) -> _RolloutCache:
        key = hashlib.sha256(
            np.ascontiguousarray(local_matrix, dtype="<f8").tobytes()
        ).hexdigest()
        cached = self._cache.get(key)
        if cached is None:
            blocks = build_edit_rollout(self.model, self.basis, local_matrix,
                                        self.basis.period)
            r = self.model.rank
            stacked = blocks[: self.basis.period].reshape(self.basis.period * r, -1)
            cached = _RolloutCache(
                blocks=blocks,
                stacked_gram=stacked.T @ stacked,
                stacked_rhs=stacked.T @ self.observed.reshape(-1),
                closure=blocks[self.basis.period] - blocks[0],
            )
            self._cache[key] = cached
        return cached

    def solve(self, local_bases: LocalBasisSet, selected_index: int,
              profile: TemporalProfile, weights: EditWeights = EditWeights()
              ) -> EditSolution:
        """Solve one edit, reusing cached rollout structure when possible."""
        problem = EditProblem(
            model=self.model,
            basis=self.basis,
            local_bases=local_bases,
            selected_index=selected_index,
            profile=profile,
            weights=weights,
        )
        with self._lock:
            solution = self._solve_locked(problem)
            self.latest = solution
            return solution

    def _solve_locked(self, problem: EditProblem) -> EditSolution:
        t0 = time.perf_counter()
        model, basis, weights = self.model, self.basis, problem.weights
        r, k, period = model.rank, problem.local_bases.k, basis.period
        local_matrix = problem.local_bases.matrix
        cache = self._cache_for(local_matrix)

        sel = selection_matrix(basis, k, problem.selected_index)
        coeff_dim = k * basis.m
        hessian = 2.0 * weights.w_red * cache.stacked_gram.copy()
        idx = np.arange(r, r + coeff_dim)
        hessian[idx, idx] += 2.0 * weights.w_u
        if weights.w_profile > 0.0:
            hessian[r:, r:] += 2.0 * weights.w_profile * (sel.T @ sel)
        hessian = 0.5 * (hessian + hessian.T)
        rhs = 2.0 * weights.w_red * cache.stacked_rhs.copy()
        if weights.w_profile > 0.0:
            rhs[r:] += 2.0 * weights.w_profile * (sel.T @ problem.profile.values)

        try:
            q, duals = numerics.solve_kkt(hessian, cache.closure, rhs, np.zeros(r))
        except numerics.KKTSolveError as exc:
            raise EditSolveError(f"edit KKT solve failed: {exc}") from exc

        z1 = q[:r]
        coeffs = q[r:].reshape((k, basis.m), order="F")
        cycle = self._controlled_cycle(local_matrix, coeffs, z1)
        closed_form = cache.blocks @ q
        gap = float(np.max(np.abs(cycle - closed_form)))
        if gap > REROLLOUT_TOL * (1.0 + float(np.max(np.abs(closed_form)))):
            raise EditSolveError(
                f"re-rolled recursion deviates from closed-form states by {gap:.3e}"
            )

        closure_residual = float(np.linalg.norm(cycle[period] - cycle[0]))
        tol = 1e-8 * (1.0 + float(np.linalg.norm(z1)))
        if closure_residual > tol:
            raise EditSolveError(
                f"closure residual {closure_residual:.3e} exceeds tolerance {tol:.3e}"
            )

        activation = sel @ q[r:]
        profile_rmse = float(
            np.sqrt(np.mean((activation - problem.profile.values) ** 2))
        )
        full_frames = cycle @ model.basis.T
        layout = self.layout
        if layout is None:
            from .trajectory import flat_layout

            layout = flat_layout(model.n)
        full_cycle = Trajectory(frames=full_frames, dt=self.dt, layout=layout)
        kkt_rel = numerics.kkt_residual(hessian, cache.closure, rhs, np.zeros(r), q, duals)
        metrics = {
            "closure_residual": closure_residual,
            "profile_rmse": profile_rmse,
            "kkt_residual": kkt_rel,
            "solve_seconds": time.perf_counter() - t0,
        }
        return EditSolution(
            z1_opt=z1,
            coeffs=coeffs,
            duals=duals,
            reduced_cycle=cycle,
            full_cycle=full_cycle,
            metrics=metrics,
        )

    def _controlled_cycle(self, local_matrix: Array, coeffs: Array, z1: Array) -> Array:
        period, r = self.basis.period, self.model.rank
        out = np.empty((period + 1, r))
        out[0] = z1
        for t in range(1, period + 1):
            out[t] = self.model.operator @ out[t - 1] + local_matrix @ (
                coeffs @ self.basis.evaluate(t)
            )
        return out

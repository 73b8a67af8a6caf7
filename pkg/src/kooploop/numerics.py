"""Dense linear-algebra kernels used by every other module.

Truncated SVD, minimum-norm least squares via the pseudoinverse,
Kronecker-structured control blocks, and a symmetric-indefinite solve for
saddle-point (KKT) systems. Everything is plain float64 and pure: no global
state, safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .validation import Array, as_matrix, as_vector, require

DEFAULT_REL_TOL = 1e-12

# Constraint rows with norm below this are treated as numerically zero and
# dropped before the saddle solve (their multipliers are reported as 0).
ZERO_ROW_TOL = 1e-12


class KKTSolveError(RuntimeError):
    """Saddle-point solve failed; carries condition diagnostics."""


@dataclass(frozen=True)
class SvdTruncation:
    """Rank-truncated SVD: ``basis @ diag(singular_values) @ right_vectors.T``.

    ``basis`` is n-by-r with orthonormal columns, ``singular_values`` is
    descending and strictly positive, ``right_vectors`` is cols-by-r.
    """

    basis: Array
    singular_values: Array
    right_vectors: Array

    @property
    def effective_rank(self) -> int:
        return int(self.singular_values.shape[0])

    def reconstruct(self) -> Array:
        return (self.basis * self.singular_values) @ self.right_vectors.T


def truncated_svd(m, rank: int, rel_tol: float = DEFAULT_REL_TOL) -> SvdTruncation:
    """Top-`rank` singular triplets of `m`.

    Trailing singular values below ``rel_tol * sigma_max`` are dropped, so the
    effective rank of the result may be smaller than requested.
    """
    m = as_matrix(m, "m")
    require(rank >= 1, f"rank must be >= 1, got {rank}")
    require(
        rank <= min(m.shape),
        f"rank {rank} exceeds min(rows, cols) = {min(m.shape)}",
    )
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s[0] <= 0.0:
        raise ValueError("matrix has no nonzero singular values")
    keep = max(1, min(rank, int(np.sum(s > rel_tol * s[0]))))
    return SvdTruncation(
        basis=u[:, :keep].copy(),
        singular_values=s[:keep].copy(),
        right_vectors=vt[:keep].T.copy(),
    )


def lstsq_operator(targets, inputs, rel_tol: float = DEFAULT_REL_TOL) -> Array:
    """Minimum-norm `A` minimizing ``||targets - A @ inputs||_F``.

    Computed through the SVD pseudoinverse of `inputs`; singular values below
    ``rel_tol * sigma_max`` are treated as zero, which makes the solution the
    minimum-Frobenius-norm minimizer under rank deficiency.
    """
    targets = as_matrix(targets, "targets")
    inputs = as_matrix(inputs, "inputs")
    require(
        targets.shape[1] == inputs.shape[1],
        f"targets and inputs must share column count, "
        f"got {targets.shape[1]} vs {inputs.shape[1]}",
    )
    u, s, vt = np.linalg.svd(inputs, full_matrices=False)
    inv_s = np.where(s > rel_tol * (s[0] if s[0] > 0 else 1.0), 1.0 / np.where(s > 0, s, 1.0), 0.0)
    # A = targets @ V diag(1/s) U^T
    return (targets @ vt.T) * inv_s @ u.T


def control_block(s: Array, r: int) -> Array:
    """``(s^T kron I_r)``: maps column-major vec(G) to ``G @ s`` for r-by-m G."""
    s = as_vector(s, "s")
    return np.kron(s[np.newaxis, :], np.eye(r))


def solve_kkt(hessian, constraints, rhs_primal, rhs_dual) -> tuple[Array, Array]:
    """Solve the saddle system ``[[H, C^T], [C, 0]] [q; nu] = [b_p; b_d]``.

    `H` must be symmetric; numerically zero rows of `C` are dropped (their
    multipliers come back as 0, and a nonzero right-hand side on a dropped row
    is an infeasibility error). Uses a Bunch-Kaufman style pivoted symmetric
    factorization of the full saddle matrix, which is small at the problem
    sizes handled here. A singular system raises KKTSolveError with condition
    diagnostics instead of being silently regularized.
    """
    hessian = as_matrix(hessian, "hessian")
    n = hessian.shape[0]
    require(hessian.shape[1] == n, f"hessian must be square, got {hessian.shape}")
    h_norm = np.linalg.norm(hessian)
    sym_gap = np.linalg.norm(hessian - hessian.T)
    require(
        sym_gap <= 1e-9 * max(h_norm, 1e-300),
        f"hessian is not symmetric: ||H - H^T|| = {sym_gap:.3e} vs ||H|| = {h_norm:.3e}",
    )
    rhs_primal = as_vector(rhs_primal, "rhs_primal", n)

    constraints = np.asarray(constraints, dtype=np.float64)
    if constraints.size == 0:
        constraints = constraints.reshape(0, n)
    require(
        constraints.ndim == 2 and constraints.shape[1] == n,
        f"constraints must be k-by-{n}, got shape {constraints.shape}",
    )
    n_rows = constraints.shape[0]
    rhs_dual = as_vector(rhs_dual, "rhs_dual") if n_rows else np.zeros(0)
    require(
        rhs_dual.shape[0] == n_rows,
        f"rhs_dual must have one entry per constraint row ({n_rows}), got {rhs_dual.shape[0]}",
    )

    row_norms = np.linalg.norm(constraints, axis=1) if n_rows else np.zeros(0)
    live = row_norms >= ZERO_ROW_TOL
    dropped_rhs = rhs_dual[~live] if n_rows else rhs_dual
    if dropped_rhs.size and np.max(np.abs(dropped_rhs)) > ZERO_ROW_TOL:
        raise KKTSolveError(
            "constraint row is numerically zero but its right-hand side is not: "
            f"max |rhs| on dropped rows = {np.max(np.abs(dropped_rhs)):.3e}"
        )
    c_live = constraints[live]
    b_live = rhs_dual[live]
    k = c_live.shape[0]

    if k == 0:
        try:
            primal = scipy.linalg.solve(hessian, rhs_primal, assume_a="sym")
        except scipy.linalg.LinAlgError as exc:
            raise KKTSolveError(f"unconstrained Hessian solve failed: {exc}") from exc
        dual = np.zeros(n_rows)
        _check_kkt_residual(hessian, c_live, rhs_primal, b_live, primal, np.zeros(0))
        return primal, dual

    saddle = np.zeros((n + k, n + k))
    saddle[:n, :n] = hessian
    saddle[:n, n:] = c_live.T
    saddle[n:, :n] = c_live
    rhs = np.concatenate([rhs_primal, b_live])
    try:
        sol = scipy.linalg.solve(saddle, rhs, assume_a="sym")
    except scipy.linalg.LinAlgError as exc:
        raise KKTSolveError(_singular_diagnostics(saddle, c_live, str(exc))) from exc
    if not np.all(np.isfinite(sol)):
        raise KKTSolveError(_singular_diagnostics(saddle, c_live, "non-finite solution"))

    primal = sol[:n]
    dual_live = sol[n:]
    _check_kkt_residual(hessian, c_live, rhs_primal, b_live, primal, dual_live)

    dual = np.zeros(n_rows)
    dual[live] = dual_live
    return primal, dual


def kkt_residual(hessian, constraints, rhs_primal, rhs_dual, primal, dual) -> float:
    """Relative residual of the stacked KKT equations at (primal, dual)."""
    stat = hessian @ primal + (constraints.T @ dual if constraints.size else 0.0) - rhs_primal
    feas = constraints @ primal - rhs_dual if constraints.size else np.zeros(0)
    rhs_scale = 1.0 + np.linalg.norm(np.concatenate([rhs_primal, np.atleast_1d(rhs_dual)]))
    return float(np.linalg.norm(np.concatenate([stat, feas])) / rhs_scale)


def _check_kkt_residual(hessian, c_live, rhs_primal, b_live, primal, dual_live) -> None:
    rel = kkt_residual(hessian, c_live, rhs_primal, b_live, primal, dual_live)
    if rel > 1e-8:
        raise KKTSolveError(
            _singular_diagnostics(
                _assemble_saddle(hessian, c_live),
                c_live,
                f"relative residual {rel:.3e} exceeds 1e-8",
            )
        )


def _assemble_saddle(hessian: Array, c_live: Array) -> Array:
    n, k = hessian.shape[0], c_live.shape[0]
    saddle = np.zeros((n + k, n + k))
    saddle[:n, :n] = hessian
    saddle[:n, n:] = c_live.T
    saddle[n:, :n] = c_live
    return saddle


def _singular_diagnostics(saddle: Array, c_live: Array, reason: str) -> str:
    s = np.linalg.svd(saddle, compute_uv=False)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    c_rank = int(np.linalg.matrix_rank(c_live)) if c_live.size else 0
    return (
        f"KKT system is singular or badly conditioned ({reason}); "
        f"cond(saddle) = {cond:.3e}, sigma_min = {s[-1]:.3e}, "
        f"constraint rows = {c_live.shape[0]}, constraint rank = {c_rank}"
    )

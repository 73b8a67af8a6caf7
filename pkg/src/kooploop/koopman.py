"""One-step linear surrogate models fitted from snapshot data.

``fit_full`` regresses a dense n-by-n operator directly on full-space
snapshots; ``fit_reduced`` first projects onto the dominant left singular
vectors of X and fits the small r-by-r operator in that subspace. A fitted
ReducedModel is immutable and can be shared across threads.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import numerics
from .validation import Array, as_matrix, as_vector, require

KOOP_VERSION = 1

# Dense full-space operators are quadratic in n; above this the reduced path
# is the only practical one and fit_full refuses to allocate n^2 entries.
FULL_FIT_MAX_DIM = 2000


@dataclass(frozen=True)
class ReducedModel:
    """Orthonormal basis plus the one-step operator fitted in its span.

    `basis` is n-by-r with orthonormal columns, `operator` is r-by-r, and
    `reduced_snapshots` holds the projected snapshot pair (Z, Z') the operator
    was fitted on. `fit_residual` is ||Z' - K Z||_F / ||Z'||_F.
    """

    basis: Array
    operator: Array
    reduced_snapshots: tuple[Array, Array]
    fit_residual: float
    spectral_radius: float

    def __post_init__(self):
        r = self.rank
        require(self.operator.shape == (r, r), "operator must be r-by-r")
        gram_gap = np.linalg.norm(self.basis.T @ self.basis - np.eye(r))
        require(gram_gap <= 1e-10, f"basis columns not orthonormal (gap {gram_gap:.3e})")
        require(self.fit_residual >= 0.0, "fit residual must be nonnegative")

    @property
    def n(self) -> int:
        return int(self.basis.shape[0])

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])


def fit_full(x, x_prime) -> tuple[Array, float]:
    """Least-squares one-step operator K with ``x' ~= K x``, plus its residual.

    Returns the minimum-norm minimizer of ||X' - A X||_F and the relative
    Frobenius residual. Restricted to state dimensions <= FULL_FIT_MAX_DIM;
    use fit_reduced for high-dimensional states.
    """
    x = as_matrix(x, "x")
    x_prime = as_matrix(x_prime, "x_prime")
    require(
        x.shape[1] == x_prime.shape[1],
        f"snapshot column counts differ: {x.shape[1]} vs {x_prime.shape[1]}",
    )
    require(
        x.shape[0] <= FULL_FIT_MAX_DIM,
        f"full-space fit limited to n <= {FULL_FIT_MAX_DIM}, got n = {x.shape[0]}; "
        "use fit_reduced instead",
    )
    k = numerics.lstsq_operator(x_prime, x)
    residual = _relative_residual(x_prime, k, x)
    return k, residual


def fit_reduced(x, x_prime, rank: int,
                rel_tol: float = numerics.DEFAULT_REL_TOL) -> ReducedModel:
    """Fit the reduced surrogate in the span of X's top singular vectors.

    The basis is the rank-`rank` truncated SVD of X (X only, not [X X']).
    If `rank` exceeds the numerical rank of X, a warning is emitted and the
    effective rank is used; see fit_reduced_auto for energy-based selection.
    """
    x = as_matrix(x, "x")
    x_prime = as_matrix(x_prime, "x_prime")
    require(
        x.shape == x_prime.shape,
        f"snapshot shapes differ: {x.shape} vs {x_prime.shape}",
    )
    require(rank >= 1, f"rank must be >= 1, got {rank}")
    rank = min(rank, min(x.shape))
    svd = numerics.truncated_svd(x, rank, rel_tol)
    if svd.effective_rank < rank:
        warnings.warn(
            f"requested rank {rank} exceeds numerical rank of X; "
            f"falling back to effective rank {svd.effective_rank}",
            RuntimeWarning,
            stacklevel=2,
        )
    basis = svd.basis
    z = basis.T @ x
    z_prime = basis.T @ x_prime
    operator = numerics.lstsq_operator(z_prime, z)
    return ReducedModel(
        basis=basis,
        operator=operator,
        reduced_snapshots=(z, z_prime),
        fit_residual=_relative_residual(z_prime, operator, z),
        spectral_radius=float(np.max(np.abs(np.linalg.eigvals(operator)))),
    )


def fit_reduced_auto(x, x_prime, energy: float = 0.9999,
                     rel_tol: float = numerics.DEFAULT_REL_TOL) -> ReducedModel:
    """fit_reduced with rank chosen to capture `energy` of the singular-value energy."""
    x = as_matrix(x, "x")
    require(0.0 < energy <= 1.0, f"energy must be in (0, 1], got {energy}")
    s = np.linalg.svd(x, compute_uv=False)
    cumulative = np.cumsum(s**2) / np.sum(s**2)
    rank = int(np.searchsorted(cumulative, energy) + 1)
    return fit_reduced(x, x_prime, rank=rank, rel_tol=rel_tol)


def reduce_coords(model: ReducedModel, x) -> Array:
    """Project a full-space state onto the reduced coordinates U^T x."""
    x = as_vector(x, "x", model.n)
    return model.basis.T @ x


def lift(model: ReducedModel, z) -> Array:
    """Map reduced coordinates back to the full space, x = U z."""
    z = as_vector(z, "z", model.rank)
    return model.basis @ z


def rollout(model: ReducedModel, z1, steps: int) -> Array:
    """Uncontrolled rollout z_1..z_steps with z_{t+1} = K z_t, one row per step."""
    z1 = as_vector(z1, "z1", model.rank)
    require(steps >= 1, f"steps must be >= 1, got {steps}")
    out = np.empty((steps, model.rank))
    out[0] = z1
    for t in range(1, steps):
        out[t] = model.operator @ out[t - 1]
    return out


def holdout_error(model: ReducedModel, x_last_fit, x_holdout) -> float:
    """One-step prediction error on a held-out frame, in reduced coordinates."""
    z_last = reduce_coords(model, x_last_fit)
    z_hold = reduce_coords(model, x_holdout)
    return float(np.linalg.norm(z_hold - model.operator @ z_last))


def save_model(model: ReducedModel, path) -> None:
    """Write a .koop file: JSON header line, then U and K as little-endian f64."""
    header = {
        "version": KOOP_VERSION,
        "n": model.n,
        "r": model.rank,
        "fit_residual": model.fit_residual,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(model.basis, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.operator, dtype="<f8").tobytes())


def load_model(path) -> ReducedModel:
    """Read a .koop file written by save_model.

    The stored model carries no snapshots; `reduced_snapshots` come back empty.
    """
    with open(path, "rb") as fh:
        try:
            header = json.loads(fh.readline().decode("utf-8"))
            n, r = int(header["n"]), int(header["r"])
            fit_residual = float(header["fit_residual"])
        except (KeyError, ValueError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"malformed .koop header: {exc}") from exc
        payload = fh.read()
    expected = (n * r + r * r) * 8
    if len(payload) != expected:
        raise ValueError(
            f"payload size mismatch: expected {expected} bytes, got {len(payload)}"
        )
    basis = np.frombuffer(payload[: n * r * 8], dtype="<f8").reshape(n, r).copy()
    operator = np.frombuffer(payload[n * r * 8:], dtype="<f8").reshape(r, r).copy()
    empty = np.zeros((r, 0))
    return ReducedModel(
        basis=basis,
        operator=operator,
        reduced_snapshots=(empty, empty),
        fit_residual=fit_residual,
        spectral_radius=float(np.max(np.abs(np.linalg.eigvals(operator)))),
    )


def _relative_residual(targets: Array, operator: Array, inputs: Array) -> float:
    denom = np.linalg.norm(targets)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(targets - operator @ inputs) / denom)

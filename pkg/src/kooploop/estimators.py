"""Scikit-learn style estimators wrapping the functional pipeline.

Frames follow the sklearn sample convention: one row per frame, one column
per state component. `KoopmanReducer` is a transformer into and out of the
reduced coordinates; `CyclicLoopPlanner` learns the surrogate and rollout
structure in ``fit`` and synthesizes an exactly closed loop for the frames
handed to ``transform``. Both compose with pipelines, ``get_params`` /
``set_params``, and ``clone``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import koopman, numerics
from .control_basis import FourierBasis
from .cyclic_solver import (
    SolverWeights,
    assemble_qp,
    build_rollout,
    controlled_rollout,
)
from .validation import require


def _check_frames(x, min_frames: int = 3) -> np.ndarray:
    frames = check_array(x, dtype=np.float64, ensure_all_finite=True)
    require(frames.shape[0] >= min_frames,
            f"need at least {min_frames} frames, got {frames.shape[0]}")
    return frames


class KoopmanReducer(BaseEstimator, TransformerMixin):
    """Project frame sequences onto their dominant modes and fit the one-step
    operator there.

    Parameters
    ----------
    rank : int or None
        Subspace dimension; None selects it by singular-value energy.
    energy : float
        Energy fraction used when rank is None.
    rel_tol : float
        Relative singular-value cutoff for the basis and operator fits.

    Attributes
    ----------
    model_ : ReducedModel
    basis_ : ndarray of shape (n, r)
    operator_ : ndarray of shape (r, r)
    """

    def __init__(self, rank: int | None = 8, energy: float = 0.9999,
                 rel_tol: float = numerics.DEFAULT_REL_TOL):
        self.rank = rank
        self.energy = energy
        self.rel_tol = rel_tol

    def fit(self, X, y=None):
        frames = _check_frames(X)
        x = frames[:-1].T
        x_prime = frames[1:].T
        if self.rank is None:
            self.model_ = koopman.fit_reduced_auto(x, x_prime, energy=self.energy,
                                                   rel_tol=self.rel_tol)
        else:
            self.model_ = koopman.fit_reduced(x, x_prime, rank=self.rank,
                                              rel_tol=self.rel_tol)
        self.basis_ = self.model_.basis
        self.operator_ = self.model_.operator
        self.n_features_in_ = frames.shape[1]
        return self

    def transform(self, X):
        """Reduced coordinates of each frame, shape (frames, r)."""
        check_is_fitted(self, "model_")
        frames = check_array(X, dtype=np.float64)
        require(frames.shape[1] == self.n_features_in_,
                f"expected {self.n_features_in_} state components, got {frames.shape[1]}")
        return frames @ self.basis_

    def inverse_transform(self, Z):
        """Lift reduced coordinates back to the full space."""
        check_is_fitted(self, "model_")
        z = check_array(Z, dtype=np.float64)
        require(z.shape[1] == self.model_.rank,
                f"expected {self.model_.rank} reduced coordinates, got {z.shape[1]}")
        return z @ self.basis_.T

    def predict(self, X):
        """One-step-ahead prediction of each frame through the surrogate."""
        z = self.transform(X)
        return (z @ self.operator_.T) @ self.basis_.T


class CyclicLoopPlanner(BaseEstimator, TransformerMixin):
    """Synthesize an exactly closed loop from an observed frame sequence.

    ``fit`` learns the reduced surrogate and builds the rollout/QP structure
    from all but the last input frame; ``transform`` projects the given
    frames, solves the closure-constrained QP for them, and returns the
    lifted loop with T + 1 rows (last row equals the first to solver
    precision).

    Parameters mirror the pipeline: subspace ``rank`` (None for energy-based
    selection), Fourier ``harmonics``, fidelity/control weights, and the
    control penalty form ("energy" for the Gram-weighted control magnitude,
    "coeff" for the plain coefficient norm).
    """

    def __init__(self, rank: int | None = None, harmonics: int = 8,
                 w_red: float = 1e-2, w_u: float = 3.0,
                 include_constant: bool = False,
                 control_penalty: str = "energy", energy: float = 0.9999):
        self.rank = rank
        self.harmonics = harmonics
        self.w_red = w_red
        self.w_u = w_u
        self.include_constant = include_constant
        self.control_penalty = control_penalty
        self.energy = energy

    def fit(self, X, y=None):
        frames = _check_frames(X)
        period = frames.shape[0] - 1
        require(2 * self.harmonics < period,
                f"need 2 * harmonics < {period}, got harmonics = {self.harmonics}")
        reducer = KoopmanReducer(rank=self.rank, energy=self.energy)
        reducer.fit(frames[:period])
        self.reducer_ = reducer
        self.period_ = period
        self.fourier_ = FourierBasis(period=period, harmonics=self.harmonics,
                                     include_constant=self.include_constant)
        self.system_ = build_rollout(reducer.model_, self.fourier_, period)
        self.n_features_in_ = frames.shape[1]
        return self

    def transform(self, X):
        """Loop frames of shape (period + 1, n) fitted to the given sequence."""
        check_is_fitted(self, "system_")
        frames = check_array(X, dtype=np.float64)
        require(frames.shape[0] >= self.period_,
                f"need at least {self.period_} frames, got {frames.shape[0]}")
        require(frames.shape[1] == self.n_features_in_,
                f"expected {self.n_features_in_} state components, got {frames.shape[1]}")
        observed = frames[: self.period_] @ self.reducer_.basis_
        weights = SolverWeights(w_red=self.w_red, w_u=self.w_u)
        hessian, rhs, closure = assemble_qp(self.system_, observed, weights,
                                            self.control_penalty)
        rank = self.reducer_.model_.rank
        q, _ = numerics.solve_kkt(hessian, closure, rhs, np.zeros(rank))
        z1 = q[:rank]
        gamma = q[rank:].reshape((rank, self.fourier_.m), order="F")
        cycle = controlled_rollout(self.reducer_.operator_, gamma, self.fourier_,
                                   z1, self.period_)
        self.gamma_ = gamma
        self.z1_ = z1
        self.closure_residual_ = float(np.linalg.norm(cycle[-1] - cycle[0]))
        return cycle @ self.reducer_.basis_.T

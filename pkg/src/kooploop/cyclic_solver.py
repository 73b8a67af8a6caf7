"""Cyclic loop synthesis as an equality-constrained quadratic program.

Given a fitted reduced surrogate K and a Fourier basis s_t, every controlled
state z_t = K z_{t-1} + G s_{t-1} is linear in the stacked unknowns
q = [z_1; vec(G)] through recursively built rollout matrices R_t. Fidelity to
the observed reduced frames plus a control-energy penalty gives a quadratic
objective, and the hard closure constraint (R_{T+1} - R_1) q = 0 makes the
synthesized loop exactly periodic. The KKT solve, re-rollout, and lift back to
the full space are packaged in solve_cyclic.

vec(G) is column-major throughout (so (s^T kron I_r) vec(G) = G s), including
in the .cyc serialization.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import koopman, numerics
from .control_basis import FourierBasis
from .koopman import ReducedModel
from .trajectory import Trajectory, snapshot_pair
from .validation import Array, require

CYC_VERSION = 1

# Agreement required between the closed-form states A q and the re-rolled
# recursion; larger gaps indicate a badly conditioned surrogate.
REROLLOUT_TOL = 1e-10


class CyclicSolveError(RuntimeError):
    """Loop synthesis failed (singular KKT system or broken closure)."""


@dataclass(frozen=True)
class SolverWeights:
    """Fidelity/control trade-off weights; both strictly positive."""

    w_red: float = 1e-2
    w_u: float = 3.0

    def __post_init__(self):
        require(self.w_red > 0.0, f"w_red must be > 0, got {self.w_red}")
        require(self.w_u > 0.0, f"w_u must be > 0, got {self.w_u}")


@dataclass(frozen=True)
class RolloutSystem:
    """Rollout matrices and derived QP structure for one (model, basis, T).

    `blocks[t]` is R_{t+1} (0-indexed storage of R_1..R_{T+1}), each r-by-(r+rm).
    `stacked` is A = [R_1; ...; R_T], `closure` is C = R_{T+1} - R_1, and `gram`
    is the Fourier Gram matrix M.
    """

    model: ReducedModel
    basis: FourierBasis
    period: int
    blocks: Array
    stacked: Array
    closure: Array
    gram: Array

    @property
    def rank(self) -> int:
        return self.model.rank

    @property
    def n_unknowns(self) -> int:
        return int(self.blocks.shape[2])


def rollout_blocks(operator: Array, injections: Array) -> Array:
    """Recursively built maps from stacked unknowns to per-frame states.

    Starting from B_1 = [I_r | 0], applies B_{t+1} = K B_t + [0 | inj_t] for
    each of the T injection blocks (inj_t maps the coefficient unknowns into
    the state space at step t). Returns an array of T+1 blocks.
    """
    r = operator.shape[0]
    t_count, _, coeff_dim = injections.shape
    width = r + coeff_dim
    blocks = np.zeros((t_count + 1, r, width))
    blocks[0, :, :r] = np.eye(r)
    for t in range(t_count):
        blocks[t + 1] = operator @ blocks[t]
        blocks[t + 1, :, r:] += injections[t]
    return blocks


def fourier_injections(basis: FourierBasis, rank: int) -> Array:
    """Injection blocks (s_t^T kron I_r) for t = 1..T, shape (T, r, r*m)."""
    out = np.empty((basis.period, rank, rank * basis.m))
    for t in range(1, basis.period + 1):
        out[t - 1] = numerics.control_block(basis.evaluate(t), rank)
    return out


def build_rollout(model: ReducedModel, basis: FourierBasis, period: int) -> RolloutSystem:
    """Assemble rollout matrices, the stacked map A, closure C, and Gram M."""
    require(period >= 2, f"period must be >= 2, got {period}")
    require(
        basis.period == period,
        f"basis period {basis.period} does not match requested period {period}",
    )
    blocks = rollout_blocks(model.operator, fourier_injections(basis, model.rank))
    stacked = blocks[:period].reshape(period * model.rank, -1)
    closure = blocks[period] - blocks[0]
    return RolloutSystem(
        model=model,
        basis=basis,
        period=period,
        blocks=blocks,
        stacked=stacked,
        closure=closure,
        gram=basis.gram(),
    )


def assemble_qp(sys: RolloutSystem, observed: Array, weights: SolverWeights,
                control_penalty: str = "energy") -> tuple[Array, Array, Array]:
    """Hessian, linear term, and constraint of the cyclic QP.

    `observed` holds the reduced frames z_1..z_T as rows. The objective is
    ``w_red ||A q - y||^2`` plus the control term: with the default "energy"
    penalty that is the summed control magnitude ``sum_t ||G s_t||^2``
    (realized through the Gram matrix as vec(G)^T (M kron I_r) vec(G));
    with "coeff" it is the plain coefficient norm ||vec(G)||^2.
    Returns (H, rhs, C) with H = 2 (w_red A^T A + w_u P), rhs = 2 w_red A^T y.
    """
    r, m, t_count = sys.rank, sys.basis.m, sys.period
    observed = np.asarray(observed, dtype=np.float64)
    require(
        observed.shape == (t_count, r),
        f"observed must be (T, r) = ({t_count}, {r}), got {observed.shape}",
    )
    y = observed.reshape(-1)
    a = sys.stacked
    width = a.shape[1]

    if control_penalty == "energy":
        penalty = np.kron(sys.gram, np.eye(r))
    elif control_penalty == "coeff":
        penalty = np.eye(r * m)
    else:
        raise ValueError(f"unknown control_penalty {control_penalty!r}")

    hessian = 2.0 * weights.w_red * (a.T @ a)
    hessian[r:, r:] += 2.0 * weights.w_u * penalty
    hessian = 0.5 * (hessian + hessian.T)
    rhs = 2.0 * weights.w_red * (a.T @ y)
    require(hessian.shape == (width, width), "hessian assembly shape mismatch")
    return hessian, rhs, sys.closure.copy()


@dataclass(frozen=True)
class SolveMetrics:
    """Scalar diagnostics of one loop synthesis."""

    closure_residual: float
    fidelity_cost: float
    control_cost: float
    kkt_residual: float
    preprocess_seconds: float
    solve_seconds: float
    fit_residual: float
    holdout_error: float
    spectral_radius: float
    effective_rank: int

    def to_json(self) -> dict:
        return {
            "closure_residual": self.closure_residual,
            "fidelity_cost": self.fidelity_cost,
            "control_cost": self.control_cost,
            "kkt_residual": self.kkt_residual,
            "preprocess_seconds": self.preprocess_seconds,
            "solve_seconds": self.solve_seconds,
            "fit_residual": self.fit_residual,
            "holdout_error": self.holdout_error,
            "spectral_radius": self.spectral_radius,
            "effective_rank": self.effective_rank,
        }


@dataclass(frozen=True)
class CyclicSolution:
    """Optimized loop: initial state, control coefficients, and reconstructions.

    `reduced_cycle` has T+1 rows (the loop plus its closing frame) and
    `full_cycle` is the lifted trajectory with the same frame count. `gamma`
    is the r-by-m control coefficient matrix, `dual` the closure multipliers.
    """

    z1_opt: Array
    gamma: Array
    dual: Array
    reduced_cycle: Array
    full_cycle: Trajectory
    weights: SolverWeights
    metrics: SolveMetrics
    model: ReducedModel | None = field(repr=False, default=None)
    observed_reduced: Array | None = field(repr=False, default=None)

    @property
    def rank(self) -> int:
        return int(self.z1_opt.shape[0])

    @property
    def period(self) -> int:
        return int(self.reduced_cycle.shape[0]) - 1


def controlled_rollout(operator: Array, gamma: Array, basis: FourierBasis,
                       z1: Array, period: int) -> Array:
    """States z_1..z_{T+1} of the controlled recursion z_{t+1} = K z_t + G s_t."""
    r = operator.shape[0]
    out = np.empty((period + 1, r))
    out[0] = z1
    for t in range(1, period + 1):
        out[t] = operator @ out[t - 1] + gamma @ basis.evaluate(t)
    return out


def solve_cyclic(
    traj: Trajectory,
    rank: int | None = None,
    harmonics: int = 8,
    weights: SolverWeights = SolverWeights(),
    include_constant: bool = False,
    control_penalty: str = "energy",
    energy: float = 0.9999,
) -> CyclicSolution:
    """End-to-end loop synthesis from a sampled trajectory.

    Fits the reduced surrogate on all but the final frame, assembles the
    cyclic QP over the fit period T, solves its KKT system, re-rolls the
    optimal control through the recursion, and lifts the loop back to the
    full space. With ``rank=None`` the subspace dimension is chosen by the
    singular-value energy criterion.
    """
    t_count = traj.frame_count - 1
    require(
        2 * harmonics < t_count,
        f"need 2 * harmonics < fit frame count, got H = {harmonics}, T = {t_count}",
    )

    t0 = time.perf_counter()
    x, x_prime = snapshot_pair(traj, t_count)
    if rank is None:
        model = koopman.fit_reduced_auto(x, x_prime, energy=energy)
    else:
        model = koopman.fit_reduced(x, x_prime, rank=rank)

    basis = FourierBasis(period=t_count, harmonics=harmonics,
                         include_constant=include_constant)
    observed = traj.frames[:t_count] @ model.basis
    sys = build_rollout(model, basis, t_count)
    hessian, rhs, closure = assemble_qp(sys, observed, weights, control_penalty)
    preprocess = time.perf_counter() - t0

    t1 = time.perf_counter()
    try:
        q, dual = numerics.solve_kkt(hessian, closure, rhs, np.zeros(model.rank))
    except numerics.KKTSolveError as exc:
        raise CyclicSolveError(f"cyclic KKT solve failed: {exc}") from exc
    solve_seconds = time.perf_counter() - t1

    solution = _finish_solution(
        sys, q, dual, observed, weights, traj,
        kkt_rel=numerics.kkt_residual(hessian, closure, rhs, np.zeros(model.rank), q, dual),
        preprocess=preprocess,
        solve_seconds=solve_seconds,
        holdout=koopman.holdout_error(model, traj.frames[t_count - 1], traj.frames[t_count]),
        effective_rank=model.rank,
    )
    return solution


def _finish_solution(sys: RolloutSystem, q: Array, dual: Array, observed: Array,
                     weights: SolverWeights, traj: Trajectory, kkt_rel: float,
                     preprocess: float, solve_seconds: float, holdout: float,
                     effective_rank: int) -> CyclicSolution:
    model, basis, t_count = sys.model, sys.basis, sys.period
    r, m = model.rank, basis.m
    z1 = q[:r]
    gamma = q[r:].reshape((r, m), order="F")

    cycle = controlled_rollout(model.operator, gamma, basis, z1, t_count)
    closed_form = sys.blocks @ q  # (T+1, r)
    gap = float(np.max(np.abs(cycle - closed_form)))
    scale = 1.0 + float(np.max(np.abs(closed_form)))
    if gap > REROLLOUT_TOL * scale:
        raise CyclicSolveError(
            f"re-rolled recursion deviates from closed-form states by {gap:.3e}; "
            "the surrogate is too unstable over this period"
        )

    closure_residual = float(np.linalg.norm(cycle[t_count] - cycle[0]))
    tol = 1e-8 * (1.0 + float(np.linalg.norm(z1)))
    if closure_residual > tol:
        raise CyclicSolveError(
            f"closure residual {closure_residual:.3e} exceeds tolerance {tol:.3e}"
        )

    fidelity = float(np.sum((cycle[:t_count] - observed) ** 2))
    controls = gamma @ basis.evaluate_all().T  # (r, T)
    control_cost = float(np.sum(controls**2))

    full_frames = cycle @ model.basis.T
    full_cycle = Trajectory(frames=full_frames, dt=traj.dt, layout=traj.layout)

    metrics = SolveMetrics(
        closure_residual=closure_residual,
        fidelity_cost=fidelity,
        control_cost=control_cost,
        kkt_residual=kkt_rel,
        preprocess_seconds=preprocess,
        solve_seconds=solve_seconds,
        fit_residual=model.fit_residual,
        holdout_error=holdout,
        spectral_radius=model.spectral_radius,
        effective_rank=effective_rank,
    )
    return CyclicSolution(
        z1_opt=z1,
        gamma=gamma,
        dual=dual,
        reduced_cycle=cycle,
        full_cycle=full_cycle,
        weights=weights,
        metrics=metrics,
        model=model,
        observed_reduced=observed,
    )


def evaluate_solution(solution: CyclicSolution, traj: Trajectory) -> dict:
    """Quantify a synthesized loop against its source trajectory.

    Reports closure in reduced and full space, per-frame full-space RMSE over
    the fit period, total control energy, and the seam gap of the raw input
    (distance between its final and first frames) next to the loop's own seam.
    """
    t_count = solution.period
    require(
        traj.frame_count >= t_count,
        f"trajectory has {traj.frame_count} frames, loop period is {t_count}",
    )
    full = solution.full_cycle.frames
    require(
        traj.n == full.shape[1],
        f"state dimensions differ: trajectory {traj.n}, solution {full.shape[1]}",
    )
    diffs = full[:t_count] - traj.frames[:t_count]
    fidelity_rmse = float(np.sqrt(np.mean(diffs**2)))
    raw_seam = float(np.linalg.norm(traj.frames[-1] - traj.frames[0]))
    loop_seam = float(np.linalg.norm(full[-1] - full[0]))
    return {
        "closure_residual_reduced": solution.metrics.closure_residual,
        "closure_residual_full": loop_seam,
        "fidelity_rmse": fidelity_rmse,
        "control_energy": solution.metrics.control_cost,
        "raw_seam_gap": raw_seam,
        "loop_seam_gap": loop_seam,
    }


def save_solution(solution: CyclicSolution, path, include_frames: bool = True) -> None:
    """Write a .cyc file: JSON header, then z_1, vec(G) column-major, and
    optionally the lifted loop frames, all little-endian f64."""
    metrics = solution.metrics.to_json()
    header = {
        "version": CYC_VERSION,
        "r": solution.rank,
        "m": int(solution.gamma.shape[1]),
        "T": solution.period,
        "weights": {"w_red": solution.weights.w_red, "w_u": solution.weights.w_u},
        "metrics": metrics,
        "n": solution.full_cycle.n,
        "dt": solution.full_cycle.dt,
        "layout": solution.full_cycle.layout.to_json(),
        "frames_included": bool(include_frames),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(solution.z1_opt, dtype="<f8").tobytes())
        fh.write(solution.gamma.astype("<f8").tobytes(order="F"))
        if include_frames:
            fh.write(np.ascontiguousarray(solution.full_cycle.frames, dtype="<f8").tobytes())


def load_solution(path) -> dict:
    """Read a .cyc file into a plain dict (header plus arrays)."""
    with open(path, "rb") as fh:
        try:
            header = json.loads(fh.readline().decode("utf-8"))
            r, m, t_count = int(header["r"]), int(header["m"]), int(header["T"])
            n = int(header["n"])
            frames_included = bool(header["frames_included"])
        except (KeyError, ValueError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"malformed .cyc header: {exc}") from exc
        payload = fh.read()

    expected = (r + r * m + (frames_included * (t_count + 1) * n)) * 8
    if len(payload) != expected:
        raise ValueError(f"payload size mismatch: expected {expected} bytes, got {len(payload)}")
    z1 = np.frombuffer(payload[: r * 8], dtype="<f8").copy()
    gamma = np.frombuffer(payload[r * 8 : (r + r * m) * 8], dtype="<f8").reshape(
        (r, m), order="F"
    ).copy()
    out = {"header": header, "z1": z1, "gamma": gamma, "frames": None}
    if frames_included:
        out["frames"] = np.frombuffer(payload[(r + r * m) * 8 :], dtype="<f8").reshape(
            t_count + 1, n
        ).copy()
    return out

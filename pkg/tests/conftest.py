import numpy as np
import pytest

from kooploop.koopman import ReducedModel
from kooploop.trajectory import FieldBlock, FieldLayout, Trajectory


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_orthonormal(rng, n: int, r: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return q[:, :r]


def random_stable_operator(rng, r: int, radius: float = 0.95) -> np.ndarray:
    k = rng.standard_normal((r, r))
    return k * (radius / max(np.max(np.abs(np.linalg.eigvals(k))), 1e-12))


def rotation_operator(period: int) -> np.ndarray:
    angle = 2.0 * np.pi / period
    return np.array([[np.cos(angle), -np.sin(angle)],
                     [np.sin(angle), np.cos(angle)]])


def make_model(rng, n: int, r: int, radius: float = 0.95,
               operator: np.ndarray | None = None) -> ReducedModel:
    basis = random_orthonormal(rng, n, r)
    if operator is None:
        operator = random_stable_operator(rng, r, radius)
    empty = np.zeros((r, 0))
    return ReducedModel(
        basis=basis,
        operator=operator,
        reduced_snapshots=(empty, empty),
        fit_residual=0.0,
        spectral_radius=float(np.max(np.abs(np.linalg.eigvals(operator)))),
    )


def linear_trajectory(rng, n: int, r: int, frames: int, radius: float = 0.95,
                      dt: float = 0.1, operator: np.ndarray | None = None,
                      z1: np.ndarray | None = None) -> Trajectory:
    """Full-space trajectory driven exactly by a rank-r linear recurrence."""
    basis = random_orthonormal(rng, n, r)
    if operator is None:
        operator = random_stable_operator(rng, r, radius)
    z = z1 if z1 is not None else rng.standard_normal(r)
    rows = np.empty((frames, n))
    for t in range(frames):
        rows[t] = basis @ z
        z = operator @ z
    layout = FieldLayout((FieldBlock("state", 1, n),))
    return Trajectory(frames=rows, dt=dt, layout=layout)


def particle_trajectory(rng, particles: int, frames: int, dt: float = 0.1) -> Trajectory:
    """Random smooth positions+velocities data with a particle layout."""
    n = 6 * particles
    t = np.linspace(0.0, 2.0 * np.pi, frames)[:, None]
    phases = rng.uniform(0, 2 * np.pi, n)[None, :]
    freqs = rng.integers(1, 4, n)[None, :]
    rows = np.sin(freqs * t + phases) + 0.1 * rng.standard_normal((frames, n))
    layout = FieldLayout((
        FieldBlock("positions", 3, particles),
        FieldBlock("velocities", 3, particles),
    ))
    return Trajectory(frames=rows, dt=dt, layout=layout)

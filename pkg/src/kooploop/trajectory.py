"""Sampled full-space trajectories: data model, state stacking, and file I/O.

A trajectory is a sequence of T+1 state frames x_t in R^n plus a time step and
a named field layout describing how the state vector is stacked (for example
positions(3) + velocities(3) over P particles, or height(1) + vel_x(1) +
vel_y(1) over a grid). Trajectories are immutable after construction, so
concurrent reads are safe.

The ``.traj`` file format is the magic string ``CYCLTRAJ1`` on its own line,
one UTF-8 JSON header line ``{version, n, frame_count, dt, layout}``, then the
frames as raw little-endian float64, frame-major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .validation import Array, require

TRAJ_MAGIC = "CYCLTRAJ1"
TRAJ_VERSION = 1


class TrajectoryFormatError(ValueError):
    """Raised for malformed, truncated, or inconsistent .traj files."""


@dataclass(frozen=True)
class FieldBlock:
    """One named block of the state vector: `elements` items of `components` scalars."""

    name: str
    components: int
    elements: int

    def __post_init__(self):
        require(self.components >= 1, "block components must be >= 1")
        require(self.elements >= 1, "block elements must be >= 1")

    @property
    def size(self) -> int:
        return self.components * self.elements


@dataclass(frozen=True)
class FieldLayout:
    """Ordered named blocks whose sizes sum to the state dimension."""

    blocks: tuple[FieldBlock, ...]

    def __post_init__(self):
        require(len(self.blocks) >= 1, "layout needs at least one block")
        names = [b.name for b in self.blocks]
        require(len(set(names)) == len(names), f"duplicate block names in layout: {names}")

    @property
    def dim(self) -> int:
        return sum(b.size for b in self.blocks)

    def block(self, name: str) -> FieldBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(f"layout has no block named {name!r}; have {[b.name for b in self.blocks]}")

    def block_slice(self, name: str) -> slice:
        """Index range of the named block within a state vector."""
        offset = 0
        for b in self.blocks:
            if b.name == name:
                return slice(offset, offset + b.size)
            offset += b.size
        raise KeyError(f"layout has no block named {name!r}")

    def to_json(self) -> dict:
        return {
            "blocks": [
                {"name": b.name, "components": b.components, "elements": b.elements}
                for b in self.blocks
            ]
        }

    @staticmethod
    def from_json(obj: dict) -> "FieldLayout":
        try:
            blocks = tuple(
                FieldBlock(str(b["name"]), int(b["components"]), int(b["elements"]))
                for b in obj["blocks"]
            )
        except (KeyError, TypeError) as exc:
            raise TrajectoryFormatError(f"malformed layout description: {exc}") from exc
        return FieldLayout(blocks)


def flat_layout(n: int, name: str = "state") -> FieldLayout:
    """Single-block layout for states with no further structure."""
    return FieldLayout((FieldBlock(name, 1, n),))


@dataclass(frozen=True)
class Trajectory:
    """T+1 sampled state frames, one per row of `frames`, with step `dt`."""

    frames: Array
    dt: float
    layout: FieldLayout

    def __post_init__(self):
        # Copy so freezing below never affects a caller-owned array.
        frames = np.array(self.frames, dtype=np.float64, order="C")
        object.__setattr__(self, "frames", frames)
        require(frames.ndim == 2, f"frames must be 2-D (frame, state), got shape {frames.shape}")
        require(frames.shape[0] >= 3, f"need at least 3 frames, got {frames.shape[0]}")
        require(np.all(np.isfinite(frames)), "frames contain non-finite entries")
        require(self.dt > 0, f"dt must be positive, got {self.dt}")
        require(
            frames.shape[1] == self.layout.dim,
            f"state dimension {frames.shape[1]} does not match layout total {self.layout.dim}",
        )
        frames.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.frames.shape[1])

    @property
    def frame_count(self) -> int:
        return int(self.frames.shape[0])

    def block_frames(self, name: str) -> Array:
        """All frames restricted to one layout block, shape (frames, block size)."""
        return self.frames[:, self.layout.block_slice(name)]


@dataclass(frozen=True)
class FrameSplit:
    """Fit on the first `fit_frames` frames; the frame at `holdout` is reserved."""

    fit_frames: int
    holdout: int


def frame_split(traj: Trajectory) -> FrameSplit:
    """Standard split: all but the final frame are fitting frames."""
    total = traj.frame_count
    return FrameSplit(fit_frames=total - 1, holdout=total - 1)


def snapshot_pair(traj: Trajectory, fit_count: int) -> tuple[Array, Array]:
    """Snapshot matrices from the first `fit_count` frames.

    Columns of X are frames 1..fit_count-1 and columns of X' are frames
    2..fit_count (1-based), so both are n-by-(fit_count-1) and X'[:, k] is one
    step ahead of X[:, k].
    """
    require(fit_count >= 2, f"fit_count must be >= 2, got {fit_count}")
    require(
        fit_count <= traj.frame_count,
        f"fit_count {fit_count} exceeds frame count {traj.frame_count}",
    )
    x = traj.frames[: fit_count - 1].T.copy()
    x_prime = traj.frames[1:fit_count].T.copy()
    return x, x_prime


def apply_block_scales(traj: Trajectory, scales: dict[str, float]) -> Trajectory:
    """Return a copy with named blocks multiplied by per-block factors.

    States are used raw by default; this hook exists for callers that want to
    rebalance blocks (e.g. positions vs velocities) before the basis fit.
    """
    frames = traj.frames.copy()
    for name, factor in scales.items():
        require(np.isfinite(factor) and factor != 0.0, f"scale for {name!r} must be finite and nonzero")
        frames[:, traj.layout.block_slice(name)] *= factor
    return Trajectory(frames=frames, dt=traj.dt, layout=traj.layout)


def save_trajectory(traj: Trajectory, path) -> None:
    """Write a .traj file; round-trips bit-exactly through load_trajectory."""
    header = {
        "version": TRAJ_VERSION,
        "n": traj.n,
        "frame_count": traj.frame_count,
        "dt": traj.dt,
        "layout": traj.layout.to_json(),
    }
    with open(path, "wb") as fh:
        fh.write(TRAJ_MAGIC.encode("ascii") + b"\n")
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(traj.frames, dtype="<f8").tobytes())


def load_trajectory(path) -> Trajectory:
    """Read a .traj file, verifying magic, header, and payload size."""
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != TRAJ_MAGIC.encode("ascii"):
            raise TrajectoryFormatError(
                f"bad magic: expected {TRAJ_MAGIC!r}, got {magic[:16]!r}"
            )
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise TrajectoryFormatError(f"malformed JSON header: {exc}") from exc
        payload = fh.read()

    try:
        n = int(header["n"])
        frame_count = int(header["frame_count"])
        dt = float(header["dt"])
        layout = FieldLayout.from_json(header["layout"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TrajectoryFormatError(f"header missing or invalid field: {exc}") from exc

    expected = frame_count * n * 8
    if len(payload) != expected:
        raise TrajectoryFormatError(
            f"payload size mismatch: header implies {expected} bytes "
            f"({frame_count} frames x {n} x 8), file has {len(payload)}"
        )
    if layout.dim != n:
        raise TrajectoryFormatError(
            f"header n = {n} does not match layout total {layout.dim}"
        )
    frames = np.frombuffer(payload, dtype="<f8").reshape(frame_count, n)
    if not np.all(np.isfinite(frames)):
        raise TrajectoryFormatError("payload contains non-finite values")
    return Trajectory(frames=frames, dt=dt, layout=layout)

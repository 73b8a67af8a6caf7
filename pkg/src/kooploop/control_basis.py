"""Temporal and spatial bases for the control force.

The temporal side is a truncated Fourier basis evaluated on the periodic frame
grid t = 1..T. The spatial side is a set of unit-norm reduced-space columns
built by masking a region of one layout block, pointing it along a direction,
and projecting through the model basis; these drive localized edits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .koopman import ReducedModel
from .trajectory import FieldLayout
from .validation import Array, as_vector, require


class DegenerateRegionError(ValueError):
    """The selected region is invisible to the reduced basis."""


@dataclass(frozen=True)
class FourierBasis:
    """Sin/cos harmonics over one period of T frames.

    The basis vector at frame t is
    ``[sin(2 pi t / T), cos(2 pi t / T), ..., sin(2 pi H t / T), cos(2 pi H t / T)]``
    with a trailing constant 1 when `include_constant` is set, so its length is
    m = 2H (or 2H + 1). Harmonics must stay below Nyquist: 2H < T.
    """

    period: int
    harmonics: int
    include_constant: bool = False

    def __post_init__(self):
        require(self.period >= 2, f"period must be >= 2, got {self.period}")
        require(self.harmonics >= 1, f"harmonics must be >= 1, got {self.harmonics}")
        require(
            2 * self.harmonics < self.period,
            f"need 2H < T for distinct modes, got H = {self.harmonics}, T = {self.period}",
        )

    @property
    def m(self) -> int:
        return 2 * self.harmonics + (1 if self.include_constant else 0)

    def evaluate(self, t: int) -> Array:
        """Basis vector s_t at (1-based) frame index t; periodic in t."""
        angles = 2.0 * np.pi * np.arange(1, self.harmonics + 1) * t / self.period
        out = np.empty(self.m)
        out[0 : 2 * self.harmonics : 2] = np.sin(angles)
        out[1 : 2 * self.harmonics : 2] = np.cos(angles)
        if self.include_constant:
            out[-1] = 1.0
        return out

    def evaluate_all(self) -> Array:
        """Rows s_1..s_T, shape (T, m)."""
        return np.stack([self.evaluate(t) for t in range(1, self.period + 1)])

    def gram(self) -> Array:
        """M = sum_t s_t s_t^T over one period; symmetric positive semidefinite."""
        s = self.evaluate_all()
        m = s.T @ s
        return 0.5 * (m + m.T)


@dataclass(frozen=True)
class LocalBasisColumn:
    """One unit-norm reduced-space control direction plus its provenance."""

    column: Array
    label: str
    block: str
    region: tuple[int, ...]
    direction: Array


@dataclass(frozen=True)
class LocalBasisSet:
    """Columns stacked into the r-by-k spatial control basis."""

    entries: tuple[LocalBasisColumn, ...]

    def __post_init__(self):
        require(len(self.entries) >= 1, "local basis set needs at least one column")
        for e in self.entries:
            norm = np.linalg.norm(e.column)
            require(abs(norm - 1.0) <= 1e-12, f"column {e.label!r} is not unit norm ({norm})")

    @property
    def k(self) -> int:
        return len(self.entries)

    @property
    def matrix(self) -> Array:
        return np.stack([e.column for e in self.entries], axis=1)


def identity_basis(rank: int) -> Array:
    """Full reduced-space control authority (spatial basis = I_r)."""
    return np.eye(rank)


def build_local_basis(
    model: ReducedModel,
    layout: FieldLayout,
    region,
    block: str,
    direction,
    label: str = "",
) -> LocalBasisColumn:
    """Build one localized control column.

    Places `direction` on every region element of the chosen block (zeros
    elsewhere in the full space), projects through the model basis, and
    normalizes. Raises DegenerateRegionError when the projection norm falls
    below 1e-10, i.e. the region cannot be actuated in the reduced space.
    """
    region = tuple(int(i) for i in region)
    require(len(region) >= 1, "region must contain at least one element index")
    require(model.n == layout.dim, "model state dimension does not match layout")
    blk = layout.block(block)
    for idx in region:
        require(0 <= idx < blk.elements, f"element index {idx} outside block {block!r} "
                f"(has {blk.elements} elements)")
    direction = as_vector(direction, "direction", blk.components)
    dir_norm = np.linalg.norm(direction)
    require(dir_norm > 0.0, "direction must be nonzero")
    direction = direction / dir_norm

    full = np.zeros(model.n)
    offset = layout.block_slice(block).start
    for idx in region:
        start = offset + idx * blk.components
        full[start : start + blk.components] = direction

    projected = model.basis.T @ full
    norm = np.linalg.norm(projected)
    if norm < 1e-10:
        raise DegenerateRegionError(
            f"region of {len(region)} elements in block {block!r} projects to "
            f"norm {norm:.3e} in the reduced basis; it cannot be actuated"
        )
    return LocalBasisColumn(
        column=projected / norm,
        label=label or f"{block}[{len(region)} elems]",
        block=block,
        region=region,
        direction=direction,
    )


def region_from_box(layout: FieldLayout, frame: Array, lo, hi,
                    block: str = "positions") -> tuple[int, ...]:
    """Element indices of `block` whose position in `frame` lies in [lo, hi].

    Box selection keys off the positions stored in a reference frame, so the
    layout must carry a block of spatial coordinates (by default "positions").
    """
    blk = layout.block(block)
    frame = as_vector(frame, "frame", layout.dim)
    coords = frame[layout.block_slice(block)].reshape(blk.elements, blk.components)
    lo = as_vector(lo, "lo", blk.components)
    hi = as_vector(hi, "hi", blk.components)
    inside = np.all((coords >= lo) & (coords <= hi), axis=1)
    return tuple(int(i) for i in np.nonzero(inside)[0])


@dataclass(frozen=True)
class TemporalProfile:
    """Target activation over one period, peaking at `target_frame`."""

    values: Array
    target_frame: int
    width: float
    strength: float


def make_profile(period: int, target_frame: int, width: float | None = None,
                 strength: float = 1.0) -> TemporalProfile:
    """Wrapped-Gaussian profile a_t = strength * exp(-d(t, target)^2 / (2 width^2)).

    `d` is the circular frame distance over the period, so the profile is
    symmetric around the target frame even across the wrap point. `width`
    defaults to period / 20 frames.
    """
    require(period >= 2, f"period must be >= 2, got {period}")
    require(1 <= target_frame <= period,
            f"target_frame must be in 1..{period}, got {target_frame}")
    if width is None:
        width = max(1.0, period / 20.0)
    require(width >= 1.0, f"width must be >= 1 frame, got {width}")
    t = np.arange(1, period + 1)
    delta = np.abs(t - target_frame)
    wrapped = np.minimum(delta, period - delta)
    values = strength * np.exp(-(wrapped**2) / (2.0 * width**2))
    return TemporalProfile(values=values, target_frame=target_frame,
                           width=float(width), strength=float(strength))

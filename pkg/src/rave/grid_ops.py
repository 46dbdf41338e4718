"""Grid assembly/disassembly and per-timestep frame permutations.

Per-frame latents are tiled into n x m grids (row-major, left-to-right
then top-to-bottom) so a single-image denoiser can process N = n*m frames
jointly. Cell placement is driven by an ``order`` array over padded frame
indices; the placement travels with the batch as ``assignment`` metadata,
so disassembly restores original indices for any order. All copies are
bit-exact: no interpolation, no dtype change.

Frame counts not divisible by N are padded by replicating the last frame;
pad slots occupy indices K..K_padded-1, participate in shuffling, and are
dropped on disassembly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridLayout:
    """n x m cell arrangement with fixed per-cell latent dimensions."""

    rows: int
    cols: int
    cell_height: int
    cell_width: int

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must have rows, cols >= 1, got {self.rows}x{self.cols}")
        if self.cell_height < 1 or self.cell_width < 1:
            raise ValueError("cell dimensions must be >= 1")

    @property
    def cells(self) -> int:
        """N = rows * cols."""
        return self.rows * self.cols

    @property
    def grid_height(self) -> int:
        return self.rows * self.cell_height

    @property
    def grid_width(self) -> int:
        return self.cols * self.cell_width


@dataclass(frozen=True)
class PaddingPlan:
    """Maps K original frames onto the smallest multiple of N >= K."""

    frame_count: int
    padded_count: int

    @property
    def pad_count(self) -> int:
        return self.padded_count - self.frame_count

    def source_index(self, padded_index: int) -> int:
        """Original frame a padded slot replicates (pads copy the last frame)."""
        if not 0 <= padded_index < self.padded_count:
            raise IndexError(f"padded index {padded_index} out of range 0..{self.padded_count - 1}")
        return min(padded_index, self.frame_count - 1)


def plan_padding(frame_count: int, cells: int) -> PaddingPlan:
    """Smallest padding of K frames to a multiple of N; pads replicate frame K-1."""
    if frame_count < 1:
        raise ValueError("frame_count must be >= 1")
    if cells < 1:
        raise ValueError("cells must be >= 1")
    padded = -(-frame_count // cells) * cells
    return PaddingPlan(frame_count, padded)


@dataclass(frozen=True, eq=False)
class GridBatch:
    """L assembled grids plus the frame-index placement that built them.

    ``assignment[l, j]`` is the padded frame index occupying cell j
    (row-major) of grid l; indices >= frame_count are padding.
    """

    grids: list[np.ndarray]
    layout: GridLayout
    assignment: np.ndarray
    frame_count: int

    @property
    def grid_count(self) -> int:
        return len(self.grids)

    @property
    def padded_count(self) -> int:
        return self.assignment.size


def _check_order(order: np.ndarray, padded_count: int) -> None:
    if order.shape != (padded_count,):
        raise ValueError(f"order must have length {padded_count}, got {order.shape}")
    if not np.array_equal(np.sort(order), np.arange(padded_count)):
        raise ValueError("order is not a bijection over padded frame indices")


def extract_grid(
    latents: dict[int, np.ndarray],
    layout: GridLayout,
    cell_indices: np.ndarray,
    pad_latent: np.ndarray | None = None,
) -> np.ndarray:
    """Assemble one grid from N padded indices; pads take ``pad_latent``.

    ``pad_latent`` defaults to the last original frame's latent. Cell
    content is copied bit-exactly into the (rows*ch, cols*cw, C) canvas.
    """
    n, m = layout.rows, layout.cols
    ch, cw = layout.cell_height, layout.cell_width
    frame_count = len(latents)
    if pad_latent is None:
        pad_latent = latents[frame_count - 1]
    first = latents[0]
    grid = np.empty((layout.grid_height, layout.grid_width, first.shape[2]), dtype=first.dtype)
    for j, idx in enumerate(cell_indices):
        cell = latents[int(idx)] if idx < frame_count else pad_latent
        if cell.shape[:2] != (ch, cw):
            raise ValueError(
                f"latent shape {cell.shape} does not match layout cell {ch}x{cw}"
            )
        r, c = divmod(j, m)
        grid[r * ch : (r + 1) * ch, c * cw : (c + 1) * cw, :] = cell
    return grid


def scatter_grid(
    grid: np.ndarray,
    layout: GridLayout,
    cell_indices: np.ndarray,
    frame_count: int,
    out: dict[int, np.ndarray],
) -> None:
    """Copy grid cells back into a per-frame store; padded indices are dropped."""
    ch, cw = layout.cell_height, layout.cell_width
    m = layout.cols
    for j, idx in enumerate(cell_indices):
        if idx >= frame_count:
            continue
        r, c = divmod(j, m)
        out[int(idx)] = grid[r * ch : (r + 1) * ch, c * cw : (c + 1) * cw, :].copy()


def video2grid(latents: dict[int, np.ndarray], layout: GridLayout, order) -> GridBatch:
    """Tile per-frame latents into L = K_padded/N grids following ``order``.

    Grid l, cell j (row-major) holds the latent of padded frame index
    order[l*N + j]; padded slots replicate the last original frame.
    """
    order = np.asarray(order, dtype=np.int64)
    frame_count = len(latents)
    if frame_count < 1:
        raise ValueError("latent store is empty")
    if set(latents) != set(range(frame_count)):
        raise ValueError("latent store must cover frame indices 0..K-1 exactly")
    plan = plan_padding(frame_count, layout.cells)
    _check_order(order, plan.padded_count)

    shapes = {latents[k].shape for k in latents}
    if len(shapes) > 1:
        raise ValueError(f"inconsistent latent shapes: {sorted(shapes)}")
    shape = next(iter(shapes))
    if len(shape) != 3 or shape[:2] != (layout.cell_height, layout.cell_width):
        raise ValueError(
            f"latent shape {shape} does not match layout cell "
            f"{layout.cell_height}x{layout.cell_width}"
        )

    n_cells = layout.cells
    grid_count = plan.padded_count // n_cells
    assignment = order.reshape(grid_count, n_cells).copy()
    grids = [
        extract_grid(latents, layout, assignment[ell]) for ell in range(grid_count)
    ]
    return GridBatch(grids=grids, layout=layout, assignment=assignment, frame_count=frame_count)


def grid2video(batch: GridBatch) -> dict[int, np.ndarray]:
    """Invert video2grid: per-frame latents keyed by original index, pads dropped."""
    flat = batch.assignment.ravel()
    if not np.array_equal(np.sort(flat), np.arange(flat.size)):
        raise ValueError("malformed assignment: not a partition of padded indices")
    store: dict[int, np.ndarray] = {}
    for ell, grid in enumerate(batch.grids):
        scatter_grid(grid, batch.layout, batch.assignment[ell], batch.frame_count, store)
    return store


@dataclass(frozen=True, eq=False)
class Permutation:
    """Bijection over padded frame indices, tagged with its draw context."""

    forward: np.ndarray
    seed: int | None = None
    timestep: int | None = None

    def __post_init__(self) -> None:
        forward = np.asarray(self.forward, dtype=np.int64)
        if not np.array_equal(np.sort(forward), np.arange(forward.size)):
            raise ValueError("forward is not a bijection")
        object.__setattr__(self, "forward", forward)

    def __len__(self) -> int:
        return self.forward.size


def identity_permutation(k_padded: int, timestep: int | None = None, seed: int | None = None) -> Permutation:
    return Permutation(np.arange(k_padded, dtype=np.int64), seed=seed, timestep=timestep)


def sample_permutation(
    rng: np.random.Generator,
    k_padded: int,
    timestep: int | None = None,
    seed: int | None = None,
) -> Permutation:
    """Draw a uniform random bijection (Fisher-Yates) from ``rng``.

    Mutates the generator; callers that need reproducibility own one
    seeded generator and draw sequentially. ``seed`` is metadata recorded
    for the run manifest, not a reseed.
    """
    if k_padded < 1:
        raise ValueError("k_padded must be >= 1")
    return Permutation(rng.permutation(k_padded), seed=seed, timestep=timestep)


def invert_permutation(p: Permutation) -> Permutation:
    return Permutation(np.argsort(p.forward), seed=p.seed, timestep=p.timestep)


def compose(p: Permutation, q: Permutation) -> Permutation:
    """(p o q)(i) = p[q[i]]."""
    if len(p) != len(q):
        raise ValueError("cannot compose permutations of different sizes")
    return Permutation(p.forward[q.forward])

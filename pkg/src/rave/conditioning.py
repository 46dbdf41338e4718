"""Per-frame spatial condition maps, kept in lockstep with latent grids.

Condition maps are extracted once per video at frame resolution (they are
prompt-independent, so they can be cached and reused across edits), then
area-averaged down to the latent cell resolution at grid-assembly time.
A condition grid built with the same order as a latent grid has an
identical cell assignment, so latent cell (l, r, c) and condition cell
(l, r, c) always refer to the same original frame.

The built-in extractor is a 3x3 Sobel edge-magnitude filter so the whole
pipeline runs without model downloads; depth/lineart/softedge extractors
are external adapters behind the same interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from PIL import Image

from .grid_ops import GridBatch, GridLayout, video2grid
from .video_io import Video

CONDITION_KINDS = ("depth", "lineart", "softedge", "toy_edge")

# Peak Sobel gradient magnitude for inputs spanning [-1, 1]: |gx| <= 8 per axis.
_SOBEL_MAX = 8.0 * np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ConditionMap:
    """One frame's spatial condition, (H, W, C_cond) float64 in [0, 1]."""

    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise ValueError(f"condition values must be (H, W, C), got shape {values.shape}")
        object.__setattr__(self, "values", values)


@runtime_checkable
class ConditionExtractor(Protocol):
    """Deterministic per-frame condition preprocessor."""

    kind: str
    concurrent_safe: bool

    def extract(self, frame: np.ndarray) -> ConditionMap: ...


def _sobel_gradients(padded: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Separable 3x3 Sobel: central difference, then [1, 2, 1] smoothing.

    Differencing first makes constant regions cancel exactly instead of
    accumulating rounding error.
    """
    h, w = padded.shape[0] - 2, padded.shape[1] - 2
    dx = padded[:, 2:] - padded[:, :-2]
    gx = dx[:h] + 2.0 * dx[1 : h + 1] + dx[2 : h + 2]
    dy = padded[2:, :] - padded[:-2, :]
    gy = dy[:, :w] + 2.0 * dy[:, 1 : w + 1] + dy[:, 2 : w + 2]
    return gx, gy


@dataclass(frozen=True)
class SobelEdgeExtractor:
    """3x3 Sobel gradient magnitude on channel-mean luminance, in [0, 1].

    Borders are edge-replicated, so constant regions (including image
    borders) respond with exactly zero.
    """

    kind: str = "toy_edge"
    concurrent_safe: bool = True

    @property
    def adapter_id(self) -> str:
        return "sobel_edge"

    def extract(self, frame: np.ndarray) -> ConditionMap:
        lum = np.asarray(frame, dtype=np.float64).mean(axis=2)
        padded = np.pad(lum, 1, mode="edge")
        gx, gy = _sobel_gradients(padded)
        mag = np.clip(np.hypot(gx, gy) / _SOBEL_MAX, 0.0, 1.0)
        return ConditionMap(mag[..., None], self.kind)


def extract_conditions(video: Video, extractor: ConditionExtractor) -> list[ConditionMap]:
    """Extract one condition map per frame, in frame order.

    A failing extractor aborts the whole pass with the offending frame
    index attached.
    """
    maps: list[ConditionMap] = []
    for k in range(video.frame_count):
        try:
            cond = extractor.extract(video.frames[k])
        except Exception as exc:
            raise RuntimeError(f"condition extraction failed at frame {k}: {exc}") from exc
        if maps and cond.values.shape != maps[0].values.shape:
            raise ValueError(
                f"frame {k} produced condition shape {cond.values.shape}, "
                f"expected {maps[0].values.shape}"
            )
        maps.append(cond)
    return maps


def condition_cell(values: np.ndarray, cell_height: int, cell_width: int) -> np.ndarray:
    """Area-average a frame-resolution map down to latent cell resolution."""
    h, w, c = values.shape
    if h % cell_height or w % cell_width:
        raise ValueError(
            f"condition resolution {h}x{w} not divisible by cell {cell_height}x{cell_width}"
        )
    fy, fx = h // cell_height, w // cell_width
    return values.reshape(cell_height, fy, cell_width, fx, c).mean(axis=(1, 3))


def condition_grid(maps: list[ConditionMap], layout: GridLayout, cell_indices) -> np.ndarray:
    """Assemble one condition grid for the given padded cell indices."""
    n, m = layout.rows, layout.cols
    ch, cw = layout.cell_height, layout.cell_width
    frame_count = len(maps)
    channels = maps[0].values.shape[2]
    grid = np.empty((layout.grid_height, layout.grid_width, channels))
    for j, idx in enumerate(cell_indices):
        src = maps[int(idx)] if idx < frame_count else maps[-1]
        r, c = divmod(j, m)
        grid[r * ch : (r + 1) * ch, c * cw : (c + 1) * cw, :] = condition_cell(src.values, ch, cw)
    return grid


def conditions_to_grids(maps: list[ConditionMap], layout: GridLayout, order) -> GridBatch:
    """Tile condition maps with the same order used for the latent grids.

    Sharing the order guarantees the condition batch's assignment equals
    the latent batch's assignment at that timestep.
    """
    if not maps:
        raise ValueError("no condition maps given")
    cells = {
        k: condition_cell(maps[k].values, layout.cell_height, layout.cell_width)
        for k in range(len(maps))
    }
    return video2grid(cells, layout, order)


def condition_cache_dir(frames_dir: str | Path, kind: str) -> Path:
    return Path(frames_dir) / f"cond_{kind}"


def save_condition_cache(maps: list[ConditionMap], directory: str | Path) -> None:
    """Persist maps as 8-bit PNGs (cond_<kind>/frame_0000.png, ...)."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for k, cond in enumerate(maps):
        values = np.clip(cond.values, 0.0, 1.0)
        pix = np.rint(values * 255.0).astype(np.uint8)
        if pix.shape[2] == 1:
            img = Image.fromarray(pix[:, :, 0], mode="L")
        else:
            img = Image.fromarray(pix, mode="RGB")
        img.save(out / f"frame_{k:04d}.png")


def load_condition_cache(directory: str | Path, kind: str) -> list[ConditionMap] | None:
    """Load cached maps, or None when the cache directory does not exist."""
    root = Path(directory)
    if not root.is_dir():
        return None
    files = sorted(root.glob("frame_*.png"))
    if not files:
        return None
    maps = []
    for p in files:
        arr = np.asarray(Image.open(p), dtype=np.float64) / 255.0
        if arr.ndim == 2:
            arr = arr[..., None]
        maps.append(ConditionMap(arr, kind))
    return maps


def get_conditions(
    frames_dir: str | Path, video: Video, extractor: ConditionExtractor
) -> list[ConditionMap]:
    """Extract conditions with an on-disk cache next to the frame directory.

    The cache is keyed by extractor kind and reused across prompts; cached
    values carry 8-bit quantization.
    """
    cache = condition_cache_dir(frames_dir, extractor.kind)
    cached = load_condition_cache(cache, extractor.kind)
    if cached is not None and len(cached) == video.frame_count:
        return cached
    maps = extract_conditions(video, extractor)
    save_condition_cache(maps, cache)
    return maps

"""Temporal-consistency and text-alignment metrics for edited videos.

Four scores over an (source, edited, prompt) triple:

- clip_f: mean cosine similarity over all unordered frame-embedding pairs
  of the edited video (coarse temporal consistency).
- clip_t: mean cosine similarity between the prompt embedding and every
  edited frame's embedding (textual alignment).
- warp_ssim: flows are computed on consecutive SOURCE pairs; edited frame
  i+1 is backward-warped into frame i's coordinates and compared to edited
  frame i with SSIM (structural consistency).
- q_edit: warp_ssim * clip_t, the holistic score.

Embeddings and optical flow come from pluggable providers; deterministic
toy providers (pooled-luminance / hashed-character-histogram embedder,
constant synthetic flows) ship for tests and desk-scale runs. Absolute
values are meaningful only with real embedding/flow adapters.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence, runtime_checkable

import numpy as np
from scipy.signal import convolve2d

from .video_io import Video

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
# Pixel values span [-1, 1].
VALUE_RANGE = 2.0


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Maps frames and text to unit-norm vectors of one fixed dimension."""

    def embed_image(self, frame: np.ndarray) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


@runtime_checkable
class FlowProvider(Protocol):
    """Per-pixel (dx, dy) displacement field, in pixels, frame a -> frame b."""

    def flow(self, frame_a: np.ndarray, frame_b: np.ndarray) -> np.ndarray: ...


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        # Deterministic fallback for degenerate inputs (e.g. empty text).
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return v / norm


@dataclass(frozen=True)
class ToyEmbedder:
    """Deterministic 64-dim stand-in for a joint image/text embedder.

    Images: channel-mean luminance average-pooled to 8x8 and normalized.
    Text: character histogram over 64 hash-seeded bins, normalized.
    """

    dim: int = 64

    @property
    def adapter_id(self) -> str:
        return "toy_embedder"

    def embed_image(self, frame: np.ndarray) -> np.ndarray:
        lum = (np.asarray(frame, dtype=np.float64).mean(axis=2) + 1.0) / 2.0
        if lum.shape[0] < 8 or lum.shape[1] < 8:
            raise ValueError(f"toy embedder needs frames of at least 8x8, got {lum.shape}")
        pooled = np.empty((8, 8))
        for i, rows in enumerate(np.array_split(lum, 8, axis=0)):
            for j, block in enumerate(np.array_split(rows, 8, axis=1)):
                pooled[i, j] = block.mean()
        return _unit(pooled.ravel())

    def embed_text(self, text: str) -> np.ndarray:
        hist = np.zeros(self.dim)
        for ch in text:
            bin_idx = hashlib.md5(ch.encode("utf-8")).digest()[0] % self.dim
            hist[bin_idx] += 1.0
        return _unit(hist)


@dataclass(frozen=True)
class ConstantFlow:
    """Synthetic flow provider returning a uniform (dx, dy) everywhere."""

    dx: float = 0.0
    dy: float = 0.0

    @property
    def adapter_id(self) -> str:
        return f"constant_flow_{self.dx}_{self.dy}"

    def flow(self, frame_a: np.ndarray, frame_b: np.ndarray) -> np.ndarray:
        h, w = frame_a.shape[:2]
        out = np.empty((h, w, 2))
        out[..., 0] = self.dx
        out[..., 1] = self.dy
        return out


def ZeroFlow() -> ConstantFlow:
    return ConstantFlow(0.0, 0.0)


def clip_f(frames: Sequence[np.ndarray], emb: EmbeddingProvider) -> float:
    """Mean cosine similarity over all K(K-1)/2 unordered frame pairs."""
    k = len(frames)
    if k < 2:
        raise ValueError(f"clip_f needs at least 2 frames, got {k}")
    vectors = np.stack([emb.embed_image(f) for f in frames])
    sims = vectors @ vectors.T
    iu = np.triu_indices(k, 1)
    return float(sims[iu].mean())


def clip_t(prompt: str, frames: Sequence[np.ndarray], emb: EmbeddingProvider) -> float:
    """Mean cosine similarity between the prompt embedding and each frame's."""
    if not prompt:
        raise ValueError("prompt must be non-empty")
    if len(frames) < 1:
        raise ValueError("clip_t needs at least one frame")
    text = emb.embed_text(prompt)
    return float(np.mean([float(text @ emb.embed_image(f)) for f in frames]))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def _luminance(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return img.mean(axis=2) if img.ndim == 3 else img


def ssim(a: np.ndarray, b: np.ndarray, value_range: float = VALUE_RANGE) -> float:
    """Structural similarity on channel-mean luminance.

    11x11 Gaussian window (sigma 1.5), C1=(0.01 L)^2, C2=(0.03 L)^2, mean
    over the valid (unpadded) window positions. Symmetric in its
    arguments and exactly 1 for identical inputs.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    x = _luminance(a)
    y = _luminance(b)
    if x.shape[0] < SSIM_WINDOW or x.shape[1] < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}")

    window = _gaussian_window()
    mu_x = convolve2d(x, window, mode="valid")
    mu_y = convolve2d(y, window, mode="valid")
    var_x = convolve2d(x * x, window, mode="valid") - mu_x * mu_x
    var_y = convolve2d(y * y, window, mode="valid") - mu_y * mu_y
    cov = convolve2d(x * y, window, mode="valid") - mu_x * mu_y

    c1 = (SSIM_K1 * value_range) ** 2
    c2 = (SSIM_K2 * value_range) ** 2
    ssim_map = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(ssim_map.mean())


def warp(frame: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward warp: output(x) = input(x + flow(x)), bilinear sampling.

    Sample coordinates are clamped to the image border (edge replication).
    A zero flow reproduces the input bit-exactly.
    """
    frame = np.asarray(frame, dtype=np.float64)
    flow = np.asarray(flow, dtype=np.float64)
    h, w = frame.shape[:2]
    if flow.shape != (h, w, 2):
        raise ValueError(f"flow shape {flow.shape} does not match frame {frame.shape}")

    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    sx = np.clip(xs + flow[..., 0], 0.0, w - 1.0)
    sy = np.clip(ys + flow[..., 1], 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = sx - x0
    wy = sy - y0
    if frame.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]

    top = (1.0 - wx) * frame[y0, x0] + wx * frame[y0, x1]
    bottom = (1.0 - wx) * frame[y1, x0] + wx * frame[y1, x1]
    return (1.0 - wy) * top + wy * bottom


def _warp_ssim_scores(edited: Video, source: Video, flow_provider: FlowProvider) -> list[float]:
    if edited.frame_count != source.frame_count:
        raise ValueError(
            f"edited has {edited.frame_count} frames, source has {source.frame_count}"
        )
    if edited.resolution != source.resolution:
        raise ValueError(f"resolution mismatch: {edited.resolution} vs {source.resolution}")
    if edited.frame_count < 2:
        raise ValueError("warp_ssim needs at least 2 frames")
    scores = []
    for i in range(source.frame_count - 1):
        flow = np.asarray(flow_provider.flow(source.frames[i], source.frames[i + 1]), dtype=np.float64)
        aligned = warp(edited.frames[i + 1], flow)
        scores.append(ssim(aligned, edited.frames[i]))
    return scores


def warp_ssim(edited: Video, source: Video, flow_provider: FlowProvider) -> float:
    """Mean SSIM between flow-warped edited frames and their predecessors."""
    return float(np.mean(_warp_ssim_scores(edited, source, flow_provider)))


def q_edit(warp_ssim_value: float, clip_t_value: float) -> float:
    """Holistic edit score: WarpSSIM times CLIP-T."""
    if not (np.isfinite(warp_ssim_value) and np.isfinite(clip_t_value)):
        raise ValueError("q_edit inputs must be finite")
    return float(warp_ssim_value * clip_t_value)


@dataclass
class MetricsReport:
    """All four scores plus per-frame / per-pair breakdowns."""

    clip_f: float
    clip_t: float
    warp_ssim: float
    q_edit: float
    frame_text_similarities: list[float] = field(default_factory=list)
    frame_pair_similarities: list[tuple[int, int, float]] = field(default_factory=list)
    warp_ssim_pairs: list[float] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_f": self.clip_f,
            "clip_t": self.clip_t,
            "warp_ssim": self.warp_ssim,
            "q_edit": self.q_edit,
            "frame_text_similarities": self.frame_text_similarities,
            "frame_pair_similarities": [list(p) for p in self.frame_pair_similarities],
            "warp_ssim_pairs": self.warp_ssim_pairs,
        }


def evaluate(
    source: Video,
    edited: Video,
    prompt: str,
    emb: EmbeddingProvider,
    flow_provider: FlowProvider,
) -> MetricsReport:
    """Compute the full report; q_edit is exactly warp_ssim * clip_t."""
    k = edited.frame_count
    vectors = np.stack([emb.embed_image(edited.frames[i]) for i in range(k)])
    sims = vectors @ vectors.T
    pair_sims = [(i, j, float(sims[i, j])) for i in range(k) for j in range(i + 1, k)]
    clip_f_value = float(np.mean([s for _, _, s in pair_sims])) if pair_sims else 1.0

    text = emb.embed_text(prompt)
    text_sims = [float(text @ vectors[i]) for i in range(k)]
    clip_t_value = float(np.mean(text_sims))

    pair_scores = _warp_ssim_scores(edited, source, flow_provider)
    warp_ssim_value = float(np.mean(pair_scores))

    return MetricsReport(
        clip_f=clip_f_value,
        clip_t=clip_t_value,
        warp_ssim=warp_ssim_value,
        q_edit=q_edit(warp_ssim_value, clip_t_value),
        frame_text_similarities=text_sims,
        frame_pair_similarities=pair_sims,
        warp_ssim_pairs=pair_scores,
    )

"""Frame-sequence I/O and pixel/latent conversion through pluggable codecs.

A video is an ordered stack of RGB frames held as one float64 array of
shape (K, H, W, 3) with pixel values in [-1, 1] (symmetric around zero,
the convention denoiser adapters expect). Latents live in a per-frame
store: a plain ``dict`` mapping the original frame index to an array of
shape (H/f, W/f, latent_channels), where ``f`` is the codec's spatial
scale factor.

Two toy codecs ship with the library: :class:`IdentityCodec` (f=1,
bit-exact, the default in sampler tests) and :class:`BlockAverageCodec`
(block-mean encode, nearest-neighbour decode). Real autoencoders plug in
behind the same :class:`LatentCodec` interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from PIL import Image

# Per-frame latents keyed by original frame index.
LatentStore = dict[int, np.ndarray]

FRAME_FILE_FORMAT = "frame_{:04d}.png"
IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp"}


@dataclass(frozen=True, eq=False)
class Video:
    """Ordered RGB frame stack, shape (K, H, W, 3), float64 in [-1, 1].

    Frame order is temporal order. All frames share one resolution; K >= 1.
    Values may exceed [-1, 1] for decoded edits; ``save_frames`` clips.
    """

    frames: np.ndarray

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 4:
            raise ValueError(f"frames must be a (K, H, W, C) array, got shape {frames.shape}")
        if frames.shape[0] < 1:
            raise ValueError("a video must contain at least one frame")
        if frames.shape[3] != 3:
            raise ValueError(f"frames must have 3 channels, got {frames.shape[3]}")
        object.__setattr__(self, "frames", frames)

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def channels(self) -> int:
        return self.frames.shape[3]

    @property
    def resolution(self) -> tuple[int, int]:
        """(width, height) in pixels."""
        return (self.width, self.height)

    def frame(self, k: int) -> np.ndarray:
        return self.frames[k]


@runtime_checkable
class LatentCodec(Protocol):
    """Pixel <-> latent converter working one frame at a time.

    ``scale_factor`` must divide both dimensions of any video it encodes.
    ``concurrent_safe`` declares whether concurrent encode calls are allowed.
    """

    scale_factor: int
    latent_channels: int
    concurrent_safe: bool

    def encode_frame(self, frame: np.ndarray) -> np.ndarray: ...

    def decode_frame(self, latent: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class IdentityCodec:
    """f=1 codec whose encode/decode are bit-exact copies."""

    scale_factor: int = 1
    latent_channels: int = 3
    concurrent_safe: bool = True

    @property
    def adapter_id(self) -> str:
        return "identity_codec"

    def encode_frame(self, frame: np.ndarray) -> np.ndarray:
        return np.array(frame, dtype=np.float64)

    def decode_frame(self, latent: np.ndarray) -> np.ndarray:
        return np.array(latent, dtype=np.float64)


@dataclass(frozen=True)
class BlockAverageCodec:
    """Lossy toy codec: f x f block mean down, nearest-neighbour up.

    Constant images are a fixed point of the round trip; anything with
    in-block variance is not.
    """

    scale_factor: int = 8
    latent_channels: int = 3
    concurrent_safe: bool = True

    def __post_init__(self) -> None:
        if self.scale_factor < 1:
            raise ValueError("scale_factor must be >= 1")

    @property
    def adapter_id(self) -> str:
        return f"block_average_codec_f{self.scale_factor}"

    def encode_frame(self, frame: np.ndarray) -> np.ndarray:
        f = self.scale_factor
        h, w, c = frame.shape
        if h % f or w % f:
            raise ValueError(f"scale factor {f} does not divide frame shape {(h, w)}")
        return frame.reshape(h // f, f, w // f, f, c).mean(axis=(1, 3))

    def decode_frame(self, latent: np.ndarray) -> np.ndarray:
        f = self.scale_factor
        up = np.repeat(np.repeat(latent, f, axis=0), f, axis=1)
        return np.asarray(up, dtype=np.float64)


def load_frames(path: str | Path, target_resolution: tuple[int, int] | None = None) -> Video:
    """Load an image-frame directory into a Video.

    Frames are read in lexicographic filename order and mapped from 8-bit
    to float64 in [-1, 1]. When ``target_resolution`` (W, H) is given,
    every frame is bilinearly resized to it; otherwise all source frames
    must already share one resolution.
    """
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"frame directory not found: {root}")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not files:
        raise ValueError(f"no decodable image frames in {root}")

    frames = []
    for p in files:
        img = Image.open(p).convert("RGB")
        if target_resolution is not None:
            img = img.resize(target_resolution, Image.BILINEAR)
        frames.append(np.asarray(img, dtype=np.float64) / 127.5 - 1.0)

    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise ValueError(
            f"source frames have mixed resolutions {sorted(shapes)}; pass target_resolution"
        )
    return Video(np.stack(frames))


def save_frames(video: Video, path: str | Path) -> None:
    """Write one 8-bit RGB PNG per frame as frame_0000.png, frame_0001.png, ...

    Values are clipped to [-1, 1] before quantization, so
    load_frames(save_frames(v)) reproduces v up to 8-bit rounding
    (max per-pixel error 1/255 of the value range, i.e. <= 1/127.5).
    """
    if video.frame_count < 1:
        raise ValueError("cannot save an empty video")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(video.frame_count):
        pix = np.clip(video.frames[k], -1.0, 1.0)
        pix = np.rint((pix + 1.0) * 127.5).astype(np.uint8)
        Image.fromarray(pix, mode="RGB").save(out / FRAME_FILE_FORMAT.format(k))


def encode(video: Video, codec: LatentCodec) -> LatentStore:
    """Encode every frame, returning latents keyed by original frame index."""
    f = codec.scale_factor
    if video.width % f or video.height % f:
        raise ValueError(
            f"codec scale factor {f} does not divide resolution {video.width}x{video.height}"
        )
    expected = (video.height // f, video.width // f, codec.latent_channels)
    store: LatentStore = {}
    for k in range(video.frame_count):
        z = np.asarray(codec.encode_frame(video.frames[k]), dtype=np.float64)
        if z.shape != expected:
            raise ValueError(f"codec produced latent shape {z.shape}, expected {expected}")
        store[k] = z
    return store


def decode(latents: LatentStore, codec: LatentCodec) -> Video:
    """Decode a latent store back to a Video in original frame order."""
    if not latents:
        raise ValueError("cannot decode an empty latent store")
    keys = sorted(latents)
    if keys != list(range(len(keys))):
        raise ValueError(f"latent store keys must be contiguous from 0, got {keys[:8]}...")
    shapes = {latents[k].shape for k in keys}
    if len(shapes) > 1:
        raise ValueError(f"inconsistent latent shapes: {sorted(shapes)}")
    frames = np.stack([np.asarray(codec.decode_frame(latents[k]), dtype=np.float64) for k in keys])
    return Video(frames)

"""End-to-end grid-shuffled video editing.

The edit runs in three phases:

1. preprocess: encode frames to latents, extract condition maps.
2. inversion: walk the DDIM recursion up to max noise over sequential
   (identity-order) grids, single predictor branch, guidance fixed at 1.
3. sampling: for each timestep, draw a fresh permutation of padded frame
   indices (when shuffling), assemble latent and condition grids with the
   same permutation, denoise each grid under classifier-free guidance, and
   scatter cells straight back into the per-frame store.

Latents are stored per frame between steps; only one grid is materialized
at a time, so peak latent state is O(K) frames plus O(N) for the grid
under construction, independent of the number of timesteps. Pad cells are
sourced from the pre-step value of the last frame so the loop is
bit-equivalent to assembling a full grid batch per timestep.

Every run emits a :class:`RunManifest` (config snapshot, per-timestep
permutations, phase timings) from which :func:`replay` reproduces the
output bit-exactly, refusing manifests whose config, adapters, or
permutation records have been altered.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .conditioning import ConditionExtractor, ConditionMap, condition_grid, extract_conditions
from .diffusion import (
    DiffusionSchedule,
    GuidanceConfig,
    NoisePredictor,
    ddim_denoise_step,
    ddim_invert_step,
    guide,
    make_schedule,
)
from .grid_ops import (
    GridLayout,
    PaddingPlan,
    Permutation,
    extract_grid,
    identity_permutation,
    plan_padding,
    sample_permutation,
    scatter_grid,
)
from .video_io import LatentCodec, LatentStore, Video, decode, encode, load_frames


def default_grid(frame_count: int) -> tuple[int, int]:
    """2x2 grids for 8-frame videos, 3x3 for everything else."""
    return (2, 2) if frame_count == 8 else (3, 3)


@dataclass
class EditConfig:
    """Knobs for one edit run; rows/cols default by frame count when None."""

    prompt: str
    seed: int = 0
    rows: int | None = None
    cols: int | None = None
    steps: int = 50
    guidance: float = 7.5
    shuffle: bool = True
    shuffle_inversion: bool = False
    inversion_prompt: str = ""
    condition: str = "toy_edge"
    train_steps: int = 1000
    beta_start: float = 0.00085
    beta_end: float = 0.012
    spacing: str = "leading"

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if (self.rows is None) != (self.cols is None):
            raise ValueError("rows and cols must be given together")
        if self.rows is not None and (self.rows < 1 or self.cols < 1):
            raise ValueError("grid must be at least 1x1")
        if self.guidance < 0:
            raise ValueError("guidance must be >= 0")

    def resolved_grid(self, frame_count: int) -> tuple[int, int]:
        if self.rows is None:
            return default_grid(frame_count)
        return (self.rows, self.cols)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EditConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass
class Adapters:
    """The pluggable backend of one run."""

    codec: LatentCodec
    predictor: NoisePredictor
    extractor: ConditionExtractor
    text_embedder: Any  # needs .embed_text(str) -> np.ndarray

    def ids(self) -> dict[str, str]:
        return {
            "codec": adapter_id(self.codec),
            "predictor": adapter_id(self.predictor),
            "extractor": adapter_id(self.extractor),
            "text_embedder": adapter_id(self.text_embedder),
        }


def adapter_id(obj: Any) -> str:
    return getattr(obj, "adapter_id", type(obj).__name__)


class ReplayError(ValueError):
    """Replay refused: the manifest disagrees with the rerun or adapters."""

    def __init__(self, mismatches: list[str]):
        self.mismatches = mismatches
        super().__init__("replay refused:\n" + "\n".join(f"  - {m}" for m in mismatches))


def _config_checksum(config: dict[str, Any]) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce a run bit-exactly with the same adapters."""

    config: dict[str, Any]
    config_checksum: str
    adapters: dict[str, str]
    permutations: list[dict[str, Any]]
    timings: dict[str, float] = field(default_factory=dict)
    artifacts: dict[str, str | None] = field(default_factory=lambda: {"input": None, "output": None})

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "config_checksum": self.config_checksum,
            "adapters": self.adapters,
            "permutations": self.permutations,
            "timings": self.timings,
            "artifacts": self.artifacts,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunManifest":
        return cls(
            config=data["config"],
            config_checksum=data["config_checksum"],
            adapters=data["adapters"],
            permutations=data["permutations"],
            timings=data.get("timings", {}),
            artifacts=data.get("artifacts", {"input": None, "output": None}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _layout_for(latents: LatentStore, rows: int, cols: int) -> GridLayout:
    cell = latents[0].shape
    return GridLayout(rows=rows, cols=cols, cell_height=cell[0], cell_width=cell[1])


def _draw_permutation(
    rng: np.random.Generator | None,
    shuffled: bool,
    plan: PaddingPlan,
    timestep: int,
    seed: int | None,
) -> Permutation:
    if shuffled:
        if rng is None:
            raise ValueError("shuffling requested but no random generator supplied")
        return sample_permutation(rng, plan.padded_count, timestep=timestep, seed=seed)
    return identity_permutation(plan.padded_count, timestep=timestep, seed=seed)


def _record(log: list[dict] | None, phase: str, perm: Permutation) -> None:
    if log is not None:
        log.append(
            {
                "phase": phase,
                "timestep": int(perm.timestep),
                "seed": perm.seed,
                "forward": [int(i) for i in perm.forward],
            }
        )


def _sweep_grids(
    store: LatentStore,
    conditions: list[ConditionMap] | None,
    layout: GridLayout,
    plan: PaddingPlan,
    order: np.ndarray,
    step_fn: Callable[[np.ndarray, np.ndarray | None], np.ndarray],
) -> None:
    """Run step_fn over every grid of one timestep, scattering results in place.

    Grids are assembled one at a time. Pad cells read the last frame's
    latent as it was before this timestep (each real index is written at
    most once per sweep, so holding the old reference is enough).
    """
    cells = layout.cells
    grid_count = plan.padded_count // cells
    pad_latent = store[plan.frame_count - 1]
    for ell in range(grid_count):
        idx = order[ell * cells : (ell + 1) * cells]
        grid = extract_grid(store, layout, idx, pad_latent=pad_latent)
        cond = condition_grid(conditions, layout, idx) if conditions else None
        new_grid = step_fn(grid, cond)
        scatter_grid(new_grid, layout, idx, plan.frame_count, store)


def invert_video(
    latents: LatentStore,
    conditions: list[ConditionMap] | None,
    predictor: NoisePredictor,
    sched: DiffusionSchedule,
    config: EditConfig,
    *,
    embedding: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    permutation_log: list[dict] | None = None,
) -> LatentStore:
    """DDIM-invert per-frame latents up to the schedule's noisiest step.

    Grids are sequential (identity order) unless ``config.shuffle_inversion``
    is set; a single predictor branch with ``embedding`` is used (guidance
    is fixed at 1 during inversion). Predictor failures propagate with the
    timestep attached.

    The store is updated in place (entries replaced, never mutated) and
    returned, keeping peak latent state at K frames plus one grid.
    """
    rows, cols = config.resolved_grid(len(latents))
    layout = _layout_for(latents, rows, cols)
    plan = plan_padding(len(latents), layout.cells)
    emb = embedding if embedding is not None else np.zeros(64)
    store = latents
    for t_prev, t in sched.invert_pairs():
        perm = _draw_permutation(rng, config.shuffle_inversion, plan, t, config.seed)
        _record(permutation_log, "inversion", perm)

        def invert_one(grid: np.ndarray, cond: np.ndarray | None) -> np.ndarray:
            try:
                eps = predictor.predict(grid, t, emb, cond)
            except Exception as exc:
                raise RuntimeError(f"noise predictor failed at inversion step t={t}: {exc}") from exc
            return ddim_invert_step(grid, eps, t_prev, t, sched)

        _sweep_grids(store, conditions, layout, plan, perm.forward, invert_one)
    return store


def denoise_video(
    latents: LatentStore,
    conditions: list[ConditionMap] | None,
    predictor: NoisePredictor,
    sched: DiffusionSchedule,
    config: EditConfig,
    prompt_embedding: np.ndarray,
    uncond_embedding: np.ndarray,
    *,
    rng: np.random.Generator | None = None,
    permutation_log: list[dict] | None = None,
) -> LatentStore:
    """Run the shuffled denoising phase from max noise down to clean latents.

    A fresh permutation is drawn at every timestep when shuffling; latent
    and condition grids share it, and each grid gets two predictor calls
    (unconditional, conditional) blended by classifier-free guidance.

    Like :func:`invert_video`, the store is updated in place and returned.
    """
    rows, cols = config.resolved_grid(len(latents))
    layout = _layout_for(latents, rows, cols)
    plan = plan_padding(len(latents), layout.cells)
    cfg = GuidanceConfig(config.guidance)
    store = latents
    for t, t_prev in sched.denoise_pairs():
        perm = _draw_permutation(rng, config.shuffle, plan, t, config.seed)
        _record(permutation_log, "sampling", perm)

        def denoise_one(grid: np.ndarray, cond: np.ndarray | None) -> np.ndarray:
            try:
                eps_uncond = predictor.predict(grid, t, uncond_embedding, cond)
                eps_cond = predictor.predict(grid, t, prompt_embedding, cond)
            except Exception as exc:
                raise RuntimeError(f"noise predictor failed at sampling step t={t}: {exc}") from exc
            eps = guide(eps_uncond, eps_cond, cfg)
            return ddim_denoise_step(grid, eps, t, t_prev, sched)

        _sweep_grids(store, conditions, layout, plan, perm.forward, denoise_one)
    return store


def edit_video(
    video: Video,
    config: EditConfig,
    adapters: Adapters,
    conditions: list[ConditionMap] | None = None,
) -> tuple[Video, RunManifest]:
    """Full edit: encode, invert, shuffled denoise, decode; plus manifest.

    ``conditions`` may carry precomputed (e.g. disk-cached) maps; when
    None they are extracted here with the adapter's extractor. Identical
    (video, config, adapters) produce bit-identical outputs.
    """
    timings: dict[str, float] = {}
    permutation_log: list[dict] = []

    t0 = time.perf_counter()
    latents = encode(video, adapters.codec)
    if conditions is None:
        conditions = extract_conditions(video, adapters.extractor)
    prompt_emb = adapters.text_embedder.embed_text(config.prompt)
    uncond_emb = adapters.text_embedder.embed_text("")
    inversion_emb = adapters.text_embedder.embed_text(config.inversion_prompt)
    timings["preprocess"] = time.perf_counter() - t0

    rows, cols = config.resolved_grid(video.frame_count)
    plan = plan_padding(video.frame_count, rows * cols)
    sched = make_schedule(
        train_steps=config.train_steps,
        sampling_steps=config.steps,
        beta_start=config.beta_start,
        beta_end=config.beta_end,
        spacing=config.spacing,
    )
    rng = np.random.default_rng(config.seed)

    t0 = time.perf_counter()
    latents = invert_video(
        latents, conditions, adapters.predictor, sched, config,
        embedding=inversion_emb, rng=rng, permutation_log=permutation_log,
    )
    timings["inversion"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    latents = denoise_video(
        latents, conditions, adapters.predictor, sched, config,
        prompt_emb, uncond_emb, rng=rng, permutation_log=permutation_log,
    )
    timings["sampling"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    edited = decode(latents, adapters.codec)
    timings["decode"] = time.perf_counter() - t0

    snapshot = config.to_dict()
    snapshot.update(
        rows=rows,
        cols=cols,
        frame_count=video.frame_count,
        padded_count=plan.padded_count,
        width=video.width,
        height=video.height,
    )
    manifest = RunManifest(
        config=snapshot,
        config_checksum=_config_checksum(snapshot),
        adapters=adapters.ids(),
        permutations=permutation_log,
        timings=timings,
    )
    return edited, manifest


def _expected_permutations(config: EditConfig, frame_count: int, padded_count: int) -> list[dict]:
    """Re-derive the permutation records a run with this config would log."""
    sched = make_schedule(
        train_steps=config.train_steps,
        sampling_steps=config.steps,
        beta_start=config.beta_start,
        beta_end=config.beta_end,
        spacing=config.spacing,
    )
    rows, cols = config.resolved_grid(frame_count)
    plan = plan_padding(frame_count, rows * cols)
    if plan.padded_count != padded_count:
        raise ReplayError([f"padded_count {padded_count} inconsistent with config (expected {plan.padded_count})"])
    rng = np.random.default_rng(config.seed)
    log: list[dict] = []
    for _, t in sched.invert_pairs():
        perm = _draw_permutation(rng, config.shuffle_inversion, plan, t, config.seed)
        _record(log, "inversion", perm)
    for t, _ in sched.denoise_pairs():
        perm = _draw_permutation(rng, config.shuffle, plan, t, config.seed)
        _record(log, "sampling", perm)
    return log


def replay(manifest: RunManifest, adapters: Adapters, video: Video | None = None) -> Video:
    """Reproduce a recorded run bit-exactly, refusing any mismatch.

    Validation happens before the run: config integrity (checksum over the
    snapshot), adapter identities field by field, then the full permutation
    sequence re-derived from the recorded seed against the recorded one.
    ``video`` defaults to loading the manifest's input artifact.
    """
    mismatches: list[str] = []
    if _config_checksum(manifest.config) != manifest.config_checksum:
        raise ReplayError(["config checksum mismatch: manifest config was altered after recording"])

    for name, recorded in manifest.adapters.items():
        current = adapters.ids().get(name)
        if current != recorded:
            mismatches.append(f"adapter {name!r}: manifest has {recorded!r}, got {current!r}")
    if mismatches:
        raise ReplayError(mismatches)

    config = EditConfig.from_dict(manifest.config)  # snapshot carries resolved rows/cols
    expected = _expected_permutations(
        config, manifest.config["frame_count"], manifest.config["padded_count"]
    )
    if len(expected) != len(manifest.permutations):
        raise ReplayError(
            [f"permutation count {len(manifest.permutations)} != expected {len(expected)}"]
        )
    for exp, rec in zip(expected, manifest.permutations):
        if exp != rec:
            mismatches.append(
                f"permutation mismatch at phase={rec.get('phase')} timestep={rec.get('timestep')}"
            )
    if mismatches:
        raise ReplayError(mismatches)

    if video is None:
        source = manifest.artifacts.get("input")
        if not source:
            raise ReplayError(["no video given and manifest has no input artifact path"])
        video = load_frames(source, target_resolution=(manifest.config["width"], manifest.config["height"]))

    if video.frame_count != manifest.config["frame_count"]:
        raise ReplayError(
            [f"video has {video.frame_count} frames, manifest expects {manifest.config['frame_count']}"]
        )

    edited, new_manifest = edit_video(video, config, adapters)
    if new_manifest.permutations != manifest.permutations:
        raise ReplayError(["rerun drew different permutations than recorded"])
    return edited

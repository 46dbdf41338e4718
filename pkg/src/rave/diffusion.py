"""Deterministic DDIM machinery: schedule, denoise/invert steps, guidance.

All steps are the eta=0 (fully deterministic) variant, which is what makes
inversion-based editing possible: holding the predicted noise fixed, the
denoise and invert steps are exact algebraic inverses.

    x0_hat   = (z_t - sqrt(1 - abar_t) * eps) / sqrt(abar_t)
    z_{t'}   = sqrt(abar_{t'}) * x0_hat + sqrt(1 - abar_{t'}) * eps

The clean-sample boundary is addressed as step id ``BOUNDARY_STEP`` with
abar defined as 1 there. Default betas are linearly spaced in sqrt(beta)
from 0.00085 to 0.012 over 1000 train steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

# Pseudo step id for the fully denoised state (alpha_bar == 1).
BOUNDARY_STEP = -1

DEFAULT_TRAIN_STEPS = 1000
DEFAULT_BETA_START = 0.00085
DEFAULT_BETA_END = 0.012


@dataclass(frozen=True, eq=False)
class DiffusionSchedule:
    """Cumulative signal-retention coefficients over a timestep subsequence.

    ``timesteps`` is a strictly descending subsequence of train step ids;
    ``alpha_bars[t]`` is the cumulative product of (1 - beta) up to t.
    """

    train_steps: int
    sampling_steps: int
    timesteps: np.ndarray
    alpha_bars: np.ndarray
    _positions: dict[int, int] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        timesteps = np.asarray(self.timesteps, dtype=np.int64)
        alpha_bars = np.asarray(self.alpha_bars, dtype=np.float64)
        if alpha_bars.shape != (self.train_steps,):
            raise ValueError("alpha_bars must have one entry per train step")
        if np.any(alpha_bars <= 0) or np.any(alpha_bars > 1):
            raise ValueError("alpha_bar values must lie in (0, 1]")
        if timesteps.size != self.sampling_steps:
            raise ValueError("timesteps length must equal sampling_steps")
        if np.any(np.diff(timesteps) >= 0):
            raise ValueError("timesteps must be strictly decreasing")
        if timesteps[0] >= self.train_steps or timesteps[-1] < 0:
            raise ValueError("timesteps out of train range")
        object.__setattr__(self, "timesteps", timesteps)
        object.__setattr__(self, "alpha_bars", alpha_bars)
        object.__setattr__(self, "_positions", {int(t): i for i, t in enumerate(timesteps)})

    def alpha_bar(self, t: int) -> float:
        """abar at schedule step t; BOUNDARY_STEP is the clean state (1.0)."""
        if t == BOUNDARY_STEP:
            return 1.0
        if t not in self._positions:
            raise ValueError(f"step {t} is not in the schedule")
        return float(self.alpha_bars[t])

    def _position(self, t: int) -> int:
        # Boundary sits one past the last (least noisy) schedule step.
        if t == BOUNDARY_STEP:
            return len(self._positions)
        if t not in self._positions:
            raise ValueError(f"step {t} is not in the schedule")
        return self._positions[t]

    def denoise_pairs(self) -> list[tuple[int, int]]:
        """(t, t_prev) pairs in sampling order, ending at the clean boundary."""
        ts = [int(t) for t in self.timesteps]
        return list(zip(ts, ts[1:] + [BOUNDARY_STEP]))

    def invert_pairs(self) -> list[tuple[int, int]]:
        """(t_prev, t) pairs walking from the clean boundary up to max noise."""
        return [(t_prev, t) for t, t_prev in reversed(self.denoise_pairs())]


def make_schedule(
    train_steps: int = DEFAULT_TRAIN_STEPS,
    sampling_steps: int = 50,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
    spacing: str = "leading",
) -> DiffusionSchedule:
    """Build a DDIM schedule with betas linearly spaced in sqrt(beta).

    ``spacing`` picks the timestep subsequence: "leading" anchors at step 0
    (0, k, 2k, ...), "trailing" anchors at the last train step.
    """
    if not 1 <= sampling_steps <= train_steps:
        raise ValueError(f"need 1 <= sampling_steps <= train_steps, got {sampling_steps}/{train_steps}")
    if not 0 < beta_start <= beta_end < 1:
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    if spacing not in ("leading", "trailing"):
        raise ValueError(f"spacing must be 'leading' or 'trailing', got {spacing!r}")

    betas = np.linspace(np.sqrt(beta_start), np.sqrt(beta_end), train_steps) ** 2
    alpha_bars = np.cumprod(1.0 - betas)

    if spacing == "leading":
        timesteps = (np.arange(sampling_steps) * (train_steps // sampling_steps))[::-1]
    else:
        timesteps = np.round(np.arange(train_steps, 0, -train_steps / sampling_steps)).astype(np.int64) - 1
    return DiffusionSchedule(
        train_steps=train_steps,
        sampling_steps=sampling_steps,
        timesteps=np.asarray(timesteps, dtype=np.int64),
        alpha_bars=alpha_bars,
    )


def _check_step_args(z: np.ndarray, eps: np.ndarray, sched: DiffusionSchedule, t: int, t_prev: int) -> None:
    if z.shape != eps.shape:
        raise ValueError(f"latent shape {z.shape} != noise shape {eps.shape}")
    if t == BOUNDARY_STEP:
        raise ValueError("t must be a schedule step, not the clean boundary")
    if sched._position(t) >= sched._position(t_prev):
        raise ValueError(f"step order violated: t={t} must be noisier than t_prev={t_prev}")


def ddim_denoise_step(z_t, eps_hat, t: int, t_prev: int, sched: DiffusionSchedule) -> np.ndarray:
    """One deterministic denoise step z_t -> z_{t_prev} under predicted noise.

    With eps_hat = 0 this is multiplication by sqrt(abar_{t_prev}/abar_t).
    """
    z_t = np.asarray(z_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    _check_step_args(z_t, eps_hat, sched, t, t_prev)
    a_t = sched.alpha_bar(t)
    a_prev = sched.alpha_bar(t_prev)
    x0_hat = (z_t - np.sqrt(1.0 - a_t) * eps_hat) / np.sqrt(a_t)
    return np.sqrt(a_prev) * x0_hat + np.sqrt(1.0 - a_prev) * eps_hat


def ddim_invert_step(z_t_prev, eps_hat, t_prev: int, t: int, sched: DiffusionSchedule) -> np.ndarray:
    """One inversion step z_{t_prev} -> z_t; exact inverse of the denoise
    step for the same fixed eps_hat."""
    z_t_prev = np.asarray(z_t_prev, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    _check_step_args(z_t_prev, eps_hat, sched, t, t_prev)
    a_t = sched.alpha_bar(t)
    a_prev = sched.alpha_bar(t_prev)
    x0_hat = (z_t_prev - np.sqrt(1.0 - a_prev) * eps_hat) / np.sqrt(a_prev)
    return np.sqrt(a_t) * x0_hat + np.sqrt(1.0 - a_t) * eps_hat


@dataclass(frozen=True)
class GuidanceConfig:
    """Classifier-free guidance scale; 1 collapses to conditional, 0 to unconditional."""

    scale: float = 7.5

    def __post_init__(self) -> None:
        if self.scale < 0:
            raise ValueError(f"guidance scale must be >= 0, got {self.scale}")


def guide(eps_uncond, eps_cond, cfg: GuidanceConfig) -> np.ndarray:
    """eps_uncond + scale * (eps_cond - eps_uncond), with exact collapse at 0 and 1."""
    eps_uncond = np.asarray(eps_uncond, dtype=np.float64)
    eps_cond = np.asarray(eps_cond, dtype=np.float64)
    if eps_uncond.shape != eps_cond.shape:
        raise ValueError(f"shape mismatch: {eps_uncond.shape} vs {eps_cond.shape}")
    if cfg.scale == 1.0:
        return eps_cond.copy()
    if cfg.scale == 0.0:
        return eps_uncond.copy()
    return eps_uncond + cfg.scale * (eps_cond - eps_uncond)


@runtime_checkable
class NoisePredictor(Protocol):
    """Denoiser adapter: predicts noise for one latent grid.

    Must be deterministic given identical inputs and return the latent
    grid's shape. ``concurrent_safe`` declares whether concurrent predict
    calls are allowed.
    """

    concurrent_safe: bool

    def predict(
        self,
        grid: np.ndarray,
        timestep: int,
        embedding: np.ndarray,
        condition: np.ndarray | None,
    ) -> np.ndarray: ...


@dataclass(frozen=True)
class ZeroNoisePredictor:
    """Predicts eps = 0 everywhere; steps reduce to pure rescaling."""

    concurrent_safe: bool = True

    @property
    def adapter_id(self) -> str:
        return "zero_noise"

    def predict(self, grid, timestep, embedding, condition) -> np.ndarray:
        return np.zeros_like(grid)


@dataclass(frozen=True)
class ConstantNoisePredictor:
    """Predicts a constant eps, making inversion->sampling an exact chain."""

    value: float = 0.1
    concurrent_safe: bool = True

    @property
    def adapter_id(self) -> str:
        return f"constant_noise_{self.value}"

    def predict(self, grid, timestep, embedding, condition) -> np.ndarray:
        return np.full_like(grid, self.value)


@dataclass(frozen=True)
class PointwisePredictor:
    """Frame-separable toy denoiser: eps at a pixel depends only on that pixel.

    Because no information crosses cell borders, per-frame trajectories are
    independent of how frames are placed into grids. ``embedding_gain``
    adds a global offset from the text embedding so the guidance path is
    exercised without breaking separability.
    """

    scale: float = 0.2
    embedding_gain: float = 0.0
    concurrent_safe: bool = True

    @property
    def adapter_id(self) -> str:
        return f"pointwise_s{self.scale}_g{self.embedding_gain}"

    def predict(self, grid, timestep, embedding, condition) -> np.ndarray:
        eps = self.scale * np.tanh(grid)
        if self.embedding_gain:
            eps = eps + self.embedding_gain * float(np.mean(embedding))
        return eps


@dataclass(frozen=True)
class GridMeanCouplingPredictor:
    """Frame-coupling toy denoiser: eps is the deviation from the grid mean.

    Every cell's prediction depends on all cells sharing its grid, which is
    the minimal stand-in for a denoiser whose attention spans the grid;
    denoising contracts cells toward their grid's mean.
    """

    coupling: float = 1.0
    concurrent_safe: bool = True

    @property
    def adapter_id(self) -> str:
        return f"grid_mean_coupling_{self.coupling}"

    def predict(self, grid, timestep, embedding, condition) -> np.ndarray:
        return self.coupling * (grid - grid.mean())

"""Grid-based noise-shuffling video editing with pluggable diffusion backends."""

from .conditioning import (
    ConditionExtractor,
    ConditionMap,
    SobelEdgeExtractor,
    conditions_to_grids,
    extract_conditions,
    get_conditions,
)
from .dataset import (
    DatasetManifest,
    DatasetSummary,
    ManifestValidationError,
    load_manifest,
    save_manifest,
    summarize,
)
from .diffusion import (
    BOUNDARY_STEP,
    ConstantNoisePredictor,
    DiffusionSchedule,
    GridMeanCouplingPredictor,
    GuidanceConfig,
    NoisePredictor,
    PointwisePredictor,
    ZeroNoisePredictor,
    ddim_denoise_step,
    ddim_invert_step,
    guide,
    make_schedule,
)
from .grid_ops import (
    GridBatch,
    GridLayout,
    PaddingPlan,
    Permutation,
    compose,
    grid2video,
    identity_permutation,
    invert_permutation,
    plan_padding,
    sample_permutation,
    video2grid,
)
from .metrics import (
    ConstantFlow,
    EmbeddingProvider,
    FlowProvider,
    MetricsReport,
    ToyEmbedder,
    ZeroFlow,
    clip_f,
    clip_t,
    evaluate,
    q_edit,
    ssim,
    warp,
    warp_ssim,
)
from .sampler import (
    Adapters,
    EditConfig,
    ReplayError,
    RunManifest,
    default_grid,
    denoise_video,
    edit_video,
    invert_video,
    replay,
)
from .video_io import (
    BlockAverageCodec,
    IdentityCodec,
    LatentCodec,
    LatentStore,
    Video,
    decode,
    encode,
    load_frames,
    save_frames,
)

__version__ = "0.1.0"

"""Cooked-food image synthesis and cooking-progress monitoring.

The package covers the full loop: synthetic cooking sessions, a context
(recipe, state) conditioning tower, a FiLM-conditioned U-Net generator with a
patch discriminator, a learned culinary-similarity metric, the composite
training objective, an early-stopping progress monitor, baseline metrics, and
weight archives with post-training quantization.
"""

__version__ = "0.1.0"

from .archive import (
    ArchiveFormatError,
    QuantScheme,
    SizeReport,
    default_quant_scheme,
    load_weights,
    quantize_archive,
    save_weights,
)
from .cis import (
    CisTrainConfig,
    EmbeddingNet,
    EmbeddingNetConfig,
    cis_batch_loss,
    cis_lr_schedule,
    embed,
    f_cul,
    predicted_matrix,
    train_cis,
)
from .conditioning import (
    ContextEmbedder,
    ContextIndex,
    FiLMHead,
    FiLMHeadBank,
    FiLMParams,
    film,
    film_params,
    spe,
)
from .images import load_png, save_png, to_image, to_tensor
from .metrics import StateTable, eval_state_table, ssim, trajectory_report
from .monitor import (
    MonitorConfig,
    MonitorReport,
    MonitorState,
    StopDecision,
    run_session_offline,
    start_monitor,
)
from .nets import (
    DiscriminatorConfig,
    DiscriminatorNet,
    GeneratorConfig,
    GeneratorNet,
    discriminate,
    generate,
    param_census,
    patch_map_size,
    receptive_field,
)
from .sessions import (
    CookingSession,
    DatasetSplit,
    Frame,
    SessionFormatError,
    SimilarityMatrix,
    SyntheticRecipeSpec,
    augment,
    load_session,
    load_sessions,
    pair_raw_state,
    split_dataset,
    synth_dataset,
    synth_session,
    temporal_matrix,
)
from .training import (
    GenTrainConfig,
    composite_loss,
    lr_schedule,
    perceptual_loss,
    pyramid_l1,
    train_generator,
)

__all__ = [
    "ArchiveFormatError",
    "CisTrainConfig",
    "ContextEmbedder",
    "ContextIndex",
    "CookingSession",
    "DatasetSplit",
    "DiscriminatorConfig",
    "DiscriminatorNet",
    "EmbeddingNet",
    "EmbeddingNetConfig",
    "FiLMHead",
    "FiLMHeadBank",
    "FiLMParams",
    "Frame",
    "GenTrainConfig",
    "GeneratorConfig",
    "GeneratorNet",
    "MonitorConfig",
    "MonitorReport",
    "MonitorState",
    "QuantScheme",
    "SessionFormatError",
    "SimilarityMatrix",
    "SizeReport",
    "StateTable",
    "StopDecision",
    "SyntheticRecipeSpec",
    "augment",
    "cis_batch_loss",
    "cis_lr_schedule",
    "composite_loss",
    "default_quant_scheme",
    "discriminate",
    "embed",
    "eval_state_table",
    "f_cul",
    "film",
    "film_params",
    "generate",
    "load_png",
    "load_session",
    "load_sessions",
    "load_weights",
    "lr_schedule",
    "pair_raw_state",
    "param_census",
    "patch_map_size",
    "perceptual_loss",
    "predicted_matrix",
    "pyramid_l1",
    "quantize_archive",
    "receptive_field",
    "run_session_offline",
    "save_png",
    "save_weights",
    "spe",
    "split_dataset",
    "ssim",
    "start_monitor",
    "synth_dataset",
    "synth_session",
    "temporal_matrix",
    "to_image",
    "to_tensor",
    "train_cis",
    "train_generator",
    "trajectory_report",
]

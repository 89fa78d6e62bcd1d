"""Moving-object segmentation in RGB-D video with scene-specific GAN background models."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    AugmentConfig,
    DatasetSpec,
    GroundTruthFrame,
    SceneParams,
    Sequence,
    augment,
    load_sequence,
    synth_generate,
)
from .evaluation import ConfusionCounts, aggregate, confusion, metrics  # noqa: E402
from .flow import FlowField, MotionMask, complement, estimate_flow, motion_mask  # noqa: E402
from .gan import (  # noqa: E402
    Checkpoint,
    GanArch,
    TrainConfig,
    discriminator_forward,
    discriminator_loss,
    generator_forward,
    generator_loss,
    train,
)
from .inversion import (  # noqa: E402
    InversionConfig,
    InversionResult,
    combined_loss,
    feature_matching_loss,
    invert,
    residual_loss,
)
from .segment import (  # noqa: E402
    PipelineConfig,
    SegmentationMask,
    ThresholdRule,
    extract_foreground,
    fuse,
    segment_depth,
    segment_rgb,
    suppress_foreground,
)

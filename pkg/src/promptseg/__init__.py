"""Training-free instance segmentation on precomputed feature maps.

Pipeline: point-prompt a feature map into mask proposals, prune them
against a voted background mask, merge the survivors into instance
masks. Includes a class-agnostic COCO-protocol evaluator and a
benchmark harness.
"""
from . import errors
from ._kernels import available as kernel_backends
from ._kernels import backend_name, set_backend
from .evaluation import (
    Detection,
    EvalReport,
    GroundTruth,
    RleMask,
    box_from_mask,
    evaluate,
    mask_iou,
    match_detections,
    rle_decode,
    rle_encode,
)
from .feature_io import (
    FeatureMap,
    cosine_similarity,
    l2_normalize,
    load_feature_map,
    mean_embedding,
    save_feature_map,
)
from .mask import BinaryMask
from .merging import Cluster, MergeConfig, finalize, merge_all, should_merge
from .pipeline import (
    PipelineConfig,
    SegmentationResult,
    bench,
    run_pipeline,
    synth_scene,
    upsample_mask,
)
from .prompting import (
    AffinityMap,
    MaskProposal,
    RandomPrompts,
    RegularGrid,
    affinity,
    bipartition,
    classify_background,
    generate_proposals,
    grid_prompts,
    random_prompts,
    split_connected_components,
)
from .pruning import (
    Cascade,
    IoAOnly,
    SimilarityOnly,
    VotedBackground,
    cascade_filter,
    ioa,
    ioa_only_filter,
    similarity_only_filter,
    vote_background,
)

__version__ = "0.1.0"

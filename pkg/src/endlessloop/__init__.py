"""Seamlessly looping animations from a single still image.

Detects periodic structure along a chosen direction, assigns one
displacement per masked pixel with a dense CRF, densifies the result into
mutually-inverse smooth flow fields and renders a crossfaded warp loop.
"""

from .raster import (
    BandSlice,
    BinaryMask,
    RasterImage,
    VectorField,
    bilinear_sample,
    connected_components,
    gaussian_blur,
    load_image,
    load_mask,
    sample_band,
    save_image,
    save_mask,
)
from .descriptors import DescriptorBackend, DescriptorField, compute_descriptors, descriptor_distance
from .repeat1d import (
    MatchPath,
    OffsetSeedSet,
    SelfSimMatrix,
    RepetitionError,
    build_selfsim,
    detect_repetition,
    extend_by_reflection,
    min_cost_path,
    path_to_offsets,
)
from .crf import (
    LabelAssignment,
    LabelSet,
    build_labels,
    compatibility,
    compute_unary,
    init_guess_field,
    meanfield_solve,
)
from .flowfield import (
    DirectionStroke,
    RbfModel,
    SparseFlow,
    add_attenuation_anchors,
    invert_sparse,
    merge_cells,
    raw_field,
    rbf_densify,
    sparsify,
    split_by_strokes,
)
from .renderer import (
    ExtendedTexture,
    FrameSequence,
    LoopSpec,
    blend_loop,
    encode_outputs,
    extend_texture,
    warp,
)
from .autodirect import best_buddies, detect_corners, suggest_directions, vote_directions
from .pipeline import ProjectConfig, StageError, run_pipeline, suggest

__version__ = "0.1.0"

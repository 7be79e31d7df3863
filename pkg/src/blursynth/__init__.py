"""Synthetic partial-blur data generation and blur-segmentation evaluation."""

__version__ = "0.1.0"

from .blurkernel import (
    BlurSpec,
    DisplacementField,
    elastic_deform_kernel,
    gaussian_kernel,
    linear_motion_kernel,
    random_displacement_field,
    realize_kernel,
    rotate_kernel,
    sample_blur_spec,
)
from .evaluation import average_precision, evaluate_dataset, evaluate_image, roc_auc, tta_average
from .maskops import (
    ScoredProposalSet,
    connected_components,
    largest_object_mask,
    maybe_invert,
    proposal_distribution,
    sample_proposal_mask,
)
from .pipeline import GeneratorConfig, SamplePair, generate_dataset, generate_sample, stream_samples
from .synthesis import composite, convolve, inpaint, synthesize_halo_free, synthesize_naive

__all__ = [
    "BlurSpec",
    "DisplacementField",
    "GeneratorConfig",
    "SamplePair",
    "ScoredProposalSet",
    "average_precision",
    "composite",
    "connected_components",
    "convolve",
    "elastic_deform_kernel",
    "evaluate_dataset",
    "evaluate_image",
    "gaussian_kernel",
    "generate_dataset",
    "generate_sample",
    "inpaint",
    "largest_object_mask",
    "linear_motion_kernel",
    "maybe_invert",
    "proposal_distribution",
    "random_displacement_field",
    "realize_kernel",
    "roc_auc",
    "rotate_kernel",
    "sample_blur_spec",
    "sample_proposal_mask",
    "stream_samples",
    "synthesize_halo_free",
    "synthesize_naive",
    "tta_average",
]

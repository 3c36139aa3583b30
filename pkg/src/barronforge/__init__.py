"""Constructive deep narrow ReLU approximation of spectral target functions."""

__version__ = "0.1.0"

from .analysis import (
    EmbeddingSeries,
    RademacherConfig,
    SeriesVerdict,
    ShellSpectrum,
    embedding_series,
    rademacher_estimate,
)
from .constructor import (
    AffineInputMap,
    BuildConfig,
    BuildReport,
    build_h1,
    build_l2,
    compute_theta,
    make_subnetwork_spec,
    rescale_to_unit,
    sample_pairs,
)
from .metrics import QuadratureSpec, h1_error, l2_error, slope_fit, verify_cos_lemma
from .network import (
    Layer,
    ReluNetwork,
    SubNetworkSpec,
    build_beta,
    build_gamma_tail,
    build_subnetwork,
    compose,
    depth_for_l1,
    load_network,
    merge,
    precompose_affine,
    save_network,
)
from .spectral import (
    Box,
    FourierMode,
    NormKind,
    SpectralTarget,
    evaluate,
    gradient,
    load_target,
    norm,
    sample_frequency,
    save_target,
    spectral_decay_amplitude,
    synth_target,
)

__all__ = [
    "AffineInputMap",
    "Box",
    "BuildConfig",
    "BuildReport",
    "EmbeddingSeries",
    "FourierMode",
    "Layer",
    "NormKind",
    "QuadratureSpec",
    "RademacherConfig",
    "ReluNetwork",
    "SeriesVerdict",
    "ShellSpectrum",
    "SpectralTarget",
    "SubNetworkSpec",
    "build_beta",
    "build_gamma_tail",
    "build_h1",
    "build_l2",
    "build_subnetwork",
    "compose",
    "compute_theta",
    "depth_for_l1",
    "embedding_series",
    "evaluate",
    "gradient",
    "h1_error",
    "l2_error",
    "load_network",
    "load_target",
    "make_subnetwork_spec",
    "merge",
    "norm",
    "precompose_affine",
    "rademacher_estimate",
    "rescale_to_unit",
    "sample_frequency",
    "sample_pairs",
    "save_network",
    "save_target",
    "slope_fit",
    "spectral_decay_amplitude",
    "synth_target",
    "verify_cos_lemma",
]

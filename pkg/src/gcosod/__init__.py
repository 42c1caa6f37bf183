"""Benchmark tooling for co-saliency detection when some group members lack the common object."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ZERO,
    CapacityError,
    ConfigError,
    DataError,
    DatasetManifest,
    GroupEntry,
    ImageEntry,
    ManifestError,
    load_manifest,
    load_map,
    save_manifest,
    save_map,
)
from .metrics import MetricConfig, binarize, e_measure, evaluate_dataset, f_measure, iou, mae, s_measure  # noqa: E402
from .calibration import ece, pixel_confidence, render_reliability  # noqa: E402
from .uncertainty import UncertaintyConfig, entropy_map, revise  # noqa: E402
from .sampler import SamplerConfig, sample_epoch  # noqa: E402
from .builder import CommonBuildConfig, ZeroBuildConfig, build_common, build_zero, validate_zero  # noqa: E402
from .synth import SynthConfig, generate_synthetic_dataset  # noqa: E402

__all__ = [
    "ZERO", "CapacityError", "ConfigError", "DataError", "DatasetManifest", "GroupEntry", "ImageEntry",
    "ManifestError", "load_manifest", "load_map", "save_manifest", "save_map",
    "MetricConfig", "binarize", "e_measure", "evaluate_dataset", "f_measure", "iou", "mae", "s_measure",
    "ece", "pixel_confidence", "render_reliability",
    "UncertaintyConfig", "entropy_map", "revise",
    "SamplerConfig", "sample_epoch",
    "CommonBuildConfig", "ZeroBuildConfig", "build_common", "build_zero", "validate_zero",
    "SynthConfig", "generate_synthetic_dataset",
]

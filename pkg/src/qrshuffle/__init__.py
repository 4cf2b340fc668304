"""Face-preserving artistic QR codes.

Pipeline: extract a module matrix from a stylized source, reshuffle the
non-face modules so the face's own bits become part of a valid codeword,
synthesize an adaptive-halftone blueprint, harmonize the locator markers,
and refine scannability by gradient descent on a simulated-decoder loss
balanced against feature-statistics aesthetics.
"""

from .config import ConfigError, PipelineConfig, load_config, parse_config, serialize_config
from .encode import CapacityError, build_matrix, render
from .enhance import EnhanceResult, LossConfig, TraceEntry, enhance, harmonize_markers
from .features import (
    FeatureExtractor,
    FeatureStatsError,
    LevelStats,
    aesthetic_loss,
    read_fstats,
    write_fstats,
)
from .galois import DecodeFailure, rs_decode, rs_encode
from .harness import PerturbSpec, RobustnessReport, perturb, robustness_report, scan_trial
from .imageops import GridGeometry, binarize, load_gray_png, luminance, save_gray_png
from .locate import FinderResult, LocateError, locate_finder, rectify
from .matrix import ModuleMatrix
from .pipeline import PipelineError, PipelineResult, run_pipeline
from .qrspec import QrSpec
from .reshuffle import (
    Blueprint,
    InfeasibleError,
    RegionSets,
    ReshuffleReport,
    build_blueprint,
    face_mask_to_modules,
    reshuffle,
)
from .scanner import DecodeError, ErrorReport, count_errors, decode_message, extract_modules

__version__ = "0.1.0"

__all__ = [
    "Blueprint",
    "CapacityError",
    "ConfigError",
    "DecodeError",
    "DecodeFailure",
    "EnhanceResult",
    "ErrorReport",
    "FeatureExtractor",
    "FeatureStatsError",
    "FinderResult",
    "GridGeometry",
    "InfeasibleError",
    "LevelStats",
    "LocateError",
    "LossConfig",
    "ModuleMatrix",
    "PerturbSpec",
    "PipelineConfig",
    "PipelineError",
    "PipelineResult",
    "QrSpec",
    "RegionSets",
    "ReshuffleReport",
    "RobustnessReport",
    "TraceEntry",
    "aesthetic_loss",
    "binarize",
    "build_blueprint",
    "build_matrix",
    "count_errors",
    "decode_message",
    "enhance",
    "extract_modules",
    "face_mask_to_modules",
    "harmonize_markers",
    "load_config",
    "load_gray_png",
    "locate_finder",
    "luminance",
    "parse_config",
    "perturb",
    "read_fstats",
    "rectify",
    "render",
    "reshuffle",
    "robustness_report",
    "rs_decode",
    "rs_encode",
    "run_pipeline",
    "save_gray_png",
    "scan_trial",
    "serialize_config",
    "write_fstats",
]

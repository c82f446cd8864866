"""Source reconstruction from latent regions and separation scoring."""

from .masking import (
    AssignmentMode,
    FrameAssignment,
    SeparatedSources,
    assign_frames,
    centroid_magnitudes,
    hard_masks,
    reconstruct,
    wiener_masks,
)
from .metrics import (
    SeparationReport,
    SourceScore,
    evaluate,
    format_report,
    log_spectral_distance,
    si_sdr,
)

__all__ = [
    "AssignmentMode",
    "FrameAssignment",
    "SeparatedSources",
    "SeparationReport",
    "SourceScore",
    "assign_frames",
    "centroid_magnitudes",
    "evaluate",
    "format_report",
    "hard_masks",
    "log_spectral_distance",
    "reconstruct",
    "si_sdr",
    "wiener_masks",
]

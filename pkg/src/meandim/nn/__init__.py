"""Feed-forward network evaluation: weight containers, per-pixel histogram
samplers, forward passes, index maps and mean-dimension reports."""
from .analysis import (
    IndexMap,
    MeanDimensionReport,
    ReportCell,
    estimate_lower_indices,
    index_maps,
    mean_dimension_report,
)
from .formats import (
    BadMagicError,
    FormatError,
    TruncatedFileError,
    VersionError,
    load_histograms,
    load_network,
    save_histograms,
    save_network,
)
from .histograms import COMBINED, PixelHistogramSet, build_histograms
from .idx import (
    ArchiveError,
    load_archive,
    read_idx_images,
    read_idx_labels,
    write_idx_images,
    write_idx_labels,
)
from .network import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool,
    NetworkSpec,
    ShapeError,
    softmax,
)

__all__ = [
    "IndexMap",
    "MeanDimensionReport",
    "ReportCell",
    "estimate_lower_indices",
    "index_maps",
    "mean_dimension_report",
    "BadMagicError",
    "FormatError",
    "TruncatedFileError",
    "VersionError",
    "load_histograms",
    "load_network",
    "save_histograms",
    "save_network",
    "COMBINED",
    "PixelHistogramSet",
    "build_histograms",
    "ArchiveError",
    "load_archive",
    "read_idx_images",
    "read_idx_labels",
    "write_idx_images",
    "write_idx_labels",
    "Conv2D",
    "Dense",
    "Dropout",
    "Flatten",
    "MaxPool",
    "NetworkSpec",
    "ShapeError",
    "softmax",
]

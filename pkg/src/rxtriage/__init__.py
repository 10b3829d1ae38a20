"""RX novelty triage for multispectral image sequences.

Fits a Gaussian background over an archive of band-image sequences, scores
every pixel by squared Mahalanobis distance, renders heat maps, ranks
sequences for review, and serves the results over HTTP.
"""

from .errors import (
    CorrectionModeMismatch,
    DecodeError,
    DimensionMismatch,
    EmptyMap,
    EncodeError,
    IdSetMismatch,
    MissingFile,
    MissingPercentiles,
    MixedModels,
    NonFiniteInput,
    ParseError,
    RxTriageError,
    SingularCovariance,
    TooFewPixels,
    TooShort,
)
from .spectral import (
    DEFAULT_RIDGE_LAMBDA,
    NARROW_BAND_RANGE_NM,
    BackgroundModel,
    BandImage,
    NoveltyMap,
    PixelCube,
    ScorePercentiles,
    fit_background,
    fit_local,
    load_model,
    nearest_rank_percentile,
    rx_score,
    save_model,
    score_cube,
)

__version__ = "0.1.0"

__all__ = [
    "RxTriageError",
    "TooFewPixels",
    "SingularCovariance",
    "NonFiniteInput",
    "DimensionMismatch",
    "CorrectionModeMismatch",
    "ParseError",
    "MissingFile",
    "DecodeError",
    "MissingPercentiles",
    "EncodeError",
    "EmptyMap",
    "MixedModels",
    "IdSetMismatch",
    "TooShort",
    "DEFAULT_RIDGE_LAMBDA",
    "NARROW_BAND_RANGE_NM",
    "BandImage",
    "PixelCube",
    "ScorePercentiles",
    "BackgroundModel",
    "NoveltyMap",
    "fit_background",
    "fit_local",
    "rx_score",
    "score_cube",
    "nearest_rank_percentile",
    "save_model",
    "load_model",
    "__version__",
]

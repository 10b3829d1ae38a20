"""Background distribution fitting and pixelwise novelty scoring.

The typical archive is modeled as a single Gaussian background: a mean
spectrum together with a band covariance estimated over every training
pixel.  A pixel's novelty score is its squared Mahalanobis distance from
that background.  Covariance uses the population (1/N) normalizer so that
the mean score over the exact training pixels equals the band count, a
property the test suite checks.  The inverse is taken after a relative
ridge is added to the diagonal, which keeps scoring stable when bands are
strongly correlated.

Fitting is multi-pass over a re-iterable pixel source: mean first, then
covariance, then a scoring pass that records archive score percentiles for
later archive-wide normalization.  All accumulation is in float64 with a
fixed chunk structure, so repeated fits over the same source are bitwise
reproducible.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterator

import numpy as np
import scipy.linalg

from .errors import (
    CorrectionModeMismatch,
    DimensionMismatch,
    NonFiniteInput,
    ParseError,
    SingularCovariance,
    TooFewPixels,
)
from .util import atomic_write_bytes

__all__ = [
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
    "model_document",
    "canonical_model_bytes",
    "write_raw_map",
    "read_raw_map",
]

DEFAULT_RIDGE_LAMBDA = 1e-6
MODEL_FORMAT_VERSION = 1
NARROW_BAND_RANGE_NM = (400.0, 1100.0)

_SYMMETRY_ATOL = 1e-9
_INVERSE_ATOL = 1e-6
_ARRAY_CHUNK = 65536
_BUFFER_CHUNK = 8192
_MAP_MAGIC = b"RXM1"


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class BandImage:
    """One narrow-band product, values scaled to [0, 1]."""

    filter_id: str
    wavelength_nm: float
    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("band image dimensions must be positive")
        if vals.shape != (self.height, self.width):
            raise ValueError(
                f"band {self.filter_id}: values shape {vals.shape} does not match "
                f"height x width ({self.height}, {self.width})"
            )
        if not np.isfinite(vals).all():
            raise ValueError(f"band {self.filter_id}: non-finite values")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError(f"band {self.filter_id}: values outside [0, 1]")
        lo, hi = NARROW_BAND_RANGE_NM
        if not lo <= self.wavelength_nm <= hi:
            raise ValueError(
                f"band {self.filter_id}: wavelength {self.wavelength_nm} nm outside "
                f"narrow-band range [{lo:g}, {hi:g}]"
            )
        vals.setflags(write=False)


@dataclass(frozen=True)
class PixelCube:
    """H x W x n array of band values ready for scoring.

    Raw cubes hold values in [0, 1]; brightness-corrected cubes may exceed 1
    because the division can amplify, but every value stays finite and
    non-negative.
    """

    width: int
    height: int
    n_bands: int
    band_wavelengths: tuple[float, ...]
    data: np.ndarray
    brightness_corrected: bool = False

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "band_wavelengths", tuple(float(w) for w in self.band_wavelengths))
        if self.width <= 0 or self.height <= 0 or self.n_bands <= 0:
            raise ValueError("cube dimensions must be positive")
        if data.shape != (self.height, self.width, self.n_bands):
            raise ValueError(
                f"cube data shape {data.shape} does not match "
                f"(height, width, n_bands) = ({self.height}, {self.width}, {self.n_bands})"
            )
        if len(self.band_wavelengths) != self.n_bands:
            raise ValueError("band_wavelengths length must equal n_bands")
        if not np.isfinite(data).all():
            raise ValueError("cube contains non-finite values")
        if data.size and data.min() < 0.0:
            raise ValueError("cube contains negative values")
        data.setflags(write=False)

    @property
    def pixels(self) -> np.ndarray:
        """Row-major view of shape (H*W, n)."""
        return self.data.reshape(-1, self.n_bands)


@dataclass(frozen=True)
class ScorePercentiles:
    """Nearest-rank percentiles of RX scores over the training archive."""

    p01: float
    p50: float
    p99: float
    p999: float
    max: float

    def __post_init__(self):
        vals = (self.p01, self.p50, self.p99, self.p999, self.max)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("score percentiles must be finite")
        if not (self.p01 <= self.p50 <= self.p99 <= self.p999 <= self.max):
            raise ValueError("score percentiles must be monotone non-decreasing")

    @classmethod
    def from_scores(cls, scores: np.ndarray) -> "ScorePercentiles":
        srt = np.sort(np.asarray(scores, dtype=np.float64).ravel())
        if srt.size == 0:
            raise ValueError("cannot take percentiles of an empty score set")
        return cls(
            p01=_at_rank(srt, 1, 100),
            p50=_at_rank(srt, 1, 2),
            p99=_at_rank(srt, 99, 100),
            p999=_at_rank(srt, 999, 1000),
            max=float(srt[-1]),
        )

    def as_dict(self) -> dict:
        return {
            "p01": self.p01,
            "p50": self.p50,
            "p99": self.p99,
            "p999": self.p999,
            "max": self.max,
        }


@dataclass(frozen=True)
class BackgroundModel:
    """Fitted background: mean spectrum, covariance, and its regularized inverse.

    Immutable after construction; the arrays are marked read-only so the model
    can be shared freely across threads.
    """

    n_bands: int
    band_wavelengths: tuple[float, ...]
    mu: np.ndarray
    sigma: np.ndarray
    sigma_inv: np.ndarray
    ridge_lambda: float
    brightness_corrected: bool
    training_pixel_count: int
    score_percentiles: ScorePercentiles | None = None

    def __post_init__(self):
        n = self.n_bands
        if n <= 0:
            raise ValueError("n_bands must be positive")
        object.__setattr__(self, "band_wavelengths", tuple(float(w) for w in self.band_wavelengths))
        if len(self.band_wavelengths) != n:
            raise ValueError("band_wavelengths length must equal n_bands")
        mu = np.ascontiguousarray(self.mu, dtype=np.float64)
        sigma = np.ascontiguousarray(self.sigma, dtype=np.float64)
        sigma_inv = np.ascontiguousarray(self.sigma_inv, dtype=np.float64)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "sigma_inv", sigma_inv)
        if mu.shape != (n,) or sigma.shape != (n, n) or sigma_inv.shape != (n, n):
            raise ValueError("mu/sigma/sigma_inv shapes do not match n_bands")
        for name, arr in (("mu", mu), ("sigma", sigma), ("sigma_inv", sigma_inv)):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be non-negative")
        if self.training_pixel_count <= n:
            raise ValueError("training_pixel_count must exceed n_bands")
        if np.abs(sigma - sigma.T).max() > _SYMMETRY_ATOL:
            raise ValueError("sigma is not symmetric")
        if np.abs(sigma_inv - sigma_inv.T).max() > _SYMMETRY_ATOL:
            raise ValueError("sigma_inv is not symmetric")
        regularized = sigma + self.ridge_lambda * float(np.mean(np.diag(sigma))) * np.eye(n)
        residual = np.abs(regularized @ sigma_inv - np.eye(n)).max()
        if residual > _INVERSE_ATOL:
            raise ValueError(
                f"sigma_inv is not the inverse of the regularized covariance "
                f"(residual {residual:.3g})"
            )
        for arr in (mu, sigma, sigma_inv):
            arr.setflags(write=False)

    @cached_property
    def fingerprint(self) -> str:
        """Lowercase hex SHA-256 of the canonical model serialization."""
        return hashlib.sha256(canonical_model_bytes(self)).hexdigest()


@dataclass(frozen=True)
class NoveltyMap:
    """Per-pixel RX scores for one sequence under one model."""

    sequence_id: str
    model_fingerprint: str
    width: int
    height: int
    scores: np.ndarray

    def __post_init__(self):
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("map dimensions must be positive")
        if scores.shape != (self.height, self.width):
            raise ValueError(
                f"scores shape {scores.shape} does not match "
                f"(height, width) = ({self.height}, {self.width})"
            )
        if not np.isfinite(scores).all():
            raise ValueError("scores contain non-finite values")
        if scores.min() < 0.0:
            raise ValueError("scores must be non-negative")
        scores.setflags(write=False)


# ---------------------------------------------------------------------------
# percentile helpers


def _at_rank(sorted_values: np.ndarray, num: int, den: int) -> float:
    # nearest-rank: smallest value whose 1-based rank is >= ceil(num/den * N);
    # exact integer ceiling avoids float artifacts like ceil(0.999 * 1000) == 1000
    n = sorted_values.size
    rank = -((-num * n) // den)
    return float(sorted_values[max(rank, 1) - 1])


def nearest_rank_percentile(values, pct) -> float:
    """Nearest-rank percentile of `values` for pct in (0, 100]."""
    arr = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if arr.size == 0:
        raise ValueError("cannot take a percentile of an empty set")
    frac = Fraction(str(pct)) / 100
    if not 0 < frac <= 1:
        raise ValueError("pct must be in (0, 100]")
    return _at_rank(arr, frac.numerator, frac.denominator)


# ---------------------------------------------------------------------------
# fitting


def _stack_buffer(buf: list[np.ndarray]) -> np.ndarray:
    shape = buf[0].shape
    for vec in buf:
        if vec.ndim != 1 or vec.shape != shape:
            raise DimensionMismatch("pixel vectors have inconsistent lengths")
    return np.vstack(buf)


def _iter_blocks(source) -> Iterator[np.ndarray]:
    """Yield 2-D float64 blocks of pixel vectors with a fixed chunk structure."""
    if isinstance(source, np.ndarray):
        arr = np.asarray(source, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatch("pixel array must be 2-D (pixels x bands)")
        for start in range(0, arr.shape[0], _ARRAY_CHUNK):
            yield arr[start : start + _ARRAY_CHUNK]
        return
    if hasattr(source, "iter_blocks"):
        for block in source.iter_blocks():
            block = np.asarray(block, dtype=np.float64)
            if block.ndim != 2:
                raise DimensionMismatch("pixel block must be 2-D (pixels x bands)")
            yield block
        return
    buf: list[np.ndarray] = []
    for vec in source:
        buf.append(np.asarray(vec, dtype=np.float64))
        if len(buf) == _BUFFER_CHUNK:
            yield _stack_buffer(buf)
            buf = []
    if buf:
        yield _stack_buffer(buf)


def _invert_regularized(sigma: np.ndarray, ridge_lambda: float) -> np.ndarray:
    n = sigma.shape[0]
    ridge = ridge_lambda * float(np.mean(np.diag(sigma)))
    regularized = sigma + ridge * np.eye(n)
    try:
        factor = scipy.linalg.cho_factor(regularized, lower=True)
    except scipy.linalg.LinAlgError as err:
        raise SingularCovariance(
            f"regularized covariance is not positive definite ({err}); "
            f"raise ridge_lambda to condition the fit"
        ) from err
    inv = scipy.linalg.cho_solve(factor, np.eye(n))
    inv = (inv + inv.T) / 2.0
    if np.abs(regularized @ inv - np.eye(n)).max() > _INVERSE_ATOL:
        raise SingularCovariance(
            "covariance is too ill-conditioned to invert reliably; raise ridge_lambda"
        )
    return inv


def _score_rows(rows: np.ndarray, mu: np.ndarray, sigma_inv: np.ndarray) -> np.ndarray:
    # einsum (no optimize) keeps a fixed summation order, so a pixel's score is
    # identical whether scored alone or inside a cube
    d = rows - mu
    out = np.einsum("ij,jk,ik->i", d, sigma_inv, d)
    return np.maximum(out, 0.0)


def fit_background(
    pixel_source,
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
    *,
    band_wavelengths=None,
    brightness_corrected: bool | None = None,
) -> BackgroundModel:
    """Fit the background distribution over a re-iterable stream of pixel spectra.

    The source may be a 2-D array (pixels x bands), any re-iterable of
    1-D vectors, or an object exposing ``iter_blocks()`` yielding 2-D blocks.
    Three passes: mean, population covariance, then a scoring pass that
    records archive score percentiles.
    """
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be non-negative")
    if iter(pixel_source) is pixel_source:
        raise ValueError("pixel source must be re-iterable, not a one-shot iterator")

    n: int | None = None
    count = 0
    total: np.ndarray | None = None
    for block in _iter_blocks(pixel_source):
        if block.shape[0] == 0:
            continue
        if n is None:
            n = block.shape[1]
            total = np.zeros(n)
        if block.shape[1] != n:
            raise DimensionMismatch(
                f"pixel vector length {block.shape[1]} does not match first length {n}"
            )
        if not np.isfinite(block).all():
            raise NonFiniteInput("training pixels contain non-finite values")
        total += block.sum(axis=0)
        count += block.shape[0]
    if n is None or count <= n:
        raise TooFewPixels(f"need more than n_bands training pixels, got {count}")
    mu = total / count

    acc = np.zeros((n, n))
    for block in _iter_blocks(pixel_source):
        d = block - mu
        acc += np.einsum("ij,ik->jk", d, d)
    sigma = acc / count

    sigma_inv = _invert_regularized(sigma, ridge_lambda)

    chunks = [_score_rows(block, mu, sigma_inv) for block in _iter_blocks(pixel_source)]
    percentiles = ScorePercentiles.from_scores(np.concatenate(chunks))

    if band_wavelengths is None:
        band_wavelengths = getattr(pixel_source, "band_wavelengths", None)
    if band_wavelengths is None:
        band_wavelengths = (0.0,) * n
    if brightness_corrected is None:
        brightness_corrected = getattr(pixel_source, "brightness_corrected", None)
    if brightness_corrected is None:
        brightness_corrected = False

    return BackgroundModel(
        n_bands=n,
        band_wavelengths=tuple(band_wavelengths),
        mu=mu,
        sigma=sigma,
        sigma_inv=sigma_inv,
        ridge_lambda=float(ridge_lambda),
        brightness_corrected=bool(brightness_corrected),
        training_pixel_count=count,
        score_percentiles=percentiles,
    )


class _CubeSource:
    """Re-iterable pixel source backed by a single cube."""

    def __init__(self, cube: PixelCube):
        self._pixels = cube.pixels
        self.band_wavelengths = cube.band_wavelengths
        self.brightness_corrected = cube.brightness_corrected

    def iter_blocks(self):
        yield self._pixels

    def __iter__(self):
        return iter(self._pixels)


def fit_local(cube: PixelCube, ridge_lambda: float = DEFAULT_RIDGE_LAMBDA) -> BackgroundModel:
    """Fit a background from a single cube's own pixels (per-image model)."""
    if cube.width * cube.height <= cube.n_bands:
        raise TooFewPixels(
            f"cube has {cube.width * cube.height} pixels, need more than {cube.n_bands}"
        )
    return fit_background(_CubeSource(cube), ridge_lambda)


# ---------------------------------------------------------------------------
# scoring


def rx_score(pixel, model: BackgroundModel) -> float:
    """Squared Mahalanobis distance of one pixel spectrum from the background."""
    arr = np.asarray(pixel, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != model.n_bands:
        raise DimensionMismatch(
            f"pixel has shape {arr.shape}, model expects length {model.n_bands}"
        )
    if not np.isfinite(arr).all():
        raise NonFiniteInput("pixel contains non-finite values")
    return float(_score_rows(arr[np.newaxis, :], model.mu, model.sigma_inv)[0])


def score_cube(cube: PixelCube, model: BackgroundModel, sequence_id: str = "") -> NoveltyMap:
    """Score every pixel of a cube; output dimensions equal the cube's."""
    if cube.n_bands != model.n_bands:
        raise DimensionMismatch(
            f"cube has {cube.n_bands} bands, model expects {model.n_bands}"
        )
    if cube.brightness_corrected != model.brightness_corrected:
        cube_mode = "corrected" if cube.brightness_corrected else "raw"
        model_mode = "corrected" if model.brightness_corrected else "raw"
        raise CorrectionModeMismatch(
            f"cannot score a {cube_mode} cube against a {model_mode} model; "
            f"reload the cube with brightness_correct={model.brightness_corrected}"
        )
    scores = _score_rows(cube.pixels, model.mu, model.sigma_inv)
    return NoveltyMap(
        sequence_id=sequence_id,
        model_fingerprint=model.fingerprint,
        width=cube.width,
        height=cube.height,
        scores=scores.reshape(cube.height, cube.width),
    )


# ---------------------------------------------------------------------------
# model file format


def model_document(model: BackgroundModel) -> dict:
    """The versioned JSON document for a model file."""
    pct = model.score_percentiles
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "n_bands": model.n_bands,
        "band_wavelengths": [float(w) for w in model.band_wavelengths],
        "brightness_corrected": model.brightness_corrected,
        "ridge_lambda": float(model.ridge_lambda),
        "training_pixel_count": model.training_pixel_count,
        "mu": [float(v) for v in model.mu],
        "sigma": [[float(v) for v in row] for row in model.sigma],
        "sigma_inv": [[float(v) for v in row] for row in model.sigma_inv],
        "score_percentiles": pct.as_dict() if pct is not None else None,
    }


def canonical_model_bytes(model: BackgroundModel) -> bytes:
    """Sorted-key, no-whitespace serialization; its SHA-256 is the fingerprint."""
    return json.dumps(model_document(model), sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_model(model: BackgroundModel, path) -> None:
    """Write the model file; its bytes are exactly the canonical serialization."""
    if model.score_percentiles is None:
        raise ValueError("cannot save a model without score percentiles")
    atomic_write_bytes(path, canonical_model_bytes(model))


def load_model(path) -> BackgroundModel:
    """Load and validate a model file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}: not valid JSON: {err}", path=path) from err
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: model document must be a JSON object", path=path)
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ParseError(
            f"{path}: unsupported model format_version {version!r}", path=path
        )
    try:
        pct = doc["score_percentiles"]
        model = BackgroundModel(
            n_bands=int(doc["n_bands"]),
            band_wavelengths=tuple(float(w) for w in doc["band_wavelengths"]),
            mu=np.asarray(doc["mu"], dtype=np.float64),
            sigma=np.asarray(doc["sigma"], dtype=np.float64),
            sigma_inv=np.asarray(doc["sigma_inv"], dtype=np.float64),
            ridge_lambda=float(doc["ridge_lambda"]),
            brightness_corrected=bool(doc["brightness_corrected"]),
            training_pixel_count=int(doc["training_pixel_count"]),
            score_percentiles=ScorePercentiles(
                p01=float(pct["p01"]),
                p50=float(pct["p50"]),
                p99=float(pct["p99"]),
                p999=float(pct["p999"]),
                max=float(pct["max"]),
            ),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"{path}: invalid model document: {err}", path=path) from err
    return model


# ---------------------------------------------------------------------------
# raw score-map files (magic "RXM1", u32 width, u32 height, row-major f64,
# all little-endian)


def write_raw_map(path, scores: np.ndarray) -> None:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch("raw map must be 2-D")
    height, width = arr.shape
    header = struct.pack("<4sII", _MAP_MAGIC, width, height)
    atomic_write_bytes(path, header + arr.astype("<f8").tobytes())


def read_raw_map(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise ParseError(f"{path}: truncated raw map header", path=path)
    magic, width, height = struct.unpack_from("<4sII", data)
    if magic != _MAP_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}", path=path)
    expected = 12 + 8 * width * height
    if len(data) != expected:
        raise ParseError(
            f"{path}: expected {expected} bytes for {width}x{height} map, got {len(data)}",
            path=path,
        )
    flat = np.frombuffer(data, dtype="<f8", offset=12)
    return flat.astype(np.float64).reshape(height, width)

"""Archive loading: manifests, band products, and training pixel streams.

An archive is described by a JSON-lines manifest, one sequence per line:

    {"sequence_id": "mcam12276", "eye": "left", "sol": 1712,
     "rgb": "mcam12276/rgb.png",
     "bands": [{"filter": "L1", "wavelength_nm": 527.0, "path": "..."}, ...x6],
     "cal_target": false}

Paths are relative to the manifest's directory.  Each sequence is an RGB
reference product plus exactly six narrow-band products, all the same size.
Calibration-target sequences are carried in the manifest but excluded from
training by `filter_archive`.

Brightness correction divides every band by the RGB product's grayscale
(arithmetic mean of R, G, B scaled to [0, 1]), clamped below at 1/255 so
dark pixels cannot blow up the division.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DecodeError,
    DimensionMismatch,
    MissingFile,
    ParseError,
    RxTriageError,
)
from .spectral import BandImage, PixelCube

__all__ = [
    "CORRECTION_EPSILON",
    "BandRef",
    "SequenceRecord",
    "ArchiveManifest",
    "load_manifest",
    "filter_archive",
    "load_cube",
    "training_pixel_stream",
    "TrainingPixelStream",
    "grayscale_plane",
    "apply_brightness_correction",
]

# smallest nonzero 8-bit level; divisor floor for the brightness correction
CORRECTION_EPSILON = 1.0 / 255.0

EYES = ("left", "right")
BANDS_PER_SEQUENCE = 6


@dataclass(frozen=True)
class BandRef:
    """One narrow-band product reference within a sequence."""

    filter_id: str
    wavelength_nm: float
    path: Path


@dataclass(frozen=True)
class SequenceRecord:
    """One archive sequence: an RGB reference plus six narrow-band products."""

    sequence_id: str
    eye: str
    sol: int
    rgb_path: Path
    bands: tuple[BandRef, ...]
    has_cal_target: bool
    width: int
    height: int

    def __post_init__(self):
        if self.eye not in EYES:
            raise ValueError(f"eye must be one of {EYES}, got {self.eye!r}")
        if self.sol < 0:
            raise ValueError("sol must be non-negative")
        if len(self.bands) != BANDS_PER_SEQUENCE:
            raise ValueError(
                f"expected {BANDS_PER_SEQUENCE} narrow-band products, got {len(self.bands)}"
            )
        if self.width <= 0 or self.height <= 0:
            raise ValueError("sequence dimensions must be positive")

    @property
    def band_wavelengths(self) -> tuple[float, ...]:
        return tuple(b.wavelength_nm for b in self.bands)


@dataclass(frozen=True)
class ArchiveManifest:
    """Parsed manifest: ordered sequence records plus the path root."""

    root: Path
    entries: tuple[SequenceRecord, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def find(self, sequence_id: str) -> SequenceRecord | None:
        for rec in self.entries:
            if rec.sequence_id == sequence_id:
                return rec
        return None


def _filter_index(filter_id: str) -> int | None:
    digits = ""
    for ch in reversed(filter_id):
        if ch.isdigit():
            digits = ch + digits
        else:
            break
    return int(digits) if digits else None


def _png_size(path: Path, line: int) -> tuple[int, int]:
    # header-only read; full decode happens at load_cube
    try:
        with Image.open(path) as img:
            return img.size
    except (UnidentifiedImageError, OSError) as err:
        raise ParseError(
            f"line {line}: cannot read image size from {path}: {err}", path=path, line=line
        ) from err


def _parse_line(raw: str, line: int, root: Path) -> SequenceRecord:
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ParseError(f"line {line}: not valid JSON: {err}", line=line) from err
    if not isinstance(doc, dict):
        raise ParseError(f"line {line}: sequence descriptor must be a JSON object", line=line)
    try:
        sequence_id = str(doc["sequence_id"])
        eye = doc["eye"]
        sol = doc["sol"]
        rgb_rel = doc["rgb"]
        bands_doc = doc["bands"]
        cal_target = doc["cal_target"]
    except KeyError as err:
        raise ParseError(f"line {line}: missing field {err.args[0]!r}", line=line) from err
    if eye not in EYES:
        raise ParseError(f"line {line}: eye must be one of {EYES}, got {eye!r}", line=line)
    if not isinstance(sol, int) or isinstance(sol, bool) or sol < 0:
        raise ParseError(f"line {line}: sol must be a non-negative integer", line=line)
    if not isinstance(bands_doc, list) or len(bands_doc) != BANDS_PER_SEQUENCE:
        got = len(bands_doc) if isinstance(bands_doc, list) else type(bands_doc).__name__
        raise ParseError(
            f"line {line}: expected {BANDS_PER_SEQUENCE} narrow-band products, got {got}",
            line=line,
        )
    if not isinstance(cal_target, bool):
        raise ParseError(f"line {line}: cal_target must be a boolean", line=line)

    bands = []
    for entry in bands_doc:
        try:
            bands.append(
                BandRef(
                    filter_id=str(entry["filter"]),
                    wavelength_nm=float(entry["wavelength_nm"]),
                    path=root / entry["path"],
                )
            )
        except (KeyError, TypeError, ValueError) as err:
            raise ParseError(f"line {line}: malformed band entry: {err}", line=line) from err
    indices = [_filter_index(b.filter_id) for b in bands]
    if all(i is not None for i in indices) and indices != sorted(indices):
        raise ParseError(
            f"line {line}: band products must be ordered by ascending filter index", line=line
        )

    rgb_path = root / rgb_rel
    for path, what in [(rgb_path, "rgb product")] + [(b.path, f"band {b.filter_id}") for b in bands]:
        if not path.is_file():
            raise MissingFile(f"line {line}: {what} not found: {path}")
    width, height = _png_size(rgb_path, line)

    try:
        return SequenceRecord(
            sequence_id=sequence_id,
            eye=eye,
            sol=sol,
            rgb_path=rgb_path,
            bands=tuple(bands),
            has_cal_target=cal_target,
            width=width,
            height=height,
        )
    except ValueError as err:
        raise ParseError(f"line {line}: {err}", line=line) from err


def load_manifest(path) -> ArchiveManifest:
    """Parse a JSON-lines manifest; paths resolve against the manifest's directory."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    root = path.parent
    entries: list[SequenceRecord] = []
    seen: set[tuple[str, str]] = set()
    for line_no, raw in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        rec = _parse_line(raw, line_no, root)
        key = (rec.sequence_id, rec.eye)
        if key in seen:
            raise ParseError(
                f"line {line_no}: duplicate sequence_id {rec.sequence_id!r} for eye {rec.eye}",
                line=line_no,
            )
        seen.add(key)
        entries.append(rec)
    return ArchiveManifest(root=root, entries=tuple(entries))


def filter_archive(manifest: ArchiveManifest) -> ArchiveManifest:
    """Drop calibration-target sequences; order and records untouched."""
    kept = tuple(rec for rec in manifest.entries if not rec.has_cal_target)
    return replace(manifest, entries=kept)


def _decode_plane(path: Path, expected_mode: str, record: SequenceRecord) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode != expected_mode:
                raise DecodeError(
                    f"{path} has mode {img.mode}, expected {expected_mode}"
                )
            arr = np.asarray(img, dtype=np.float64)
    except (UnidentifiedImageError, OSError) as err:
        raise DecodeError(f"cannot decode {path}: {err}") from err
    if arr.shape[:2] != (record.height, record.width):
        raise DimensionMismatch(
            f"{path} is {arr.shape[1]}x{arr.shape[0]}, "
            f"expected {record.width}x{record.height}"
        )
    return arr


def grayscale_plane(rgb: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the R, G, B channels; input and output in [0, 1]."""
    return (rgb[..., 0] + rgb[..., 1] + rgb[..., 2]) / 3.0


def apply_brightness_correction(data: np.ndarray, gray: np.ndarray) -> np.ndarray:
    """Divide each band plane by the grayscale, clamped below at 1/255."""
    divisor = np.maximum(gray, CORRECTION_EPSILON)
    return data / divisor[..., np.newaxis]


def load_cube(record: SequenceRecord, brightness_correct: bool = False) -> PixelCube:
    """Decode a sequence's band products into a pixel cube.

    Raw mode stacks the six 8-bit band planes scaled by 1/255.  Corrected
    mode additionally divides every band by the RGB grayscale.
    """
    planes = []
    for ref in record.bands:
        raw = _decode_plane(ref.path, "L", record) / 255.0
        band = BandImage(
            filter_id=ref.filter_id,
            wavelength_nm=ref.wavelength_nm,
            width=record.width,
            height=record.height,
            values=raw,
        )
        planes.append(band.values)
    data = np.stack(planes, axis=-1)
    if brightness_correct:
        rgb = _decode_plane(record.rgb_path, "RGB", record) / 255.0
        data = apply_brightness_correction(data, grayscale_plane(rgb))
    return PixelCube(
        width=record.width,
        height=record.height,
        n_bands=BANDS_PER_SEQUENCE,
        band_wavelengths=record.band_wavelengths,
        data=data,
        brightness_corrected=brightness_correct,
    )


class TrainingPixelStream:
    """Re-iterable stream of every pixel spectrum in a filtered manifest.

    Iteration order is manifest order, then row-major within each sequence;
    re-iteration reproduces the identical order, which the two-pass fitter
    relies on.  Blocks are one sequence each.
    """

    def __init__(self, manifest: ArchiveManifest, brightness_correct: bool = False):
        self.manifest = manifest
        self.brightness_corrected = bool(brightness_correct)

    @property
    def band_wavelengths(self) -> tuple[float, ...] | None:
        if not self.manifest.entries:
            return None
        return self.manifest.entries[0].band_wavelengths

    def iter_blocks(self) -> Iterator[np.ndarray]:
        expected = self.band_wavelengths
        for rec in self.manifest.entries:
            if rec.band_wavelengths != expected:
                raise ValueError(
                    f"{rec.sequence_id}: band wavelengths {rec.band_wavelengths} differ "
                    f"from the archive's first sequence {expected}"
                )
            try:
                cube = load_cube(rec, self.brightness_corrected)
            except RxTriageError as err:
                raise type(err)(f"{rec.sequence_id}: {err}") from err
            except OSError as err:
                raise MissingFile(f"{rec.sequence_id}: {err}") from err
            yield cube.pixels

    def __iter__(self):
        for block in self.iter_blocks():
            yield from block


def training_pixel_stream(
    manifest: ArchiveManifest, brightness_correct: bool = False
) -> TrainingPixelStream:
    """Build the re-iterable training stream for `fit_background`."""
    return TrainingPixelStream(manifest, brightness_correct)

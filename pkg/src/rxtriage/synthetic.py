"""Synthetic sequence archives for tests and demos.

Generates archives that mimic the real triage setting at desk scale:
six correlated narrow-band planes per sequence with per-sequence
illumination offsets, plus one sequence carrying a small bright patch
displaced several sigma in two bands.  The offsets make sequence means
vary between sequences, so a small intense patch dominates the max
statistic without dominating the mean, and the patch displacement is
chosen to sit far above the background score ceiling.

All randomness flows from one seeded generator in a fixed draw order, so
a given seed always produces byte-identical archives.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "DEFAULT_WAVELENGTHS_NM",
    "SyntheticArchive",
    "make_archive",
    "quantize8",
]

# six visible/near-infrared band centers, ascending by filter index
DEFAULT_WAVELENGTHS_NM = (527.0, 445.0, 751.0, 676.0, 867.0, 1012.0)

# background recipe: per-band means, common noise scale, neighbor correlation
BAND_MEANS = (0.42, 0.40, 0.50, 0.47, 0.52, 0.55)
BAND_SIGMA = 0.03
BAND_RHO = 0.85
# per-sequence mean offsets drawn from the same correlation, scaled by this
OFFSET_ALPHA = 1.0

PATCH_SIZE = 5
PATCH_BANDS = (2, 4)
PATCH_SHIFT_SIGMAS = 6.0

DEFAULT_SEED = 20260301


@dataclass(frozen=True)
class SyntheticArchive:
    """Where a generated archive lives and which pixels are anomalous."""

    manifest_path: Path
    sequence_ids: tuple[str, ...]
    anomaly_sequence_id: str
    patch_origin: tuple[int, int]
    patch_size: int

    @property
    def patch_pixels(self) -> tuple[tuple[int, int], ...]:
        r0, c0 = self.patch_origin
        return tuple(
            (r0 + dr, c0 + dc)
            for dr in range(self.patch_size)
            for dc in range(self.patch_size)
        )


def quantize8(values: np.ndarray) -> np.ndarray:
    """Clip to [0, 1] and round half-up to 8-bit levels."""
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _band_correlation_chol(n: int) -> np.ndarray:
    idx = np.arange(n)
    corr = BAND_RHO ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(corr)


def _save_gray(path: Path, plane: np.ndarray) -> None:
    Image.fromarray(plane, mode="L").save(path, format="PNG")


def _save_rgb(path: Path, plane: np.ndarray) -> None:
    rgb = np.stack([plane, plane, plane], axis=-1)
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")


def make_archive(
    root,
    n_sequences: int = 50,
    width: int = 140,
    height: int = 100,
    seed: int = DEFAULT_SEED,
    anomaly_index: int = 17,
    cal_target_count: int = 0,
) -> SyntheticArchive:
    """Write a synthetic archive under `root` and return its description.

    One directory per sequence holding six 8-bit band PNGs plus an RGB
    reference whose gray level is the mean of the band planes; a JSON-lines
    manifest at root/manifest.jsonl ties them together.  Sequence
    `anomaly_index` carries a PATCH_SIZE² patch shifted PATCH_SHIFT_SIGMAS
    noise sigmas in two bands.  `cal_target_count` extra calibration-target
    sequences (plain background) are appended after the regular ones.
    """
    if not 0 <= anomaly_index < n_sequences:
        raise ValueError("anomaly_index must select one of the regular sequences")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_bands = len(BAND_MEANS)
    chol = _band_correlation_chol(n_bands)
    means = np.array(BAND_MEANS)

    patch_r0 = (height - PATCH_SIZE) // 2
    patch_c0 = (width - PATCH_SIZE) // 2

    lines = []
    sequence_ids = []
    anomaly_id = ""
    total = n_sequences + cal_target_count
    for idx in range(total):
        is_cal = idx >= n_sequences
        seq_id = f"cal{idx:05d}" if is_cal else f"syn{idx:05d}"
        eye = "left" if idx % 2 == 0 else "right"
        prefix = "L" if eye == "left" else "R"
        seq_dir = root / seq_id
        seq_dir.mkdir(exist_ok=True)

        offset = OFFSET_ALPHA * BAND_SIGMA * (chol @ rng.standard_normal(n_bands))
        noise = rng.standard_normal((height, width, n_bands)) @ chol.T
        cube = means + offset + BAND_SIGMA * noise
        if not is_cal and idx == anomaly_index:
            anomaly_id = seq_id
            shift = PATCH_SHIFT_SIGMAS * BAND_SIGMA
            for band in PATCH_BANDS:
                cube[
                    patch_r0 : patch_r0 + PATCH_SIZE,
                    patch_c0 : patch_c0 + PATCH_SIZE,
                    band,
                ] += shift

        band_docs = []
        for k in range(n_bands):
            filter_id = f"{prefix}{k + 1}"
            rel = f"{seq_id}/{filter_id}.png"
            _save_gray(root / rel, quantize8(cube[:, :, k]))
            band_docs.append(
                {
                    "filter": filter_id,
                    "wavelength_nm": DEFAULT_WAVELENGTHS_NM[k],
                    "path": rel,
                }
            )
        rgb_rel = f"{seq_id}/rgb.png"
        _save_rgb(root / rgb_rel, quantize8(cube.mean(axis=2)))

        lines.append(
            json.dumps(
                {
                    "sequence_id": seq_id,
                    "eye": eye,
                    "sol": 1000 + idx,
                    "rgb": rgb_rel,
                    "bands": band_docs,
                    "cal_target": is_cal,
                },
                sort_keys=True,
            )
        )
        if not is_cal:
            sequence_ids.append(seq_id)

    manifest_path = root / "manifest.jsonl"
    manifest_path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return SyntheticArchive(
        manifest_path=manifest_path,
        sequence_ids=tuple(sequence_ids),
        anomaly_sequence_id=anomaly_id,
        patch_origin=(patch_r0, patch_c0),
        patch_size=PATCH_SIZE,
    )

"""Release gate: one test per end-to-end requirement.

Each test is a single pass/fail line with its tolerance pinned inline.
Budgets are wall-clock upper bounds on the operative section only.
"""

import hashlib
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
from PIL import Image

from rxtriage.cli import main
from rxtriage.ingest import (
    CORRECTION_EPSILON,
    apply_brightness_correction,
    grayscale_plane,
    load_cube,
    load_manifest,
)
from rxtriage.render import DEFAULT_COLORMAP, colorize
from rxtriage.spectral import (
    BackgroundModel,
    PixelCube,
    fit_background,
    nearest_rank_percentile,
    read_raw_map,
    rx_score,
    score_cube,
)
from rxtriage.synthetic import make_archive, quantize8
from rxtriage.triage import load_database, spearman

from test_ingest import write_manifest, write_sequence


def identity_model(n_bands, mu=None):
    eye = np.eye(n_bands)
    return BackgroundModel(
        n_bands=n_bands,
        band_wavelengths=tuple(500.0 + 10.0 * k for k in range(n_bands)),
        mu=np.zeros(n_bands) if mu is None else np.asarray(mu, dtype=np.float64),
        sigma=eye.copy(),
        sigma_inv=eye.copy(),
        ridge_lambda=0.0,
        brightness_corrected=False,
        training_pixel_count=n_bands + 1,
    )


def random_dataset(rng, count, n_bands):
    base = rng.standard_normal((count, n_bands))
    spread = rng.uniform(0.5, 3.0, size=n_bands)
    shift = rng.uniform(1.0, 5.0, size=n_bands)
    return base * spread + shift


def test_rx_identities():
    model = identity_model(2, mu=[5.0, -3.0])
    assert abs(rx_score(np.array([5.0, -3.0]), model)) < 1e-12

    assert rx_score(np.array([3.0, 4.0]), identity_model(2)) == 25.0

    # covariance [[2,1],[1,2]] inverts to (1/3)[[2,-1],[-1,2]]; the
    # displacement (1,-1) lies along the minor axis and scores exactly 2
    sigma = np.array([[2.0, 1.0], [1.0, 2.0]])
    model = BackgroundModel(
        n_bands=2,
        band_wavelengths=(500.0, 600.0),
        mu=np.zeros(2),
        sigma=sigma,
        sigma_inv=np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3.0,
        ridge_lambda=0.0,
        brightness_corrected=False,
        training_pixel_count=3,
    )
    assert abs(rx_score(np.array([1.0, -1.0]), model) - 2.0) < 1e-12


def test_training_mean_identity():
    rng = np.random.default_rng(42)
    start = time.perf_counter()
    for _ in range(200):
        n_bands = int(rng.integers(2, 7))
        count = int(rng.integers(10, 5001))
        data = random_dataset(rng, count, n_bands)
        model = fit_background(data, ridge_lambda=0.0)
        scores = np.array([rx_score(p, model) for p in data[: min(count, 200)]])
        # subsampling would break the identity; score the full set instead
        full = np.einsum(
            "ij,jk,ik->i", data - model.mu, model.sigma_inv, data - model.mu
        )
        assert abs(full.mean() - n_bands) / n_bands < 1e-6
        assert np.all(scores >= 0.0)
    assert time.perf_counter() - start < 5.0


def test_oracle_equivalence():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    for _ in range(100):
        n_bands = int(rng.integers(2, 7))
        count = int(rng.integers(n_bands + 2, 101))
        data = random_dataset(rng, count, n_bands)
        model = fit_background(data, ridge_lambda=1e-6)

        mu_ref = data.mean(axis=0)
        centered = data - mu_ref
        sigma_ref = (centered.T @ centered) / count
        ridge = 1e-6 * float(np.mean(np.diag(sigma_ref)))
        inv_ref = np.linalg.inv(sigma_ref + ridge * np.eye(n_bands))
        for pixel in data:
            d = pixel - mu_ref
            expected = float(d @ inv_ref @ d)
            got = rx_score(pixel, model)
            assert abs(got - expected) <= 1e-9 * max(abs(expected), 1.0)
    assert time.perf_counter() - start < 5.0


def test_affine_invariance():
    rng = np.random.default_rng(99)
    start = time.perf_counter()
    for _ in range(25):
        n_bands = int(rng.integers(2, 7))
        count = int(rng.integers(50, 400))
        data = random_dataset(rng, count, n_bands)
        q, _ = np.linalg.qr(rng.standard_normal((n_bands, n_bands)))
        transform = q @ np.diag(rng.uniform(0.5, 2.0, size=n_bands))
        offset = rng.uniform(-3.0, 3.0, size=n_bands)
        mapped = data @ transform.T + offset

        base = fit_background(data, ridge_lambda=0.0)
        moved = fit_background(mapped, ridge_lambda=0.0)
        before = np.einsum("ij,jk,ik->i", data - base.mu, base.sigma_inv, data - base.mu)
        after = np.einsum(
            "ij,jk,ik->i", mapped - moved.mu, moved.sigma_inv, mapped - moved.mu
        )
        assert np.allclose(after, before, rtol=1e-6, atol=1e-9)
    assert time.perf_counter() - start < 5.0


def test_brightness_correction_invariance():
    rng = np.random.default_rng(314)
    start = time.perf_counter()
    height, width = 24, 32
    bands = rng.uniform(0.25, 0.85, size=(height, width, 6))
    rgb = rng.uniform(0.25, 0.85, size=(height, width, 3))
    gray = grayscale_plane(rgb)
    corrected = apply_brightness_correction(bands, gray)

    # halving every product is an exact exponent shift: bitwise invariant
    half = apply_brightness_correction(0.5 * bands, grayscale_plane(0.5 * rgb))
    assert np.array_equal(half, corrected)

    # a 0.9 scale rounds each product once; the quotient stays within 1e-12
    scaled = apply_brightness_correction(0.9 * bands, grayscale_plane(0.9 * rgb))
    assert np.allclose(scaled, corrected, rtol=1e-12, atol=0.0)

    # 8-bit storage: deviation bounded by half-step error propagated
    # through the quotient, (q/2)(g + b) / ((g - q/2) g)
    q = 1.0 / 255.0
    stored_bands = quantize8(bands).astype(np.float64) / 255.0
    stored_rgb = quantize8(rgb).astype(np.float64) / 255.0
    quantized = apply_brightness_correction(stored_bands, grayscale_plane(stored_rgb))
    g = gray[..., np.newaxis]
    bound = (q / 2.0) * (g + bands) / ((g - q / 2.0) * g)
    assert np.all(np.abs(quantized - corrected) <= bound)
    assert time.perf_counter() - start < 5.0


def test_synthetic_triage_end_to_end(tmp_path, capsys):
    start = time.perf_counter()
    archive = make_archive(tmp_path / "archive", n_sequences=50, width=140, height=100)
    model_path = tmp_path / "model.json"
    db_path = tmp_path / "scores.jsonl"
    maps_dir = tmp_path / "maps"
    assert main(["fit", "--manifest", str(archive.manifest_path), "--out", str(model_path)]) == 0
    assert (
        main(
            [
                "score",
                "--model",
                str(model_path),
                "--manifest",
                str(archive.manifest_path),
                "--scores-out",
                str(db_path),
                "--maps-dir",
                str(maps_dir),
            ]
        )
        == 0
    )
    capsys.readouterr()

    assert main(["rank", "--scores", str(db_path), "--key", "max", "--top", "1"]) == 0
    top_by_max = capsys.readouterr().out.splitlines()[1].split(",")[0]
    assert top_by_max == archive.anomaly_sequence_id

    # the patch pixels must sit in the top 0.1% of scores archive-wide
    pooled = np.concatenate(
        [read_raw_map(maps_dir / f"{sid}.rxm").ravel() for sid in archive.sequence_ids]
    )
    threshold = nearest_rank_percentile(pooled, 99.9)
    anomaly_map = read_raw_map(maps_dir / f"{archive.anomaly_sequence_id}.rxm")
    patch_scores = [anomaly_map[r, c] for r, c in archive.patch_pixels]
    assert sum(s >= threshold for s in patch_scores) >= 20

    # stronger: within the anomalous sequence the patch IS the hot spot
    order = np.argsort(anomaly_map, axis=None)[::-1][:25]
    top_pixels = {tuple(divmod(int(i), anomaly_map.shape[1])) for i in order}
    assert top_pixels == set(archive.patch_pixels)

    assert main(["rank", "--scores", str(db_path), "--key", "mean", "--top", "1"]) == 0
    top_by_mean = capsys.readouterr().out.splitlines()[1].split(",")[0]
    assert top_by_mean != archive.anomaly_sequence_id
    assert time.perf_counter() - start < 30.0


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept_small")
    archive = make_archive(
        root / "archive", n_sequences=8, width=40, height=30, seed=5150, anomaly_index=2
    )
    model_path = root / "model.json"
    db_path = root / "scores.jsonl"
    assert main(["fit", "--manifest", str(archive.manifest_path), "--out", str(model_path)]) == 0
    assert (
        main(
            [
                "score",
                "--model",
                str(model_path),
                "--manifest",
                str(archive.manifest_path),
                "--scores-out",
                str(db_path),
            ]
        )
        == 0
    )
    return {"archive": archive, "model_path": model_path, "db_path": db_path}


def test_rendering_determinism(small_run, tmp_path):
    archive = small_run["archive"]
    sid = archive.sequence_ids[0]
    digests = []
    for run in ("one", "two"):
        out = tmp_path / f"{run}.png"
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "rxtriage.cli",
                "render",
                "--model",
                str(small_run["model_path"]),
                "--manifest",
                str(archive.manifest_path),
                "--sequence",
                sid,
                "--norm",
                "global",
                "--out",
                str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
    assert digests[0] == digests[1]

    # colormap endpoints and mid-stops reproduce the stop table exactly
    positions = np.array([[0.0, 0.25, 0.5, 0.75, 1.0]])
    expected = np.array(
        [[(0, 0, 4), (87, 16, 110), (188, 55, 84), (249, 142, 9), (252, 255, 164)]],
        dtype=np.uint8,
    )
    assert np.array_equal(colorize(positions, DEFAULT_COLORMAP), expected)


def test_spearman_exact():
    ids = ["a", "b", "c", "d"]
    assert spearman(ids, ids) == 1.0
    assert spearman(ids, ids[::-1]) == -1.0
    # one adjacent swap among three: 1 - 6*(0+1+1)/(3*8) = 0.5
    assert spearman(["a", "b", "c"], ["a", "c", "b"]) == 0.5


def test_pipeline_determinism(small_run, tmp_path):
    archive = small_run["archive"]
    outputs = []
    for run in ("one", "two"):
        run_dir = tmp_path / run
        run_dir.mkdir()
        steps = [
            ["fit", "--manifest", str(archive.manifest_path), "--out", str(run_dir / "model.json")],
            [
                "score",
                "--model",
                str(run_dir / "model.json"),
                "--manifest",
                str(archive.manifest_path),
                "--scores-out",
                str(run_dir / "scores.jsonl"),
            ],
            [
                "rank",
                "--scores",
                str(run_dir / "scores.jsonl"),
                "--csv",
                str(run_dir / "rank.csv"),
            ],
        ]
        for step in steps:
            proc = subprocess.run(
                [sys.executable, "-m", "rxtriage.cli", *step], capture_output=True, text=True
            )
            assert proc.returncode == 0, proc.stderr
        outputs.append(
            tuple((run_dir / name).read_bytes() for name in ("model.json", "scores.jsonl", "rank.csv"))
        )
    assert outputs[0] == outputs[1]

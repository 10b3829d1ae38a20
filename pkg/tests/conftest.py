import shutil

import numpy as np
import pytest

from rxtriage.ingest import filter_archive, load_cube, load_manifest, training_pixel_stream
from rxtriage.spectral import fit_background, save_model, score_cube, write_raw_map
from rxtriage.synthetic import make_archive
from rxtriage.triage import aggregate, write_scores


@pytest.fixture(scope="session")
def tiny_archive(tmp_path_factory):
    """Small synthetic archive: 6 regular sequences plus 2 cal-target ones."""
    root = tmp_path_factory.mktemp("tiny_archive")
    return make_archive(
        root,
        n_sequences=6,
        width=20,
        height=16,
        seed=7,
        anomaly_index=3,
        cal_target_count=2,
    )


@pytest.fixture(scope="session")
def tiny_pipeline(tmp_path_factory, tiny_archive):
    """Model + score DB + raw maps fitted over the tiny archive, raw mode."""
    out = tmp_path_factory.mktemp("tiny_pipeline")
    manifest = filter_archive(load_manifest(tiny_archive.manifest_path))
    model = fit_background(training_pixel_stream(manifest))
    model_path = out / "model.json"
    save_model(model, model_path)
    maps_dir = out / "maps"
    maps_dir.mkdir()
    scores = []
    for rec in manifest.entries:
        novelty = score_cube(load_cube(rec), model, rec.sequence_id)
        scores.append(aggregate(novelty))
        write_raw_map(maps_dir / f"{rec.sequence_id}.rxm", novelty.scores)
    db_path = out / "scores.jsonl"
    write_scores(db_path, scores)
    return {
        "archive": tiny_archive,
        "manifest_path": tiny_archive.manifest_path,
        "model_path": model_path,
        "model": model,
        "db_path": db_path,
        "maps_dir": maps_dir,
        "scores": scores,
    }


@pytest.fixture()
def pipeline_copy(tmp_path, tiny_pipeline):
    """Per-test copy of the pipeline outputs so writes stay isolated."""
    db_path = tmp_path / "scores.jsonl"
    shutil.copyfile(tiny_pipeline["db_path"], db_path)
    return {**tiny_pipeline, "db_path": db_path}


def random_spd_dataset(rng, count, n_bands):
    """Random well-conditioned training matrix (count x n_bands)."""
    spread = rng.uniform(0.5, 2.0, size=n_bands)
    base = rng.normal(0.0, 1.0, size=(count, n_bands)) * spread
    return base + rng.uniform(1.0, 5.0, size=n_bands)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)

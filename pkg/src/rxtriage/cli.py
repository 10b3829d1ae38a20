"""Batch command line: fit, score, rank, render, spearman, serve.

Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 partial
(some sequences skipped during scoring).  Logs go to stderr; stdout is
line-oriented key=value or CSV rows for scripting.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .errors import MissingFile, RxTriageError
from .ingest import (
    BANDS_PER_SEQUENCE,
    filter_archive,
    load_cube,
    load_manifest,
    training_pixel_stream,
)
from .render import render_heatmap
from .spectral import (
    DEFAULT_RIDGE_LAMBDA,
    fit_background,
    fit_local,
    load_model,
    save_model,
    score_cube,
    write_raw_map,
)
from .triage import aggregate, rank, ranking_csv, load_database, spearman, write_scores
from .util import atomic_write_bytes, atomic_write_text

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3

log = logging.getLogger("rxtriage")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rxtriage",
        description="Fit spectral background models, score sequence archives, "
        "rank them for review, and serve the results.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_fit = sub.add_parser("fit", help="fit a background model over an archive")
    p_fit.add_argument("--manifest", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--brightness-correct", action="store_true")
    p_fit.add_argument("--lambda", dest="ridge_lambda", type=float, default=DEFAULT_RIDGE_LAMBDA)
    p_fit.add_argument("--local-per-image", action="store_true")

    p_score = sub.add_parser("score", help="score every sequence of an archive")
    p_score.add_argument("--model", required=True)
    p_score.add_argument("--manifest", required=True)
    p_score.add_argument("--scores-out", required=True)
    p_score.add_argument("--maps-dir")

    p_rank = sub.add_parser("rank", help="order sequences by a score statistic")
    p_rank.add_argument("--scores", required=True)
    p_rank.add_argument("--key", default="max", choices=("max", "mean", "variance", "p99"))
    p_rank.add_argument("--top", type=int)
    p_rank.add_argument("--bottom", type=int)
    p_rank.add_argument("--csv")

    p_render = sub.add_parser("render", help="render one sequence's heat map")
    p_render.add_argument("--model", required=True)
    p_render.add_argument("--manifest", required=True)
    p_render.add_argument("--sequence", required=True)
    p_render.add_argument("--norm", default="local", choices=("local", "global"))
    p_render.add_argument("--out", required=True)

    p_sp = sub.add_parser("spearman", help="rank correlation of two ranking CSVs")
    p_sp.add_argument("--a", required=True)
    p_sp.add_argument("--b", required=True)

    p_serve = sub.add_parser("serve", help="serve the review API")
    p_serve.add_argument("--model", required=True)
    p_serve.add_argument("--manifest", required=True)
    p_serve.add_argument("--scores", required=True)
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--static-dir")
    p_serve.add_argument("--cache-capacity", type=int, default=256)

    return parser


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _cmd_fit(args) -> int:
    manifest = filter_archive(load_manifest(args.manifest))
    if args.local_per_image:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = 0
        for rec in manifest.entries:
            try:
                cube = load_cube(rec, args.brightness_correct)
                model = fit_local(cube, args.ridge_lambda)
            except RxTriageError as err:
                raise type(err)(f"{rec.sequence_id}: {err}") from err
            save_model(model, out_dir / f"{rec.sequence_id}.json")
            print(f"sequence_id={rec.sequence_id} fingerprint={model.fingerprint}")
            written += 1
        print(f"models_written={written}")
        return EXIT_OK
    stream = training_pixel_stream(manifest, args.brightness_correct)
    model = fit_background(stream, args.ridge_lambda)
    save_model(model, args.out)
    print(f"training_pixel_count={model.training_pixel_count}")
    print(f"n_bands={model.n_bands}")
    print(f"ridge_lambda={model.ridge_lambda}")
    print(f"fingerprint={model.fingerprint}")
    return EXIT_OK


def _cmd_score(args) -> int:
    model = load_model(args.model)
    manifest = filter_archive(load_manifest(args.manifest))
    if not manifest.entries:
        return _fail(EXIT_VALIDATION, "manifest holds no scorable sequences")
    if model.n_bands != BANDS_PER_SEQUENCE:
        return _fail(
            EXIT_VALIDATION,
            f"model expects {model.n_bands} bands, archives carry {BANDS_PER_SEQUENCE}",
        )
    maps_dir = None
    if args.maps_dir:
        maps_dir = Path(args.maps_dir)
        maps_dir.mkdir(parents=True, exist_ok=True)
    scores = []
    skipped = 0
    for rec in manifest.entries:
        try:
            cube = load_cube(rec, model.brightness_corrected)
            novelty = score_cube(cube, model, rec.sequence_id)
        except (RxTriageError, OSError) as err:
            log.warning("skipping %s: %s", rec.sequence_id, err)
            skipped += 1
            continue
        scores.append(aggregate(novelty))
        if maps_dir is not None:
            write_raw_map(maps_dir / f"{rec.sequence_id}.rxm", novelty.scores)
    write_scores(args.scores_out, scores)
    print(f"scored={len(scores)} skipped={skipped}")
    return EXIT_PARTIAL if skipped else EXIT_OK


def _cmd_rank(args) -> int:
    db = load_database(args.scores)
    ordered = rank(db.scores, key=args.key)
    text = ranking_csv(ordered, args.key)
    if args.csv:
        atomic_write_text(args.csv, text)
    rows = text.splitlines()
    header, body = rows[0], rows[1:]
    if args.top is not None or args.bottom is not None:
        shown = []
        if args.top:
            shown.extend(body[: args.top])
        if args.bottom:
            tail = body[-args.bottom :] if args.bottom <= len(body) else body
            shown.extend(r for r in tail if r not in shown)
        body = shown
    print(header)
    for row in body:
        print(row)
    return EXIT_OK


def _cmd_render(args) -> int:
    model = load_model(args.model)
    manifest = load_manifest(args.manifest)
    rec = manifest.find(args.sequence)
    if rec is None:
        return _fail(EXIT_VALIDATION, f"unknown sequence {args.sequence!r}")
    cube = load_cube(rec, model.brightness_corrected)
    novelty = score_cube(cube, model, rec.sequence_id)
    atomic_write_bytes(args.out, render_heatmap(novelty, args.norm, model))
    return EXIT_OK


def _read_ranking_ids(path: Path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "sequence_id" not in reader.fieldnames:
            raise RxTriageError(f"{path}: not a ranking CSV (no sequence_id column)")
        return [row["sequence_id"] for row in reader]


def _cmd_spearman(args) -> int:
    ids_a = _read_ranking_ids(Path(args.a))
    ids_b = _read_ranking_ids(Path(args.b))
    rho = spearman(ids_a, ids_b)
    print(f"{rho:.6f}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    # imported lazily so batch subcommands stay importable without the
    # service stack
    from .service import ServiceConfig, run_service

    config = ServiceConfig(
        port=args.port,
        model_path=Path(args.model),
        manifest_path=Path(args.manifest),
        score_db_path=Path(args.scores),
        static_dir=Path(args.static_dir) if args.static_dir else None,
        cache_capacity=args.cache_capacity,
    )
    run_service(config, host=args.host)
    return EXIT_OK


_COMMANDS = {
    "fit": _cmd_fit,
    "score": _cmd_score,
    "rank": _cmd_rank,
    "render": _cmd_render,
    "spearman": _cmd_spearman,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    args = _build_parser().parse_args(argv)
    handler = _COMMANDS[args.subcommand]
    try:
        return handler(args)
    except MissingFile as err:
        return _fail(EXIT_IO, str(err))
    except RxTriageError as err:
        return _fail(EXIT_VALIDATION, str(err))
    except ValueError as err:
        return _fail(EXIT_VALIDATION, str(err))
    except OSError as err:
        return _fail(EXIT_IO, str(err))


if __name__ == "__main__":
    sys.exit(main())

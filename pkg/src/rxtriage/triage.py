"""Per-sequence score aggregation, ranking, persistence, and rank comparison.

Sequence statistics are computed with correctly-rounded summation (fsum),
so they are independent of any vectorized evaluation order and match a
plain per-pixel loop bit for bit.  Ranking is a stable sort with ties
broken by ascending sequence id, which keeps triage lists reproducible.
The score database is JSON-lines: score rows written in bulk, disposition
rows appended as analysts work, latest update winning per sequence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import EmptyMap, IdSetMismatch, MixedModels, ParseError, TooShort
from .spectral import NoveltyMap
from .util import atomic_write_text

__all__ = [
    "RANK_KEYS",
    "DISPOSITION_STATES",
    "NOTE_LIMIT",
    "SequenceScore",
    "Disposition",
    "ScoreDatabase",
    "aggregate",
    "rank",
    "spearman",
    "write_scores",
    "upsert_disposition",
    "load_database",
    "ranking_csv",
]

RANK_KEYS = ("max", "mean", "variance", "p99")
RANK_ORDERS = ("desc", "asc")
DISPOSITION_STATES = ("unreviewed", "reviewed", "flagged")
NOTE_LIMIT = 2000


@dataclass(frozen=True)
class SequenceScore:
    """Summary statistics of one sequence's novelty map."""

    sequence_id: str
    model_fingerprint: str
    max: float
    mean: float
    variance: float
    p99: float
    pixel_count: int
    argmax: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "argmax", (int(self.argmax[0]), int(self.argmax[1])))
        if self.pixel_count <= 0:
            raise ValueError("pixel_count must be positive")
        if self.variance < 0:
            raise ValueError("variance must be non-negative")
        if self.mean > self.max or self.p99 > self.max:
            raise ValueError("mean and p99 cannot exceed max")

    def value(self, key: str) -> float:
        if key not in RANK_KEYS:
            raise ValueError(f"unknown rank key {key!r}, expected one of {RANK_KEYS}")
        return getattr(self, key)


@dataclass(frozen=True)
class Disposition:
    """Analyst verdict on one sequence; absent record means unreviewed."""

    sequence_id: str
    state: str
    note: str | None
    updated_at: datetime

    def __post_init__(self):
        if self.state not in DISPOSITION_STATES:
            raise ValueError(
                f"state must be one of {DISPOSITION_STATES}, got {self.state!r}"
            )
        if self.note is not None and len(self.note) > NOTE_LIMIT:
            raise ValueError(f"note exceeds {NOTE_LIMIT} characters")
        if self.updated_at.tzinfo is None:
            raise ValueError("updated_at must carry a UTC timezone")
        object.__setattr__(self, "updated_at", self.updated_at.astimezone(timezone.utc))


def aggregate(novelty_map: NoveltyMap) -> SequenceScore:
    """Exact summary statistics over every pixel of a map."""
    scores = novelty_map.scores
    if scores.size == 0:
        raise EmptyMap("cannot aggregate an empty novelty map")
    flat = scores.ravel().tolist()
    n = len(flat)
    mean = math.fsum(flat) / n
    variance = math.fsum((v - mean) ** 2 for v in flat) / n
    srt = sorted(flat)
    p99_rank = -((-99 * n) // 100)
    flat_argmax = int(np.argmax(scores))
    return SequenceScore(
        sequence_id=novelty_map.sequence_id,
        model_fingerprint=novelty_map.model_fingerprint,
        max=srt[-1],
        mean=mean,
        variance=variance,
        p99=srt[p99_rank - 1],
        pixel_count=n,
        argmax=(flat_argmax // novelty_map.width, flat_argmax % novelty_map.width),
    )


def rank(
    scores,
    key: str = "max",
    order: str = "desc",
) -> list[SequenceScore]:
    """Sort sequences for review; ties broken by ascending sequence id."""
    scores = list(scores)
    if key not in RANK_KEYS:
        raise ValueError(f"unknown rank key {key!r}, expected one of {RANK_KEYS}")
    if order not in RANK_ORDERS:
        raise ValueError(f"order must be one of {RANK_ORDERS}, got {order!r}")
    fingerprints = {s.model_fingerprint for s in scores}
    if len(fingerprints) > 1:
        raise MixedModels(
            f"scores span {len(fingerprints)} model fingerprints; rank one model at a time"
        )
    sign = -1.0 if order == "desc" else 1.0
    return sorted(scores, key=lambda s: (sign * s.value(key), s.sequence_id))


def spearman(rank_a, rank_b) -> float:
    """Spearman rank correlation of two strict orderings of one id set."""
    a = list(rank_a)
    b = list(rank_b)
    if len(a) < 2 or len(b) < 2:
        raise TooShort("need at least 2 ranked ids")
    if len(set(a)) != len(a) or len(set(b)) != len(b):
        raise IdSetMismatch("rankings contain duplicate ids")
    if set(a) != set(b):
        raise IdSetMismatch("rankings do not cover the same id set")
    pos_b = {sid: i for i, sid in enumerate(b)}
    ssd = sum((i - pos_b[sid]) ** 2 for i, sid in enumerate(a))
    m = len(a)
    return float(1 - Fraction(6 * ssd, m * (m * m - 1)))


# ---------------------------------------------------------------------------
# persistence: JSON-lines, one tagged record per line


def _score_doc(score: SequenceScore) -> dict:
    return {
        "kind": "score",
        "sequence_id": score.sequence_id,
        "model_fingerprint": score.model_fingerprint,
        "max": score.max,
        "mean": score.mean,
        "variance": score.variance,
        "p99": score.p99,
        "pixel_count": score.pixel_count,
        "argmax": [score.argmax[0], score.argmax[1]],
    }


def _disposition_doc(d: Disposition) -> dict:
    return {
        "kind": "disposition",
        "sequence_id": d.sequence_id,
        "state": d.state,
        "note": d.note,
        "updated_at": d.updated_at.isoformat().replace("+00:00", "Z"),
    }


def _dump_line(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _parse_timestamp(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    stamp = datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        raise ValueError("timestamp lacks a timezone")
    return stamp


@dataclass(frozen=True)
class ScoreDatabase:
    """Loaded snapshot: latest score and disposition per sequence."""

    scores: tuple[SequenceScore, ...]
    dispositions: dict

    def score_for(self, sequence_id: str) -> SequenceScore | None:
        for s in self.scores:
            if s.sequence_id == sequence_id:
                return s
        return None

    def disposition_for(self, sequence_id: str) -> Disposition | None:
        return self.dispositions.get(sequence_id)


def write_scores(path, scores) -> None:
    """Write a fresh score database containing the given score rows."""
    lines = [_dump_line(_score_doc(s)) for s in scores]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def upsert_disposition(path, disposition: Disposition) -> None:
    """Append one disposition row; the latest update wins on load."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(_dump_line(_disposition_doc(disposition)) + "\n")
        fh.flush()


def _parse_score(doc: dict, line: int) -> SequenceScore:
    try:
        return SequenceScore(
            sequence_id=str(doc["sequence_id"]),
            model_fingerprint=str(doc["model_fingerprint"]),
            max=float(doc["max"]),
            mean=float(doc["mean"]),
            variance=float(doc["variance"]),
            p99=float(doc["p99"]),
            pixel_count=int(doc["pixel_count"]),
            argmax=(int(doc["argmax"][0]), int(doc["argmax"][1])),
        )
    except (KeyError, TypeError, ValueError, IndexError) as err:
        raise ParseError(f"line {line}: invalid score record: {err}", line=line) from err


def _parse_disposition(doc: dict, line: int) -> Disposition:
    try:
        note = doc["note"]
        return Disposition(
            sequence_id=str(doc["sequence_id"]),
            state=str(doc["state"]),
            note=None if note is None else str(note),
            updated_at=_parse_timestamp(str(doc["updated_at"])),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"line {line}: invalid disposition record: {err}", line=line) from err


def load_database(path) -> ScoreDatabase:
    """Load the JSON-lines store; last write wins per sequence."""
    path = Path(path)
    scores: dict[str, SequenceScore] = {}
    dispositions: dict[str, Disposition] = {}
    for line_no, raw in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as err:
            raise ParseError(f"line {line_no}: not valid JSON: {err}", line=line_no) from err
        if not isinstance(doc, dict):
            raise ParseError(f"line {line_no}: record must be a JSON object", line=line_no)
        kind = doc.get("kind")
        if kind == "score":
            score = _parse_score(doc, line_no)
            scores[score.sequence_id] = score
        elif kind == "disposition":
            d = _parse_disposition(doc, line_no)
            # ties on updated_at resolve to the later file position
            held = dispositions.get(d.sequence_id)
            if held is None or d.updated_at >= held.updated_at:
                dispositions[d.sequence_id] = d
        else:
            raise ParseError(f"line {line_no}: unknown record kind {kind!r}", line=line_no)
    return ScoreDatabase(scores=tuple(scores.values()), dispositions=dispositions)


def ranking_csv(ranked, key: str) -> str:
    """CSV export of a ranked score list: sequence_id,rank,key,value."""
    lines = ["sequence_id,rank,key,value"]
    for position, score in enumerate(ranked, start=1):
        lines.append(f"{score.sequence_id},{position},{key},{score.value(key)!r}")
    return "".join(line + "\n" for line in lines)

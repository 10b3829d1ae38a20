"""Heat-map rendering: normalization, colorization, and PNG encoding.

Local normalization stretches one map's own score range to [0, 1]; global
normalization maps scores against the model's archive-wide training
percentiles so the same score gets the same color in every sequence.
Global mode clips at the training p999 because the very highest training
scores are usually foreground clutter and would flatten everything else.
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import EncodeError, MissingPercentiles, ParseError
from .spectral import BackgroundModel, NoveltyMap

__all__ = [
    "NormalizationMode",
    "ColorMap",
    "DEFAULT_COLORMAP",
    "normalize",
    "colorize",
    "encode_heatmap",
    "render_heatmap",
    "load_colormap",
]


class NormalizationMode(enum.Enum):
    LOCAL = "local"
    GLOBAL = "global"


@dataclass(frozen=True)
class ColorMap:
    """Piecewise-linear colormap: ordered (position, RGB byte triple) stops."""

    stops: tuple[tuple[float, tuple[int, int, int]], ...]

    def __post_init__(self):
        stops = tuple((float(p), (int(r), int(g), int(b))) for p, (r, g, b) in self.stops)
        object.__setattr__(self, "stops", stops)
        if len(stops) < 2:
            raise ValueError("colormap needs at least two stops")
        positions = [p for p, _ in stops]
        if positions[0] != 0.0 or positions[-1] != 1.0:
            raise ValueError("colormap stops must start at 0.0 and end at 1.0")
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise ValueError("colormap stop positions must be strictly increasing")
        for _, rgb in stops:
            if any(not 0 <= ch <= 255 for ch in rgb):
                raise ValueError("colormap colors must be byte triples")


# dark-to-bright ramp; brightest color marks the most novel pixels
DEFAULT_COLORMAP = ColorMap(
    stops=(
        (0.0, (0, 0, 4)),
        (0.25, (87, 16, 110)),
        (0.5, (188, 55, 84)),
        (0.75, (249, 142, 9)),
        (1.0, (252, 255, 164)),
    )
)


def load_colormap(path) -> ColorMap:
    """Read a colormap override: JSON {"stops": [[position, [r,g,b]], ...]}."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
        stops = tuple((p, tuple(rgb)) for p, rgb in doc["stops"])
        return ColorMap(stops=stops)
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}: not valid JSON: {err}", path=path) from err
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"{path}: invalid colormap document: {err}", path=path) from err


def normalize(
    novelty_map: NoveltyMap,
    mode: NormalizationMode | str,
    model: BackgroundModel | None = None,
) -> np.ndarray:
    """Map scores to display values in [0, 1] under the requested mode."""
    mode = NormalizationMode(mode)
    scores = novelty_map.scores
    if mode is NormalizationMode.LOCAL:
        lo = float(scores.min())
        hi = float(scores.max())
        if hi == lo:
            return np.zeros_like(scores)
        return (scores - lo) / (hi - lo)
    if model is None or model.score_percentiles is None:
        raise MissingPercentiles(
            "global normalization needs a model with archive score percentiles"
        )
    lo = model.score_percentiles.p01
    hi = model.score_percentiles.p999
    if hi <= lo:
        # degenerate training distribution: render as a step at the floor
        return (scores > lo).astype(np.float64)
    return np.clip((scores - lo) / (hi - lo), 0.0, 1.0)


def colorize(normalized: np.ndarray, colormap: ColorMap = DEFAULT_COLORMAP) -> np.ndarray:
    """Interpolate display values through the colormap; H×W×3 uint8 out."""
    values = np.asarray(normalized, dtype=np.float64)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ValueError("normalized values must lie in [0, 1]")
    positions = np.array([p for p, _ in colormap.stops])
    channels = []
    for ch in range(3):
        levels = np.array([rgb[ch] for _, rgb in colormap.stops], dtype=np.float64)
        channels.append(np.interp(values, positions, levels))
    blended = np.stack(channels, axis=-1)
    # round half-up so stop values reproduce their declared bytes exactly
    return np.floor(blended + 0.5).astype(np.uint8)


def encode_heatmap(rgb: np.ndarray) -> bytes:
    """Encode an H×W×3 uint8 array as PNG; identical input, identical bytes."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise EncodeError(f"expected an HxWx3 uint8 array, got {arr.dtype} {arr.shape}")
    buf = io.BytesIO()
    try:
        Image.fromarray(arr, mode="RGB").save(buf, format="PNG", optimize=False)
    except (OSError, ValueError) as err:
        raise EncodeError(f"PNG encoding failed: {err}") from err
    return buf.getvalue()


def render_heatmap(
    novelty_map: NoveltyMap,
    mode: NormalizationMode | str,
    model: BackgroundModel | None = None,
    colormap: ColorMap = DEFAULT_COLORMAP,
) -> bytes:
    """normalize + colorize + encode in one step."""
    return encode_heatmap(colorize(normalize(novelty_map, mode, model), colormap))

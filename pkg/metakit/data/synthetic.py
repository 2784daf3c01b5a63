"""
Procedural glyph corpus for hermetic tests and demos.

Each class is a seeded pattern of 3–5 straight strokes; each example of the
class redraws the pattern with a small random translation (under half the
stroke width) and endpoint jitter. Images are square 8-bit grayscale PNGs
laid out as ``out_dir/<class>/<nnn>.png`` next to a ``manifest.json``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from metakit.config import DEFAULT_SPLIT_FRACTIONS, MIN_SYNTHETIC_IMAGE_SIZE
from metakit.core.errors import ConfigurationError, IngestionError
from metakit.core.logging import get_logger
from metakit.core.seeding import derive_rng
from metakit.data.manifest import (
    ClassEntry,
    DatasetManifest,
    ExampleFile,
    file_sha256,
    write_manifest,
)
from metakit.data.models import MetaSplit

logger = get_logger(__name__)

_MIN_STROKES = 3
_MAX_STROKES = 5


def class_name(index: int) -> str:
    return f"glyph_{index:04d}"


def split_counts(num_classes: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Class counts per split; rounding remainders go to the test split."""
    if any(f < 0 for f in fractions) or not np.isclose(sum(fractions), 1.0):
        raise ConfigurationError(f"split fractions must be non-negative and sum to 1, got {fractions}")
    train = int(round(num_classes * fractions[0]))
    val = min(int(round(num_classes * fractions[1])), num_classes - train)
    return train, val, num_classes - train - val


def _prototype(rng: np.random.Generator, size: int) -> np.ndarray:
    """Stroke endpoints ``[strokes, 4]`` as (x0, y0, x1, y1)."""
    margin = max(1.0, size / 8)
    strokes = int(rng.integers(_MIN_STROKES, _MAX_STROKES + 1))
    return rng.uniform(margin, size - 1 - margin, size=(strokes, 4))


def render_glyph(strokes: np.ndarray, size: int, rng: np.random.Generator) -> Image.Image:
    """Draw one jittered instance of a stroke pattern."""
    scale = max(1, size // 14)
    # strokes stay wider than the largest offset, so instances of a class overlap
    width = 2 * scale
    shift = rng.integers(-(scale // 2), scale // 2 + 1, size=2)
    jitter = rng.uniform(-0.25 * scale, 0.25 * scale, size=strokes.shape)
    points = strokes + jitter + np.tile(shift, 2)
    image = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(image)
    for x0, y0, x1, y1 in points:
        draw.line([(float(x0), float(y0)), (float(x1), float(y1))], fill=255, width=width)
    return image


def generate_synthetic_corpus(
    out_dir: str | Path,
    num_classes: int,
    examples_per_class: int,
    image_size: int,
    seed: int = 0,
    split_fractions: tuple[float, float, float] = DEFAULT_SPLIT_FRACTIONS,
) -> tuple[Path, DatasetManifest]:
    """
    Render the corpus and write its manifest.

    Output depends only on the arguments: the same seed gives a
    byte-identical tree.

    Returns:
        (root directory, manifest)
    """
    if image_size < MIN_SYNTHETIC_IMAGE_SIZE:
        raise ConfigurationError(
            f"image_size must be at least {MIN_SYNTHETIC_IMAGE_SIZE}, got {image_size}"
        )
    if num_classes < 1 or examples_per_class < 1:
        raise ConfigurationError(
            f"need at least one class and one example, got ({num_classes}, {examples_per_class})"
        )
    root = Path(out_dir)
    entries = []
    try:
        root.mkdir(parents=True, exist_ok=True)
        for c in range(num_classes):
            name = class_name(c)
            class_dir = root / name
            class_dir.mkdir(exist_ok=True)
            strokes = _prototype(derive_rng(seed, c), image_size)
            files = []
            for e in range(examples_per_class):
                path = class_dir / f"{e:03d}.png"
                render_glyph(strokes, image_size, derive_rng(seed, c, e)).save(path, format="PNG")
                files.append(ExampleFile(path=f"{name}/{path.name}", sha256=file_sha256(path)))
            entries.append(ClassEntry(name=name, files=files))
    except OSError as e:
        raise IngestionError(f"Failed to write synthetic corpus under {root}") from e

    n_train, n_val, _ = split_counts(num_classes, split_fractions)
    names = [entry.name for entry in entries]
    manifest = DatasetManifest(
        name="synthetic-glyphs",
        image_shape=(1, image_size, image_size),
        splits={
            MetaSplit.TRAIN: names[:n_train],
            MetaSplit.VAL: names[n_train : n_train + n_val],
            MetaSplit.TEST: names[n_train + n_val :],
        },
        classes=entries,
    )
    write_manifest(manifest, root)
    logger.info(
        "Synthetic corpus written: %s (%d classes x %d examples, %dpx, seed %d)",
        root,
        num_classes,
        examples_per_class,
        image_size,
        seed,
    )
    return root, manifest

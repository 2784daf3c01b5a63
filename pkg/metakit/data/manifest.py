"""
Dataset manifests: the explicit, versioned record of which classes belong
to meta-train, meta-val and meta-test, and which files make up each class.

File format (JSON, ``manifest.json`` at the dataset root)::

    {
      "format_version": 1,
      "name": "synthetic-glyphs",
      "image_shape": [1, 28, 28],
      "splits": {"train": ["glyph_0000", ...], "val": [...], "test": [...]},
      "classes": [
        {"name": "glyph_0000",
         "files": [{"path": "glyph_0000/000.png", "sha256": "ab12..."}, ...]},
        ...
      ]
    }

``path`` is relative to the dataset root. Class order in ``classes`` is
irrelevant; a split's class order (and hence its class ids) follows the
order of its ``splits`` list.
"""

from __future__ import annotations

import hashlib
from pathlib import Path, PurePosixPath, PureWindowsPath

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from metakit.config import IMAGE_EXTENSIONS, MANIFEST_FILENAME, MANIFEST_FORMAT_VERSION
from metakit.core.errors import ManifestError
from metakit.core.logging import get_logger
from metakit.data.models import MetaSplit

logger = get_logger(__name__)


class ExampleFile(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: str = Field(..., description="File path relative to the dataset root")
    sha256: str = Field(..., pattern=r"^[0-9a-f]{64}$", description="Hex SHA-256 of the file")

    @field_validator("path")
    @classmethod
    def _inside_root(cls, path: str) -> str:
        posix, windows = PurePosixPath(path), PureWindowsPath(path)
        if not path or posix.is_absolute() or windows.anchor:
            raise ValueError(f"file path must be relative to the dataset root: {path!r}")
        if ".." in posix.parts or ".." in windows.parts:
            raise ValueError(f"file path must stay inside the dataset root: {path!r}")
        return path


class ClassEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    files: list[ExampleFile] = Field(..., min_length=1)


class DatasetManifest(BaseModel):
    """Versioned class-split manifest with per-file checksums."""

    model_config = ConfigDict(frozen=True)

    format_version: int = Field(MANIFEST_FORMAT_VERSION, description="Manifest format version")
    name: str = Field("dataset", description="Human-readable dataset name")
    image_shape: tuple[int, int, int] = Field(
        ..., description="[channels, height, width] of every image"
    )
    splits: dict[MetaSplit, list[str]] = Field(
        ..., description="Meta-split → ordered class names"
    )
    classes: list[ClassEntry]

    @model_validator(mode="after")
    def _check_consistency(self) -> DatasetManifest:
        if self.format_version != MANIFEST_FORMAT_VERSION:
            raise ValueError(
                f"unsupported manifest version {self.format_version} "
                f"(expected {MANIFEST_FORMAT_VERSION})"
            )
        if any(extent < 1 for extent in self.image_shape):
            raise ValueError(f"image_shape must be positive, got {list(self.image_shape)}")

        names = [entry.name for entry in self.classes]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"classes listed more than once: {duplicates}")

        owner: dict[str, MetaSplit] = {}
        for split, members in self.splits.items():
            for class_name in members:
                if class_name in owner:
                    raise ValueError(
                        f"class {class_name!r} is listed in both "
                        f"{owner[class_name].value} and {split.value}"
                    )
                owner[class_name] = split

        known = set(names)
        unknown = sorted(set(owner) - known)
        if unknown:
            raise ValueError(f"splits reference classes without entries: {unknown}")
        unassigned = sorted(known - set(owner))
        if unassigned:
            raise ValueError(f"classes not assigned to any split: {unassigned}")
        return self

    def split_classes(self, split: MetaSplit | str) -> list[ClassEntry]:
        """Entries of *split* in manifest order."""
        by_name = {entry.name: entry for entry in self.classes}
        return [by_name[name] for name in self.splits.get(MetaSplit(split), [])]


# ------------------------------------------------------------------
# I/O helpers
# ------------------------------------------------------------------


def file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a manifest file (or ``<dir>/manifest.json``)."""
    source = Path(path)
    if source.is_dir():
        source = source / MANIFEST_FILENAME
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"Manifest not found or unreadable: {source}") from e
    try:
        manifest = DatasetManifest.model_validate_json(text)
    except ValidationError as e:
        raise ManifestError(f"Invalid manifest {source}: {e}") from e
    logger.info(
        "Manifest loaded: %s (%d classes, splits %s)",
        source,
        len(manifest.classes),
        {split.value: len(members) for split, members in manifest.splits.items()},
    )
    return manifest


def write_manifest(manifest: DatasetManifest, path: str | Path) -> Path:
    target = Path(path)
    if target.is_dir():
        target = target / MANIFEST_FILENAME
    try:
        target.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"Failed to write manifest: {target}") from e
    return target


def build_manifest(
    root: str | Path,
    splits: dict[MetaSplit, list[str]],
    image_shape: tuple[int, int, int],
    name: str = "dataset",
) -> DatasetManifest:
    """
    Manifest for an existing ``root/<class>/<files>`` tree.

    Every image file of every class named in *splits* is listed in sorted
    file-name order with its checksum.
    """
    base = Path(root)
    entries = []
    for class_name in (c for members in splits.values() for c in members):
        class_dir = base / class_name
        if not class_dir.is_dir():
            raise ManifestError(f"class directory not found: {class_dir}")
        files = [
            ExampleFile(path=f"{class_name}/{p.name}", sha256=file_sha256(p))
            for p in sorted(class_dir.iterdir())
            if p.suffix.lower() in IMAGE_EXTENSIONS
        ]
        entries.append(ClassEntry(name=class_name, files=files))
    return DatasetManifest(name=name, image_shape=image_shape, splits=splits, classes=entries)

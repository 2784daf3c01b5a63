"""
Class-indexed example stores.

A ClassStore is the pool of candidate classes for one meta-split: class ids
are dense ``0…C-1`` and ``get_example(class_id, index)`` is deterministic.
Stores are immutable after construction and safe to share between threads.

Hierarchy:
  ClassStore               — abstract contract
  ├── ArrayClassStore      — classes held as in-memory arrays
  ├── DirectoryClassStore  — PNG tree + manifest, decoded lazily and cached
  ├── TransformedClassStore — every example passed through one transform
  └── AugmentedClassStore  — Cartesian product of classes × (identity + transforms)

Usage:
    manifest = read_manifest(root)
    store = ingest_directory(root, manifest, MetaSplit.TRAIN)
    store = augment_classes(store, rotations(90, 180, 270))
"""

from __future__ import annotations

import hashlib
import io
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from metakit.config import DECODE_CACHE_SIZE
from metakit.core.errors import BoundsError, ContractError, IngestionError
from metakit.core.logging import get_logger
from metakit.data.manifest import DatasetManifest, ExampleFile
from metakit.data.models import MetaSplit
from metakit.data.transforms import Transform

logger = get_logger(__name__)


@dataclass(frozen=True, slots=True)
class ClassInfo:
    id: int
    name: str
    count: int


class ClassStore(ABC):
    """
    Abstract pool of classes.

    Public API:
      - classes                       → tuple[ClassInfo, ...], ids dense in order
      - num_classes                   → int
      - get_example(class_id, index)  → float64 array, channel-first, in [0, 1]
      - fingerprint()                 → SHA-256 over names and example contents
    """

    meta_split: MetaSplit

    @property
    @abstractmethod
    def classes(self) -> tuple[ClassInfo, ...]: ...

    @abstractmethod
    def _load(self, class_id: int, index: int) -> np.ndarray: ...

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def get_example(self, class_id: int, index: int) -> np.ndarray:
        if not 0 <= class_id < self.num_classes:
            raise BoundsError(f"class id {class_id} outside [0, {self.num_classes})")
        info = self.classes[class_id]
        if not 0 <= index < info.count:
            raise BoundsError(
                f"example {index} outside [0, {info.count}) for class {info.name!r}"
            )
        return self._load(class_id, index)

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for info in self.classes:
            digest.update(f"{info.id}:{info.name}:{info.count};".encode())
            for index in range(info.count):
                example = self._load(info.id, index)
                digest.update(str(example.shape).encode())
                digest.update(np.ascontiguousarray(example, dtype="<f8").tobytes())
        return digest.hexdigest()


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


# ------------------------------------------------------------------
# In-memory
# ------------------------------------------------------------------


class ArrayClassStore(ClassStore):
    """Classes given as ``{name: array[count, *input_shape]}`` in class-id order."""

    def __init__(
        self, arrays: dict[str, np.ndarray], meta_split: MetaSplit = MetaSplit.TRAIN
    ):
        self.meta_split = MetaSplit(meta_split)
        self._arrays = [_frozen(np.array(a, dtype=np.float64)) for a in arrays.values()]
        self._classes = tuple(
            ClassInfo(i, name, len(array))
            for i, (name, array) in enumerate(zip(arrays, self._arrays))
        )

    @property
    def classes(self) -> tuple[ClassInfo, ...]:
        return self._classes

    def _load(self, class_id: int, index: int) -> np.ndarray:
        return self._arrays[class_id][index]


# ------------------------------------------------------------------
# Directory (PNG tree + manifest)
# ------------------------------------------------------------------


def decode_image(data: bytes, channels: int, source: str) -> np.ndarray:
    """PNG bytes → ``[channels, H, W]`` float64 in [0, 1]."""
    try:
        with Image.open(io.BytesIO(data)) as image:
            image = image.convert("L" if channels == 1 else "RGB")
            pixels = np.asarray(image, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise IngestionError(f"undecodable image: {source}") from e
    if pixels.ndim == 2:
        pixels = pixels[None, :, :]
    else:
        pixels = np.transpose(pixels, (2, 0, 1))
    return np.ascontiguousarray(pixels)


class DirectoryClassStore(ClassStore):
    """
    One meta-split of a ``root/<class>/<files>`` tree described by a manifest.

    Images are decoded on first access and kept in an LRU cache.
    """

    def __init__(self, root: Path, manifest: DatasetManifest, meta_split: MetaSplit):
        self.root = root
        self.manifest = manifest
        self.meta_split = MetaSplit(meta_split)
        entries = manifest.split_classes(self.meta_split)
        self._files: list[list[ExampleFile]] = [entry.files for entry in entries]
        self._classes = tuple(
            ClassInfo(i, entry.name, len(entry.files)) for i, entry in enumerate(entries)
        )
        self._decode = lru_cache(maxsize=DECODE_CACHE_SIZE)(self._decode_file)

    @property
    def classes(self) -> tuple[ClassInfo, ...]:
        return self._classes

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.manifest.image_shape

    def _decode_file(self, relative: str) -> np.ndarray:
        path = self.root / relative
        try:
            data = path.read_bytes()
        except OSError as e:
            raise IngestionError(f"example file unreadable: {path}") from e
        pixels = decode_image(data, self.image_shape[0], str(path))
        if pixels.shape != tuple(self.image_shape):
            raise IngestionError(
                f"image {path} has shape {list(pixels.shape)}, "
                f"manifest declares {list(self.image_shape)}"
            )
        return _frozen(pixels)

    def _load(self, class_id: int, index: int) -> np.ndarray:
        return self._decode(self._files[class_id][index].path)


def ingest_directory(
    root: str | Path,
    manifest: DatasetManifest,
    meta_split: MetaSplit | str = MetaSplit.TRAIN,
    verify: bool = True,
) -> DirectoryClassStore:
    """
    Build the ClassStore of *meta_split* from a directory tree.

    With ``verify`` every file of the split is read once, its checksum
    compared with the manifest and its header checked for decodability.

    Raises:
        IngestionError: missing class directory, unreadable file, checksum
            mismatch or undecodable image; the message names the path.
    """
    base = Path(root)
    split = MetaSplit(meta_split)
    entries = manifest.split_classes(split)
    for entry in entries:
        class_dir = base / entry.name
        if not class_dir.is_dir():
            raise IngestionError(f"class directory not found: {class_dir}")
        if not verify:
            continue
        for example in entry.files:
            path = base / example.path
            try:
                data = path.read_bytes()
            except OSError as e:
                raise IngestionError(f"example file missing or unreadable: {path}") from e
            if hashlib.sha256(data).hexdigest() != example.sha256:
                raise IngestionError(f"checksum mismatch: {path}")
            try:
                with Image.open(io.BytesIO(data)) as image:
                    image.verify()
            except (UnidentifiedImageError, OSError, SyntaxError) as e:
                raise IngestionError(f"undecodable image: {path}") from e

    store = DirectoryClassStore(base, manifest, split)
    logger.info(
        "Ingested %s split of %s: %d classes, %d examples",
        split.value,
        base,
        store.num_classes,
        sum(info.count for info in store.classes),
    )
    return store


# ------------------------------------------------------------------
# Derived stores
# ------------------------------------------------------------------


class TransformedClassStore(ClassStore):
    """Same classes as *base*, every example passed through *transform* on access."""

    def __init__(self, base: ClassStore, transform: Transform):
        self.base = base
        self.transform = transform
        self.meta_split = base.meta_split

    @property
    def classes(self) -> tuple[ClassInfo, ...]:
        return self.base.classes

    def _load(self, class_id: int, index: int) -> np.ndarray:
        return self.transform(self.base._load(class_id, index))


class AugmentedClassStore(ClassStore):
    """
    Class pool extended with transformed variants.

    Class id ``t * C + c`` is base class ``c`` under variant ``t``, where
    variant 0 is the identity and variant ``t >= 1`` is ``transforms[t-1]``.
    """

    def __init__(self, base: ClassStore, transforms: Sequence[Transform]):
        if not transforms:
            raise ContractError("augment_classes needs at least one transform")
        self.base = base
        self.transforms = tuple(transforms)
        self.meta_split = base.meta_split
        base_classes = base.classes
        variants: list[ClassInfo] = list(base_classes)
        for t, transform in enumerate(self.transforms, start=1):
            variants.extend(
                ClassInfo(t * len(base_classes) + info.id, f"{info.name}/{transform.name}", info.count)
                for info in base_classes
            )
        self._classes = tuple(variants)

    @property
    def classes(self) -> tuple[ClassInfo, ...]:
        return self._classes

    def _load(self, class_id: int, index: int) -> np.ndarray:
        variant, base_id = divmod(class_id, self.base.num_classes)
        example = self.base._load(base_id, index)
        if variant == 0:
            return example
        return self.transforms[variant - 1](example)


def augment_classes(store: ClassStore, transforms: Sequence[Transform]) -> ClassStore:
    """Cartesian product of *store*'s classes with (identity + *transforms*)."""
    augmented = AugmentedClassStore(store, transforms)
    logger.info(
        "Augmented class pool: %d → %d classes (%s)",
        store.num_classes,
        augmented.num_classes,
        ", ".join(t.name for t in augmented.transforms),
    )
    return augmented

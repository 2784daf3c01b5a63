"""
Deterministic input → input transforms for channel-first images.

Class-level transforms (``Rotation``) turn one class into a new class when
passed to ``augment_classes``. Example-level transforms (``ResizeNearest``,
``ReplicateChannels``) reshape every example of a store so synthetic
grayscale glyphs can stand in for RGB images of any size.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

from metakit.core.errors import ContractError, ShapeError


class Transform(ABC):
    """Pure map on a ``[channels, height, width]`` array."""

    @property
    @abstractmethod
    def name(self) -> str: ...

    @abstractmethod
    def __call__(self, image: np.ndarray) -> np.ndarray: ...

    def __repr__(self) -> str:
        return self.name


class Rotation(Transform):
    """Rotation by a multiple of 90 degrees (counter-clockwise)."""

    def __init__(self, degrees: int):
        if degrees % 90:
            raise ContractError(f"rotation must be a multiple of 90 degrees, got {degrees}")
        self.degrees = degrees % 360

    @property
    def name(self) -> str:
        return f"rot{self.degrees}"

    def __call__(self, image: np.ndarray) -> np.ndarray:
        height, width = image.shape[-2:]
        if height != width:
            raise ShapeError(f"cannot rotate a non-square image of size {height}x{width}")
        return np.ascontiguousarray(np.rot90(image, k=self.degrees // 90, axes=(-2, -1)))


def rotations(*degrees: int) -> list[Rotation]:
    """``rotations(90, 180, 270)`` → three Rotation transforms."""
    return [Rotation(d) for d in degrees]


class ResizeNearest(Transform):
    """Nearest-neighbour resize of the spatial axes to ``size × size``."""

    def __init__(self, size: int):
        if size < 1:
            raise ContractError(f"resize target must be positive, got {size}")
        self.size = size

    @property
    def name(self) -> str:
        return f"resize{self.size}"

    def __call__(self, image: np.ndarray) -> np.ndarray:
        height, width = image.shape[-2:]
        rows = (np.arange(self.size) * height) // self.size
        cols = (np.arange(self.size) * width) // self.size
        return np.ascontiguousarray(image[..., rows[:, None], cols[None, :]])


class ReplicateChannels(Transform):
    """Repeat a single-channel image ``channels`` times."""

    def __init__(self, channels: int):
        if channels < 1:
            raise ContractError(f"channel count must be positive, got {channels}")
        self.channels = channels

    @property
    def name(self) -> str:
        return f"channels{self.channels}"

    def __call__(self, image: np.ndarray) -> np.ndarray:
        if image.shape[0] == self.channels:
            return image
        if image.shape[0] != 1:
            raise ShapeError(
                f"can only replicate single-channel images, got {image.shape[0]} channels"
            )
        return np.repeat(image, self.channels, axis=0)


class Compose(Transform):
    def __init__(self, transforms: Sequence[Transform]):
        self.transforms = tuple(transforms)

    @property
    def name(self) -> str:
        return "+".join(t.name for t in self.transforms) or "identity"

    def __call__(self, image: np.ndarray) -> np.ndarray:
        for transform in self.transforms:
            image = transform(image)
        return image

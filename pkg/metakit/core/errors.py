"""
Exception hierarchy.

Every error raised by the toolkit derives from ``MetaKitError`` and from the
closest builtin, so callers can catch either.
"""


class MetaKitError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(MetaKitError, ValueError):
    """Structural mismatch between shapes, extents or value counts."""


class ContractError(MetaKitError, ValueError):
    """A caller broke an operation's precondition."""


class MissingParameterError(ContractError, KeyError):
    """A substituted ParamSet lacks a path the module consumes."""

    def __init__(self, path: str):
        super().__init__(f"missing parameter {path}")
        self.path = path

    def __str__(self) -> str:
        return self.args[0]


class ConfigurationError(MetaKitError, ValueError):
    """Invalid combination of settings (pool too small, split mismatch...)."""


class BoundsError(MetaKitError, IndexError):
    """Index outside the valid range of a collection."""


class IngestionError(MetaKitError, OSError):
    """A file or directory could not be ingested."""


class ManifestError(IngestionError):
    """A dataset manifest is malformed or inconsistent with the tree."""


class CollationError(MetaKitError, ValueError):
    """Tasks in a batch cannot be stacked into dense arrays."""


class InputValidationError(MetaKitError, ValueError):
    """Values outside an operation's domain (e.g. a class index out of range)."""


class ParameterShapeError(ShapeError):
    """A substituted parameter has the wrong shape."""

    def __init__(self, path: str, expected: tuple[int, ...], actual: tuple[int, ...]):
        super().__init__(
            f"parameter {path}: expected shape {list(expected)}, got {list(actual)}"
        )
        self.path = path
        self.expected = expected
        self.actual = actual

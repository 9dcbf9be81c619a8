"""Typed errors shared across the engine.

Each class corresponds to one failure mode surfaced by the public API, so
callers (and the HTTP layer) can map them to precise responses instead of
string-matching messages.
"""


class OutfitterError(Exception):
    """Base class for all engine errors."""


class DimensionMismatchError(OutfitterError):
    """Vector or file dimensionality disagrees with the expected dim."""


class UnknownCategoryError(OutfitterError):
    """Category label outside the fixed ten-label set."""


class DuplicateIdError(OutfitterError):
    """The same item id appears twice within one input."""


class IdSetMismatchError(OutfitterError):
    """Catalog and embedding files disagree on the set of item ids."""


class MalformedRecordError(OutfitterError):
    """A record could not be parsed (bad JSON, bad header, zero vector)."""


class UnknownItemError(OutfitterError):
    """Lookup of an item id that is not in the catalog."""


class InsufficientCategoryError(OutfitterError):
    """A category does not hold enough items to satisfy the request."""


class EmptyCategoryError(OutfitterError):
    """A requested target category holds no items at all."""


class EmptyStoreError(OutfitterError):
    """Index build attempted over a store with zero rows."""


class ConfigError(OutfitterError):
    """Invalid configuration value or combination."""


class KOutOfRangeError(OutfitterError):
    """Requested k outside [1, store count]."""


class StoreMismatchError(OutfitterError):
    """Index and store contents do not match (content hash check)."""


class VersionMismatchError(OutfitterError):
    """Persisted blob carries an unsupported format version."""


class TruncatedInputError(OutfitterError):
    """Persisted blob ended before its declared payload."""


class EmptyNegativesError(OutfitterError):
    """A positive sample arrived with an empty negative set."""


class NonFiniteLossError(OutfitterError):
    """Training produced a NaN or infinite loss."""


class InsufficientDataError(OutfitterError):
    """Too few samples to run the requested training or loss."""


class EmptyOutfitError(OutfitterError):
    """An outfit with no items cannot be split into roles."""


class DuplicateCategoryError(OutfitterError):
    """An outfit holds more than one item of the same category."""


class RefInTargetsError(OutfitterError):
    """Inference targets must exclude the reference item's category."""

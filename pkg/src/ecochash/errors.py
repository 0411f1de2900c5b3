"""Exception types shared across the library."""


class EcocHashError(Exception):
    """Base class for all library errors."""


class DimensionError(EcocHashError, ValueError):
    """Operands have incompatible lengths or dimensionalities."""


class CodebookExhaustedError(EcocHashError, RuntimeError):
    """The codeword pool is empty: more labels arrived than were provisioned.

    Regenerate the codebook with a larger capacity and retrain.
    """


class UnknownLabelError(EcocHashError, KeyError):
    """A label was looked up before it was ever observed."""


class DuplicateIdError(EcocHashError, ValueError):
    """An instance id was inserted into an index twice."""


class ConsistencyError(EcocHashError, RuntimeError):
    """Model and index (or step report) widths are out of sync."""


class UndefinedAPError(EcocHashError, ValueError):
    """Average precision is undefined: the query has no relevant items."""


class FormatError(EcocHashError, ValueError):
    """A serialized file is malformed or has an unsupported version."""

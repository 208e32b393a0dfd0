"""Error hierarchy shared by all sba modules.

Every failure mode raised on purpose derives from SbaError so callers (and
the CLI) can catch one base class and report the concrete class name.
"""


class SbaError(Exception):
    """Base class for all sba errors."""


class FormatError(SbaError):
    """File does not conform to the expected on-disk format."""


class CorruptError(SbaError):
    """File header and payload disagree (truncation, length mismatch)."""


class DuplicateError(SbaError):
    """Duplicate image id within a manifest."""


class ShapeError(SbaError):
    """Dimension mismatch between operands."""


class EmptyDatasetError(SbaError):
    """An operation that needs at least one record got an empty dataset."""


class ParamError(SbaError):
    """Parameter outside its valid range."""


class RankError(SbaError):
    """Data rank too low for the requested number of components."""


class UndefinedError(SbaError):
    """Metric undefined for this input (e.g. a query with no positives)."""


class IncompleteError(SbaError):
    """Evaluation input is missing required entries."""

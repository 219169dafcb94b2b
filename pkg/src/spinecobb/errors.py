"""Exception hierarchy.

Every error carries a short ``kind`` string; the CLI reports it verbatim in its
JSON error objects, so these strings are part of the external contract.
"""


class SpineCobbError(Exception):
    kind = "error"


class MaskFormatError(SpineCobbError, ValueError):
    """Malformed image file. ``offset`` is the byte offset of the problem."""

    kind = "format"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnsupportedFormatError(SpineCobbError, ValueError):
    kind = "unsupported-format"


class ShapeError(SpineCobbError, ValueError):
    kind = "shape"


class SizeError(SpineCobbError, ValueError):
    kind = "size"


class DegenerateGeometryError(SpineCobbError, ValueError):
    kind = "degenerate"


class AmbiguousOrderingError(SpineCobbError, ValueError):
    kind = "ambiguous-ordering"


class EmptySpineError(SpineCobbError, ValueError):
    kind = "empty-spine"


class InsufficientVertebraeError(SpineCobbError, ValueError):
    kind = "insufficient-vertebrae"


class DomainError(SpineCobbError, ValueError):
    kind = "domain"


class EmptyBoundaryError(SpineCobbError, ValueError):
    kind = "empty-boundary"


class SpecInfeasibleError(SpineCobbError, ValueError):
    kind = "spec-infeasible"

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ConfigError(SpineCobbError, ValueError):
    kind = "config"

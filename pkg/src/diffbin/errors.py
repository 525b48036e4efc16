"""Exception hierarchy shared by all diffbin modules."""


class DiffBinError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(DiffBinError, ValueError):
    pass


class DegenerateGeometry(DiffBinError, ValueError):
    """Polygon has too few distinct vertices or (near) zero area."""


class DimensionError(DiffBinError, ValueError):
    pass


class RangeError(DiffBinError, ValueError):
    pass


class FormatError(DiffBinError):
    """Malformed file contents (FMAP payloads, annotation or detection lines)."""


class InputError(DiffBinError):
    """Inputs that are individually valid but inconsistent with each other."""


class PlacementError(DiffBinError):
    """Synthetic scene generation could not place all regions."""

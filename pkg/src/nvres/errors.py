"""Exception types shared across the package."""


class OutOfRangeError(ValueError):
    """A query fell outside the domain covered by a grid or calibration table."""

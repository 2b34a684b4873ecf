"""Exception types shared across the package."""


class FormatError(ValueError):
    """A binary file does not match its declared layout.

    Messages name the byte offset at which parsing failed.
    """


class UnsupportedFormatError(FormatError):
    """The file is recognizable but uses an unsupported variant or version."""


class InsufficientDataError(ValueError):
    """Not enough usable input to satisfy a construction request."""


class StaleTreeError(RuntimeError):
    """A cluster tree does not belong to the dictionary it is used with."""


class DegenerateOperatorError(ValueError):
    """An observation operator annihilates every dictionary atom."""

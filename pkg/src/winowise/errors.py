"""Exception hierarchy shared across winowise."""


class WinowiseError(Exception):
    pass


class ShapeError(WinowiseError, ValueError):
    pass


class TensorFormatError(WinowiseError, ValueError):
    """Malformed tensor container; ``offset`` is the byte where parsing failed."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnsupportedParameterError(WinowiseError, ValueError):
    pass


class UnsupportedWorkloadError(WinowiseError, ValueError):
    pass


class ConfigurationError(WinowiseError, ValueError):
    pass


class InfeasibleMappingError(WinowiseError):
    """A layer cannot be tiled into the on-chip memories.

    ``capacity`` names the memory whose limit was violated.
    """

    def __init__(self, capacity, message):
        super().__init__(f"{capacity}: {message}")
        self.capacity = capacity

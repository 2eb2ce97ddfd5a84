"""Exception types raised by the simulation library."""


class RisDipError(Exception):
    """Base class for all library errors."""


class NotHermitian(RisDipError, ValueError):
    pass


class IndefiniteMatrix(RisDipError, ValueError):
    pass


class SingularMatrix(RisDipError, ValueError):
    pass


class InvalidDistance(RisDipError, ValueError):
    pass


class NonUnitModulus(RisDipError, ValueError):
    pass


class TooManyUsers(RisDipError, ValueError):
    pass


class BadRoot(RisDipError, ValueError):
    pass


class TooFewPilots(RisDipError, ValueError):
    pass


class ShapeMismatch(RisDipError, ValueError):
    pass


class ShapeError(RisDipError, ValueError):
    pass


class SingularPattern(RisDipError, ValueError):
    pass


class PatternMismatch(RisDipError, ValueError):
    pass


class ZeroReference(RisDipError, ValueError):
    pass


class StaleActivations(RisDipError, RuntimeError):
    pass


class ConfigError(RisDipError, ValueError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, key, lineno):
        super().__init__(f"line {lineno}: unknown key {key!r}")
        self.key = key
        self.lineno = lineno

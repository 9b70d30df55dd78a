"""
Exception hierarchy. The CLI maps each class to an exit code.
"""


class TorusentError(Exception):
    pass


class ConfigError(TorusentError, ValueError):
    """Invalid configuration or argument. Exit code 1."""


class InvariantViolation(TorusentError):
    """
    A numerical invariant failed. `name` identifies the invariant so that
    reports and exit messages can point at it; `value` is the offending
    measurement (a deviation, a drift, ...), if there is one.
    """

    def __init__(self, name, message, value=None):
        super().__init__("{}: {}".format(name, message))
        self.name = name
        self.value = value


class ResourceCeilingError(TorusentError):
    """A memory or evaluation ceiling would be exceeded. Exit code 3."""


class DegenerateFitError(ConfigError):
    """Every sample in a fit window is numerically zero."""

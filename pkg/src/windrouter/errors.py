"""Exception types shared across the package."""


class WindrouterError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(WindrouterError):
    """A file could not be parsed (malformed JSON, broken LP file, ...)."""


class SchemaError(WindrouterError):
    """A document parsed but does not match the documented schema."""


class InvariantError(WindrouterError):
    """A value violates a documented data invariant."""


class InfeasibleError(WindrouterError):
    """The requested quota cannot be met by any admissible selection."""


class BudgetError(WindrouterError):
    """An exact computation was requested beyond its configured size budget."""


class CorrespondenceError(WindrouterError):
    """A layered-graph solution violates the flat/layered correspondence."""


class UnsupportedModelError(WindrouterError):
    """An unknown model name was passed to the LP exporter."""


# Write failures surface as the built-in OSError; exported under this
# alias so callers can catch the documented name.
IoError = OSError

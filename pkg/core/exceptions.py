"""Exception hierarchy shared by every polarlab app."""


class PolarlabError(Exception):
    """Base class for all polarlab failures."""


class ParameterError(PolarlabError, ValueError):
    """A model, grid or domain parameter is outside its admissible range."""


class SchedulerError(PolarlabError):
    """The scheduler cannot operate on the given configuration."""


class NumericalInstability(PolarlabError):
    """The density solver blew up; `step` is the offending Euler step."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class BracketError(PolarlabError):
    """Both ends of a bisection bracket fall in the same regime."""


class ConfigError(PolarlabError):
    """An experiment config failed validation.

    `errors` is a list of ``(path, line, message)`` triples; `line` may be None
    when the key does not occur literally in the source text.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__('\n'.join(self.format_entry(*entry) for entry in self.errors))

    @staticmethod
    def format_entry(path, line, message):
        where = f' (line {line})' if line else ''
        return f'{path}: {message}{where}'

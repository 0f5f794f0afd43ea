"""Exception taxonomy shared across the package.

Exit-code mapping for the CLI lives in cli.py; library code only raises.
"""


class SftlabError(Exception):
    """Base class for all package errors."""


class InputError(SftlabError):
    """Malformed user input: bad matrix file, inadmissible word, bad literal."""


class StructuralError(SftlabError):
    """The object exists but lacks the structure an operation requires
    (reducible matrix where irreducibility is needed, and so on)."""


class PreconditionError(SftlabError):
    """A stated hypothesis of a checker was violated by the supplied data."""


class UnsupportedError(SftlabError):
    """Combination of arguments that the implementation deliberately rejects."""


class BudgetError(SftlabError):
    """An enumeration would exceed the configured work budget."""

"""Exception hierarchy.

Every failure raised by the library derives from :class:`MonovoteError`.
The CLI maps :class:`FormatError` to exit code 3 and :class:`ValidationError`
to exit code 4; everything else falls under validation as well.
"""

from __future__ import annotations


class MonovoteError(Exception):
    """Base class for all library errors."""


class FormatError(MonovoteError):
    """Malformed input text. Carries the position of the offending token."""

    def __init__(self, message, *, path=None, line=None, column=None):
        self.message = message
        self.path = path
        self.line = line
        self.column = column
        super().__init__(self._render())

    def _render(self):
        where = []
        if self.path is not None:
            where.append(str(self.path))
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.column is not None:
            where.append(f"col {self.column}")
        return f"{', '.join(where)}: {self.message}" if where else self.message

    def at(self, *, path=None, line=None):
        """Return a copy located in ``path``/``line`` (keeps existing values)."""
        return type(self)(
            self.message,
            path=self.path if self.path is not None else path,
            line=self.line if self.line is not None else line,
            column=self.column,
        )


class ParseError(FormatError):
    """A token could not be converted to the expected type."""


class ValidationError(MonovoteError):
    """Values parsed fine but violate a domain invariant."""

    def __init__(self, message, *, path=None, line=None):
        self.message = message
        self.path = path
        self.line = line
        prefix = ", ".join(p for p in (str(path) if path is not None else None,
                                       f"line {line}" if line is not None else None) if p)
        super().__init__(f"{prefix}: {message}" if prefix else message)

    def at(self, *, path=None, line=None):
        return type(self)(
            self.message,
            path=self.path if self.path is not None else path,
            line=self.line if self.line is not None else line,
        )


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class BehindCameraError(DomainError):
    """A point with Z <= 0 was projected."""


class DegenerateBoxError(DomainError):
    """A 2D box with zero or negative height was used for depth reasoning."""


class EmptyStatsError(ValidationError):
    """A statistic was requested over an empty selection."""


class MissingClassError(ValidationError):
    """A class is absent from a prior table or a corpus."""


class ZeroMassError(DomainError):
    """Vote maps sum to zero and cannot be normalized."""


class ShapeError(ValidationError):
    """Array shapes disagree."""


class UninitializedHeadError(ValidationError):
    """The linear voting head was used before fitting."""


class DegenerateSampleError(ValidationError):
    """Too few samples, or zero variance along an axis."""


class NonConvergenceError(MonovoteError):
    """Iterative fit failed to decrease its objective."""

    def __init__(self, message, trace=()):
        self.trace = list(trace)
        super().__init__(message)


class SingularSystemError(MonovoteError):
    """Least-squares system is rank deficient and unregularized."""

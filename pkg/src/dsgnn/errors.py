"""Exception hierarchy shared across the package.

User-facing failures (bad files, bad configs, bad geometry in inputs)
derive from UserInputError; violations of internal contracts derive from
InternalError. The CLI maps the former to exit code 1 and the latter to 2.
"""


class DsgnnError(Exception):
    pass


class UserInputError(DsgnnError):
    pass


class InternalError(DsgnnError):
    pass


class DegenerateLatticeError(UserInputError):
    """Lattice determinant at or below the 1e-8 A^3 floor."""


class ParseError(UserInputError):
    """Malformed structure or dataset file; message carries line numbers."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownElementError(UserInputError):
    """Atomic number outside [1, 118] or unrecognized element symbol."""


class EmptyGraphError(UserInputError):
    """No atom has any neighbor within the edge cutoff."""


class ZeroVectorError(InternalError):
    """Angle requested between vectors with near-zero norm."""


class OutOfRangeError(UserInputError):
    """Scalar input outside its documented domain (e.g. distance > cutoff)."""


class ShapeMismatchError(InternalError):
    """Tensor operands with incompatible shapes."""


class NonFiniteTensorError(InternalError):
    """A forward op produced NaN or Inf."""


class GraphConsumedError(InternalError):
    """backward() called twice on the same recorded graph."""


class DataError(UserInputError):
    """Dataset record violates an invariant (non-finite target, bad shapes)."""


class DivergedError(DsgnnError):
    """Training loss became non-finite."""


class GenerationFailedError(DsgnnError):
    """Synthetic crystal generator exhausted its retry budget."""


class ConfigError(UserInputError):
    """Run configuration violates a cross-field invariant."""


class CheckpointError(UserInputError):
    """Checkpoint unreadable or incompatible with the requested config."""

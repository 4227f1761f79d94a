"""Exception hierarchy shared across the library."""


class AnisodiffError(Exception):
    """Base class for every error raised by this package."""


# --- graph construction / validation ---------------------------------------

class GraphValidationError(AnisodiffError, ValueError):
    """A graph failed construction-time validation."""


class IndexOutOfRangeError(GraphValidationError):
    """An edge endpoint is not a valid node index."""


class SelfLoopError(GraphValidationError):
    """An edge connects a node to itself."""


class IsolatedNodeError(GraphValidationError):
    """A node has degree zero; the degree matrix would be singular."""


class FeatureShapeMismatchError(GraphValidationError):
    """The feature matrix does not have one row per node."""


# --- dense linear algebra ---------------------------------------------------

class NotSymmetricError(AnisodiffError, ValueError):
    """Input matrix is not symmetric within tolerance."""


class ConvergenceFailureError(AnisodiffError, RuntimeError):
    """The eigensolver exceeded its iteration budget."""


class NotPositiveDefiniteError(AnisodiffError, ValueError):
    """Cholesky factorization hit a nonpositive pivot."""


class DimensionTooLargeError(AnisodiffError, ValueError):
    """Matrix exceeds the desk-scale cap of the test oracle."""


# --- spectral decomposition ---------------------------------------------------

class DisconnectedGraphError(AnisodiffError, ValueError):
    """Spectral operations require a connected graph."""


class BandwidthOutOfRangeError(AnisodiffError, ValueError):
    """Requested eigenpair count is outside [1, n], or too small for the use."""


# --- diffusion ----------------------------------------------------------------

class NonFiniteInputError(AnisodiffError, ValueError):
    """Input contains NaN or Inf."""


class SolverFailureError(AnisodiffError, RuntimeError):
    """Internal linear solve failed; should not happen for t > 0."""


class GraphMismatchError(AnisodiffError, ValueError):
    """Operands were built from different graphs (dimension disagreement)."""


class StateMismatchError(AnisodiffError, ValueError):
    """Saved forward state is incompatible with the backward call."""


# --- anisotropic operators ------------------------------------------------------

class DimensionMismatchError(AnisodiffError, ValueError):
    """Operator and operand shapes disagree."""


class NonPositiveDeltaError(AnisodiffError, ValueError):
    """Degree-scaler normalizer must be positive."""


# --- model / tape ----------------------------------------------------------------

class WidthMismatchError(AnisodiffError, ValueError):
    """Layer widths are inconsistent with the parameter shapes."""


class NonFiniteActivationError(AnisodiffError, RuntimeError):
    """A forward intermediate diverged to NaN/Inf."""


class TapeConsumedError(AnisodiffError, RuntimeError):
    """backward() was called twice on the same tape."""


class LengthMismatchError(AnisodiffError, ValueError):
    """Prediction and target vectors have different lengths."""


# --- harness -----------------------------------------------------------------------

class DatasetParseError(AnisodiffError, ValueError):
    """Dataset file failed to parse; carries line/offset context."""

    def __init__(self, message, *, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class ConfigMismatchError(AnisodiffError, ValueError):
    """Checkpoint configuration is incompatible with the dataset."""


class DivergenceDetectedError(AnisodiffError, RuntimeError):
    """Training loss became non-finite; aborted with last good checkpoint."""

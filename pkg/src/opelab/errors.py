"""Exception types raised across the package."""


class OpeLabError(Exception):
    """Base class for all errors raised by opelab."""


class NotPositiveDefinite(OpeLabError):
    """A Cholesky pivot fell below the positivity threshold."""


class NonConvergence(OpeLabError):
    """An iterative routine exhausted its iteration budget."""


class InvalidStage(OpeLabError, IndexError):
    """A stage index outside ``1..H`` was requested."""


class DegenerateCoverage(OpeLabError):
    """The behavior data does not cover the feature space (kappa <= 0)."""


class StageMismatch(OpeLabError):
    """Two datasets that must be stage-aligned disagree on (H, K)."""


class OddK(OpeLabError, ValueError):
    """Half-splitting requires an even number of transitions per stage."""


class OutOfRange(OpeLabError, ValueError):
    """An argument lies outside its admissible range."""


class InvalidMDP(OpeLabError, ValueError):
    """A model violates the linear MDP conditions."""


class ConfigError(OpeLabError, ValueError):
    """A sweep or CLI configuration document is malformed."""

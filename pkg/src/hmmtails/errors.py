"""Exception hierarchy.

Each module has one base class; the concrete subclasses name the failure.
The CLI maps the bases onto exit codes (see ``hmmtails.cli``).
"""

from __future__ import annotations


class HmmTailsError(Exception):
    pass


# -- model -------------------------------------------------------------------

class ModelError(HmmTailsError):
    pass


class BadChain(ModelError):
    pass


class BadExponent(ModelError):
    pass


class BadLaw(ModelError):
    pass


class ModelFileError(ModelError):
    """Validation failure in a model/config document, located by JSON path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


# -- spectral ----------------------------------------------------------------

class SpectralError(HmmTailsError):
    pass


class DegenerateStationary(SpectralError):
    pass


class NoConvergence(SpectralError):
    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        self.bracket = bracket
        super().__init__(message)


class NoKestenExponent(SpectralError):
    pass


class NotContracting(SpectralError):
    pass


class NumericalInconsistency(SpectralError):
    pass


class SingularSystem(SpectralError):
    pass


class HypothesisViolated(SpectralError):
    """A theorem was asked for outside its hypotheses (e.g. signed M in the positive-M formula)."""


# -- simulate ----------------------------------------------------------------

class SimError(HmmTailsError):
    pass


class Diverged(SimError):
    pass


class NotCChain(SimError):
    pass


class BlockOverflow(SimError):
    pass


# -- estimate ----------------------------------------------------------------

class EstimateError(HmmTailsError):
    pass


class NoSamples(EstimateError):
    pass


class DegenerateOrderStats(EstimateError):
    pass


class ThinTail(EstimateError):
    pass

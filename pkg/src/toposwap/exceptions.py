"""Exception types raised across the package."""


class CyclicGraphError(ValueError):
    """The graph has a directed cycle, so no topological order exists."""


class CyclicProbeError(CyclicGraphError):
    """A probe edge added during a sort update closed a cycle."""


class NotADagError(ValueError):
    pass


class NegativeEntryError(ValueError):
    pass


class SpectralRadiusError(ValueError):
    """``I - B`` is not a nonsingular M-matrix (spectral radius of B >= 1)."""


class ZeroResidualError(ValueError):
    pass


class NonBinaryDataError(ValueError):
    pass


class SingularTruthError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


class TooLargeError(ValueError):
    pass

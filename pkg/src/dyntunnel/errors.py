"""Exception and warning types shared across the package."""


class DynTunnelError(Exception):
    """Base class for computation errors raised by this package."""


class ZeroPump(DynTunnelError, ValueError):
    """All pump amplitudes a_n E0 vanish, so the pump mode is undefined."""


class ZeroCoupling(DynTunnelError):
    """The effective coupling is zero and the pump-mode decay rate is undefined."""


class SingularMatrix(DynTunnelError):
    """The coupling matrix could not be inverted."""


class StiffnessFailure(DynTunnelError):
    """The implicit integrator failed to meet its tolerance."""


class DivergentSeries(DynTunnelError):
    """Multiple-interference partial sums grow instead of converging (G >= 1)."""


class NoRoot(DynTunnelError):
    """The measured efficiency cannot be produced by any admissible G."""


class InvalidOverlap(DynTunnelError, ValueError):
    """Pump-mode overlap factor beta_p must be positive."""


class MaxBouncesExceeded(DynTunnelError):
    """A ray did not escape within the allowed number of bounces."""


class GeometryError(DynTunnelError, ValueError):
    """Invalid cavity boundary or a failed boundary intersection."""


class AllConfined(DynTunnelError):
    """No ray of the bundle escaped."""


class OverdampedWarning(UserWarning):
    """|g_n| / gamma_n exceeds 0.1; the weak-coupling picture may not hold."""


class DegenerateRates(UserWarning):
    """Two chaotic decay rates coincide; the secular pole structure collapses."""


class AmbiguousRoot(UserWarning):
    """Two admissible values of G reproduce the measured efficiency."""

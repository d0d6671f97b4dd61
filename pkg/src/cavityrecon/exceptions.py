"""Exception types raised across the package."""


class ReconError(Exception):
    """Base class for all package errors."""

    code = "error"


class DimensionError(ReconError, ValueError):
    code = "invalid-dimension"


class DegenerateStateError(ReconError, ValueError):
    code = "degenerate-state"


class UnphysicalStateError(ReconError, ValueError):
    code = "unphysical-state"


class TruncationError(ReconError, ValueError):
    """Fock truncation too small for the requested operation."""

    code = "truncation-unsafe"


class SamplingError(ReconError, ValueError):
    """Inversion-trace sampling too coarse for the requested photon cutoff."""

    code = "nyquist"


class ConfigError(ReconError, ValueError):
    code = "config"


class GridError(ReconError):
    """One or more phase-space points failed; ``failures`` holds ``(index, beta, message)``."""

    code = "grid"

    def __init__(self, failures):
        self.failures = list(failures)
        head = "; ".join(f"#{i} beta={b}: {msg}" for i, b, msg in self.failures[:3])
        more = "" if len(self.failures) <= 3 else f" (+{len(self.failures) - 3} more)"
        super().__init__(f"{len(self.failures)} point(s) failed: {head}{more}")

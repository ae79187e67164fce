"""Exceptions raised by the laboratory services."""


class ThermolimError(Exception):
    """Base class for every error the services raise on purpose."""


class GeometryError(ThermolimError, ValueError):
    """Invalid geometric input (degenerate boxes, uncovered supports, undefined eta)."""


class GuardViolation(ThermolimError, ValueError):
    """A scale parameter falls outside the guard range of an operation."""


class ContainmentError(ThermolimError, ValueError):
    """A subdomain is not contained in its parent with the required margin."""


class RegularityError(ThermolimError):
    """A domain sequence fails its regularity or diameter-ratio precondition."""


class ModelError(ThermolimError, ValueError):
    """An energy model cannot evaluate or decompose the requested domain."""


class ExtrapolationError(ThermolimError):
    """Finite-size energies do not settle into an extrapolable sequence."""


class RecordFormatError(ThermolimError, ValueError):
    """A results file line cannot be parsed."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class ConfigError(ThermolimError, ValueError):
    """A run configuration failed validation."""

    def __init__(self, diagnostics: list):
        self.diagnostics = diagnostics
        reasons = "; ".join(f"{d.field}: {d.reason}" for d in diagnostics)
        super().__init__(f"invalid configuration: {reasons}")

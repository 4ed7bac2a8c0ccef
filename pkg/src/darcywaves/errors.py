"""Exception types shared across the solver modules."""


class WavesError(Exception):
    """Base class for all solver errors."""


class OrderTooHigh(WavesError):
    """Requested derivative order exceeds the supported range."""


class SeriesDiverging(WavesError):
    """Expansion terms grew for several consecutive orders; surface too steep."""


class SeparationViolated(WavesError):
    """Free surface came closer to the bottom than the configured margin."""


class SolverStalled(WavesError):
    """Iterative elliptic solve plateaued above its tolerance."""


class MeanNotZero(WavesError):
    """Operand must have zero average over the torus."""


class ZeroInput(WavesError):
    """Operation undefined for an identically zero field."""


class NoConvergence(WavesError):
    """Krylov iteration exhausted its iteration budget."""

    def __init__(self, msg, iterations=None):
        super().__init__(msg)
        self.iterations = iterations


class BallExit(WavesError):
    """Fixed-point iterate left the admissible ball."""


class NoContraction(WavesError):
    """Fixed-point iteration is not contracting (divergent trace)."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = list(trace) if trace is not None else []


class MaxIterations(WavesError):
    """Fixed-point iteration hit its iteration cap before converging."""


class StepRejected(WavesError):
    """Time step rejected by the norm-growth safeguard."""


class MissingFile(WavesError):
    """Referenced input file does not exist."""


class SchemaViolation(WavesError):
    """Configuration failed validation; carries all key paths at fault."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.violations)
        super().__init__(f"invalid config: {lines}")

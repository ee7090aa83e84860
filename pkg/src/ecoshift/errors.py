"""Exception types shared across the package."""


class EcoshiftError(Exception):
    """Base class for all package errors."""


class ValidationError(EcoshiftError):
    """A parameter set, cycle, or config violates a documented invariant."""


class ParseError(EcoshiftError):
    """A drive-cycle or config file could not be parsed.

    Carries the 1-based line number when available.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class PowerLimitExceeded(EcoshiftError):
    """Demanded battery power is beyond what the pack can deliver.

    ``step`` identifies the offending horizon index when raised during a
    multi-step prediction.
    """

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class NonFiniteObjective(EcoshiftError):
    """The shooting objective evaluated to NaN/inf (model blow-up)."""


class AllInfeasible(EcoshiftError):
    """No admissible gearshift sequence satisfies the motor torque limit."""


class DegenerateMap(EcoshiftError):
    """One gear dominates the efficiency map everywhere; no shift schedule
    can be synthesized from it."""


class Infeasible(EcoshiftError):
    """No gear admits the required torque at some step of a profile."""


class SimulationAbort(EcoshiftError):
    """A closed-loop run hit a hard model limit (SoC clamp, power limit)."""

    def __init__(self, message, step=None, scenario=None):
        parts = [message]
        if scenario is not None:
            parts.append(f"scenario={scenario}")
        if step is not None:
            parts.append(f"step={step}")
        super().__init__("; ".join(parts))
        self.step = step
        self.scenario = scenario

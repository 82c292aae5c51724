"""Exception hierarchy shared by every module."""


class RetractorError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(RetractorError, ValueError):
    """A caller broke an input contract (dimension mismatch, bad parameter)."""


class DomainError(RetractorError):
    """A point handed to a map lies outside the map's body."""


class SelfMapError(RetractorError):
    """A map sent a point of its body outside the body."""

    def __init__(self, name, x, y, distance):
        self.name, self.x, self.y, self.distance = name, x, y, distance
        super().__init__(
            f"map {name!r} is not a self-map: image of {list(x)} lies "
            f"{distance:.3e} outside the body"
        )


class CertificationError(RetractorError):
    """A nonexpansiveness or commutativity certificate could not be issued."""

    witness = None


class NonexpansiveRejected(CertificationError):
    def __init__(self, name, value, witness=None):
        self.name, self.value, self.witness = name, value, witness
        msg = f"map {name!r} is not nonexpansive: Lipschitz estimate {value:.6g}"
        if witness is not None:
            x, y = witness
            msg += f" at witness pair x={list(map(float, x))}, y={list(map(float, y))}"
        super().__init__(msg)


class NonCommutingError(CertificationError):
    def __init__(self, i, j, x, defect):
        self.i, self.j, self.x, self.defect = i, j, x, defect
        self.witness = (i, j, x)
        super().__init__(
            f"maps {i} and {j} do not commute: defect {defect:.3e} at x={list(map(float, x))}"
        )


class UncertifiedMapError(CertificationError):
    """A solver was handed a map with an Unchecked certificate."""


class ConvergenceError(RetractorError):
    """An iteration failed to meet its stopping rule within its budget."""

    trace = None


class NonConvergence(ConvergenceError):
    def __init__(self, residual, iterations, trace=None):
        self.residual, self.iterations, self.trace = residual, iterations, trace
        super().__init__(
            f"contraction solve did not converge in {iterations} iterations "
            f"(last step {residual:.3e}); the modulus certificate is probably wrong"
        )


class KMTimeout(ConvergenceError):
    def __init__(self, trace, point):
        self.trace, self.point = trace, point
        last = trace.step_norms[-1] if trace.step_norms else float("nan")
        super().__init__(
            f"averaged iteration hit max_iter={len(trace.step_norms)} "
            f"with last step {last:.3e}"
        )


class PartialBuildError(ConvergenceError):
    def __init__(self, stage, cause):
        self.stage, self.cause = stage, cause
        self.trace = getattr(cause, "trace", None)
        super().__init__(f"retraction stage {stage} failed: {cause}")


class ContractFailure(ConvergenceError):
    def __init__(self, message, residuals=None, trace=None):
        self.residuals, self.trace = residuals, trace
        super().__init__(message)


class OracleUnavailable(RetractorError):
    """An oracle cannot produce a trustworthy answer for this input."""


class SpecError(RetractorError):
    """A problem description failed to parse or validate."""

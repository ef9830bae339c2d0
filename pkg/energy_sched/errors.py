"""Error hierarchy. Every error carries the process exit code the CLI reports."""


class EnergySchedError(Exception):
    exit_code = 1


# ─── Input errors (exit 2) ────────────────────────────────────────────────────


class InvalidParameterError(EnergySchedError, ValueError):
    exit_code = 2


class InvalidInputError(EnergySchedError, ValueError):
    exit_code = 2


class ConfigError(InvalidInputError):
    pass


class StabilityError(InvalidParameterError):
    pass


class UnsupportedPolicyError(InvalidParameterError):
    pass


class ReductionRangeError(InvalidParameterError):
    pass


class ShapeError(InvalidParameterError):
    pass


class EncodingError(InvalidInputError):
    pass


class SchemaError(InvalidInputError):
    pass


class EmptyDatasetError(InvalidInputError):
    pass


class NormalizationError(InvalidInputError):
    pass


class TableParseError(InvalidInputError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class TableValidationError(TableParseError):
    pass


class CoverageError(InvalidInputError):
    def __init__(self, message, missing=()):
        self.missing = list(missing)
        if self.missing:
            shown = ", ".join(str(m) for m in self.missing[:8])
            more = f" (+{len(self.missing) - 8} more)" if len(self.missing) > 8 else ""
            message = f"{message}: {shown}{more}"
        super().__init__(message)


# ─── Pipeline errors ──────────────────────────────────────────────────────────


class MissingArtifactError(EnergySchedError):
    exit_code = 3

    def __init__(self, path, hint=""):
        self.path = str(path)
        message = f"required artifact not found: {self.path}"
        if hint:
            message += f" ({hint})"
        super().__init__(message)


class TrainingDivergenceError(EnergySchedError):
    exit_code = 4

    def __init__(self, last_finite_loss, epoch, step):
        self.last_finite_loss = last_finite_loss
        self.epoch = epoch
        self.step = step
        super().__init__(
            f"training diverged at epoch {epoch}, step {step}; "
            f"last finite loss {last_finite_loss!r}"
        )


class GenerationStarvationError(EnergySchedError):
    exit_code = 5

    def __init__(self, accepted, requested, draws):
        self.accepted = accepted
        self.requested = requested
        self.draws = draws
        super().__init__(
            f"generation starved: {accepted}/{requested} accepted after {draws} draws"
        )


class CalibrationError(EnergySchedError):
    exit_code = 1

    def __init__(self, worst, result=None):
        self.worst = worst
        self.result = result
        super().__init__(
            f"calibration residual above tolerance: {worst.scheduler}/{worst.workflow} "
            f"{worst.metric} at {worst.reduction_pct:g}% "
            f"(target {worst.target:.2f}, fitted {worst.fitted:.2f}, "
            f"error {worst.rel_error:.2%} > {worst.tolerance:.2%})"
        )

from pathlib import Path
from typing import Optional


class HallcalError(Exception):
    pass


class ConfigurationError(HallcalError, ValueError):
    pass


class DomainError(HallcalError, ValueError):
    pass


class DegenerateWidthError(DomainError):
    pass


class SolverError(HallcalError, RuntimeError):
    pass


class SolverDivergenceError(SolverError):
    def __init__(self, step: int, field: str, time: float = float("nan")) -> None:
        self.step = step
        self.field = field
        self.time = time
        super().__init__(
            f"Discharge solver diverged at step {step} (t = {time:.3e} s): "
            f"non-finite values in {field}"
        )

    def __reduce__(self):
        return type(self), (self.step, self.field, self.time)


class SolverTimeoutError(SolverError):
    def __init__(self, step: int, elapsed: float, limit: float) -> None:
        self.step = step
        self.elapsed = elapsed
        self.limit = limit
        super().__init__(
            f"Discharge solver exceeded its wall-clock budget of {limit:.1f} s "
            f"after {step} steps ({elapsed:.1f} s)"
        )

    def __reduce__(self):
        return type(self), (self.step, self.elapsed, self.limit)


class PlumeRangeError(DomainError):
    pass


class UndefinedDivergenceError(DomainError):
    pass


class UndefinedMetricError(DomainError):
    pass


class DatasetParseError(HallcalError, ValueError):
    def __init__(self, path: Path | str, line: Optional[int], message: str) -> None:
        self.path = Path(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else f"{self.path}"
        self.message = message
        super().__init__(f"{where}: {message}")

    def __reduce__(self):
        return type(self), (self.path, self.line, self.message)


class EmptyChainError(HallcalError, ValueError):
    pass


class PredictionFailureError(HallcalError, RuntimeError):
    pass


class ChainFileError(DatasetParseError):
    pass

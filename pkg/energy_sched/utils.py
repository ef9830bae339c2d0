import hashlib
import logging
from enum import Enum

from energy_sched.errors import ReductionRangeError, UnsupportedPolicyError

# Frequency-reduction grid swept by the optimizer; the generator only accepts the gate.
REDUCTION_LEVELS = (0.0, 0.05, 0.10, 0.15, 0.20)
REDUCTION_GATE = (0.05, 0.20)
GATE_LEVELS = tuple(r for r in REDUCTION_LEVELS if r > 0)

BASE_CLOCK_HZ = 2.1e9
REFERENCE_UTILIZATION = 0.80

_GRID_TOL = 1e-9


class SchedulerKind(str, Enum):
    FCFS = "FCFS"
    LAS = "LAS"
    LASP = "LASP"
    LYNX = "LYNX"
    SAS = "SAS"
    OMFNN = "OMFNN"

    @classmethod
    def parse(cls, label):
        if isinstance(label, cls):
            return label
        key = str(label).strip().upper().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise UnsupportedPolicyError(f"unknown scheduler: {label!r}") from None

    @property
    def label(self):
        """Name as printed in the published tables."""
        return "OM-FNN" if self is SchedulerKind.OMFNN else self.value

    def __str__(self):
        return self.label


SCHEDULERS = tuple(SchedulerKind)


def check_reduction(reduction, allowed=REDUCTION_LEVELS):
    """Snap `reduction` onto the grid, or raise if it is not a grid level."""
    for level in allowed:
        if abs(reduction - level) <= _GRID_TOL:
            return level
    raise ReductionRangeError(
        f"reduction {reduction!r} outside the allowed levels {list(allowed)}"
    )


def nearest_level(reduction, levels=GATE_LEVELS):
    return min(levels, key=lambda level: (abs(level - reduction), -level))


def in_gate(reduction, gate=REDUCTION_GATE):
    return gate[0] - _GRID_TOL <= reduction <= gate[1] + _GRID_TOL


def reduction_pct(reduction):
    return round(reduction * 100.0, 6)


def derive_seed(seed, *names):
    """Stable 63-bit substream seed for a named pipeline stage."""
    key = ":".join([str(int(seed)), *(str(n) for n in names)])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def setup_logging(verbose=False):
    from rich.logging import RichHandler

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=verbose, show_path=verbose)],
        force=True,
    )

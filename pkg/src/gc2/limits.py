"""Resource caps shared by every phase of the pipeline."""
from __future__ import annotations

from dataclasses import dataclass

from .syntax import GC2Error


class CapExceeded(GC2Error):
    """A configured resource limit was hit.  Never a verdict."""


@dataclass(frozen=True)
class Limits:
    max_nullary: int = 10
    max_signature: int = 16
    max_vars: int = 10**6
    max_witness: int = 10**5
    oracle_max: int = 6
    lp_pivots: int = 200_000
    float_hints: bool = True  # let HiGHS guide the exact LP; verdicts stay exact

    def __post_init__(self):
        for name, value in vars(self).items():
            if not isinstance(value, bool) and value < 1:
                raise ValueError(f"cap {name} must be positive, got {value}")


DEFAULT_LIMITS = Limits()

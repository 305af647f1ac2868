"""Numbers stored as (log-magnitude, phase) and log-domain determinants.

Partition functions of the Dyson gas grow like a product of factorials, so
every tau value in this package travels as a :class:`LogValue`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la


def _wrap(phase: float) -> float:
    """Map a phase into (-pi, pi]."""
    p = math.remainder(phase, 2 * math.pi)
    if p <= -math.pi:
        p += 2 * math.pi
    return p


@dataclass(frozen=True)
class LogValue:
    """The number ``exp(log_magnitude + 1j * phase)``.

    Zero is ``log_magnitude == -inf`` (phase 0). For real values the phase
    is 0 or pi.
    """

    log_magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        lm = float(self.log_magnitude)
        if math.isnan(lm) or lm == math.inf:
            raise ValueError(f"invalid log magnitude {lm!r}")
        ph = 0.0 if lm == -math.inf else _wrap(float(self.phase))
        object.__setattr__(self, "log_magnitude", lm)
        object.__setattr__(self, "phase", ph)

    @classmethod
    def from_complex(cls, x: complex) -> "LogValue":
        x = complex(x)
        if x == 0:
            return cls.zero()
        return cls(math.log(abs(x)), math.atan2(x.imag, x.real))

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(-math.inf, 0.0)

    @classmethod
    def one(cls) -> "LogValue":
        return cls(0.0, 0.0)

    @property
    def is_zero(self) -> bool:
        return self.log_magnitude == -math.inf

    @property
    def sign(self) -> float:
        """+1, -1 or 0, for values known to be real."""
        if self.is_zero:
            return 0.0
        return -1.0 if abs(self.phase) > math.pi / 2 else 1.0

    def to_complex(self) -> complex:
        if self.is_zero:
            return 0j
        return complex(np.exp(complex(self.log_magnitude, self.phase)))

    def __complex__(self) -> complex:
        return self.to_complex()

    def __float__(self) -> float:
        return self.to_complex().real

    def log(self) -> complex:
        """Principal complex logarithm."""
        return complex(self.log_magnitude, self.phase)

    def __mul__(self, other) -> "LogValue":
        if not isinstance(other, LogValue):
            other = LogValue.from_complex(other)
        if self.is_zero or other.is_zero:
            return LogValue.zero()
        return LogValue(self.log_magnitude + other.log_magnitude, self.phase + other.phase)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogValue":
        if not isinstance(other, LogValue):
            other = LogValue.from_complex(other)
        if other.is_zero:
            raise ZeroDivisionError("division by a zero LogValue")
        if self.is_zero:
            return LogValue.zero()
        return LogValue(self.log_magnitude - other.log_magnitude, self.phase - other.phase)

    def __add__(self, other) -> "LogValue":
        if not isinstance(other, LogValue):
            other = LogValue.from_complex(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        big, small = (self, other) if self.log_magnitude >= other.log_magnitude else (other, self)
        ratio = np.exp(complex(small.log_magnitude - big.log_magnitude, small.phase - big.phase))
        return big * LogValue.from_complex(1 + ratio)

    __radd__ = __add__

    def __neg__(self) -> "LogValue":
        return LogValue(self.log_magnitude, self.phase + math.pi)

    def __sub__(self, other) -> "LogValue":
        if not isinstance(other, LogValue):
            other = LogValue.from_complex(other)
        return self + (-other)

    def relative_difference(self, other: "LogValue") -> float:
        """|a - b| / max(|a|, |b|), computed without leaving log space."""
        if self.is_zero and other.is_zero:
            return 0.0
        scale = max(self.log_magnitude, other.log_magnitude)
        a = np.exp(complex(self.log_magnitude - scale, self.phase)) if not self.is_zero else 0
        b = np.exp(complex(other.log_magnitude - scale, other.phase)) if not other.is_zero else 0
        return float(abs(a - b))


def log_sum(values) -> LogValue:
    """Sum of an iterable of LogValues."""
    total = LogValue.zero()
    for v in values:
        total = total + v
    return total


def log_det(a) -> LogValue:
    """Determinant of a square matrix as a LogValue, via pivoted LU.

    ``numpy.linalg.slogdet`` would do the same job; this version keeps the
    factorisation explicit so singular pivots map to an exact zero.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return LogValue.one()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(a, check_finite=True)
    d = np.diag(lu)
    if np.any(d == 0):
        return LogValue.zero()
    swaps = int(np.count_nonzero(piv != np.arange(n)))
    log_mag = float(np.sum(np.log(np.abs(d))))
    phase = float(np.sum(np.angle(d))) + (math.pi if swaps % 2 else 0.0)
    return LogValue(log_mag, phase)

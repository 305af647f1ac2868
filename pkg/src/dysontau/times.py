"""Toda lattice times and the generating function ``xi(t, z) = sum_k t_k z^k``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class HalfTimeVector:
    """Finitely supported times ``t_1, ..., t_K`` (zero beyond K).

    Index ``k`` is 1-based, matching the physics labelling; ``coeffs[k-1]``
    holds ``t_k``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = np.array(coeffs, dtype=complex).ravel()
        # trailing zeros carry no information; drop them so K is the true support
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:0]
        c.setflags(write=False)
        self.coeffs = c

    @property
    def K(self) -> int:
        return self.coeffs.size

    def __getitem__(self, k: int) -> complex:
        if k < 1:
            raise IndexError("times are indexed from 1")
        return complex(self.coeffs[k - 1]) if k <= self.K else 0j

    def __neg__(self) -> "HalfTimeVector":
        return HalfTimeVector(-self.coeffs)

    def conj(self) -> "HalfTimeVector":
        return HalfTimeVector(self.coeffs.conj())

    def padded(self, K: int) -> np.ndarray:
        out = np.zeros(max(K, self.K), dtype=complex)
        out[: self.K] = self.coeffs
        return out

    def with_value(self, k: int, value: complex) -> "HalfTimeVector":
        c = self.padded(k)
        c[k - 1] = value
        return HalfTimeVector(c)

    def __eq__(self, other) -> bool:
        return isinstance(other, HalfTimeVector) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self) -> str:
        return f"HalfTimeVector({self.coeffs.tolist()})"


def as_half_times(t) -> HalfTimeVector:
    if isinstance(t, HalfTimeVector):
        return t
    if t is None:
        return HalfTimeVector()
    if isinstance(t, dict):
        K = max((int(k) for k in t), default=0)
        c = np.zeros(K, dtype=complex)
        for k, v in t.items():
            c[int(k) - 1] = v
        return HalfTimeVector(c)
    return HalfTimeVector(t)


def xi(t, z):
    """``sum_{k>=1} t_k z^k`` for scalar or array ``z`` (Horner scheme)."""
    t = as_half_times(t)
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for c in t.coeffs[::-1]:
        acc = (acc + c) * z
    return acc if acc.ndim else complex(acc)


@dataclass(frozen=True)
class TimeVector:
    """Both halves of the 2D Toda times, ``t_+ = (t_1, t_2, ...)`` and
    ``t_- = (t_-1, t_-2, ...)``.

    With ``reality_locked`` the constructor enforces ``t_-k = -conj(t_k)``,
    the condition under which the Coulomb gas weights are real.
    """

    plus: HalfTimeVector = field(default_factory=HalfTimeVector)
    minus: HalfTimeVector = field(default_factory=HalfTimeVector)
    reality_locked: bool = False

    def __post_init__(self):
        object.__setattr__(self, "plus", as_half_times(self.plus))
        object.__setattr__(self, "minus", as_half_times(self.minus))
        if self.reality_locked:
            K = max(self.plus.K, self.minus.K)
            if not np.allclose(self.minus.padded(K), -self.plus.padded(K).conj(), rtol=0, atol=1e-14):
                raise ValueError("reality condition t_-k = -conj(t_k) violated")

    @classmethod
    def locked(cls, plus) -> "TimeVector":
        plus = as_half_times(plus)
        return cls(plus, -plus.conj(), reality_locked=True)

    @classmethod
    def zero(cls) -> "TimeVector":
        return cls(reality_locked=True)

    @property
    def K(self) -> int:
        return max(self.plus.K, self.minus.K)

    def satisfies_reality(self, atol: float = 1e-14) -> bool:
        K = self.K
        return bool(np.allclose(self.minus.padded(K), -self.plus.padded(K).conj(), rtol=0, atol=atol))

    def shifted(self, d_plus1: complex = 0, d_minus1: complex = 0) -> "TimeVector":
        """Move ``t_1`` and ``t_-1`` independently; the result is unlocked."""
        return TimeVector(
            self.plus.with_value(1, self.plus[1] + d_plus1),
            self.minus.with_value(1, self.minus[1] + d_minus1),
            reality_locked=False,
        )

    def sum_k_tk_tmk(self) -> complex:
        """``sum_k k t_k t_-k``, the free-boson normalisation exponent."""
        K = self.K
        k = np.arange(1, K + 1)
        return complex(np.sum(k * self.plus.padded(K) * self.minus.padded(K)))

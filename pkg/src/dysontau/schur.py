"""Young diagrams, the polynomials p_k(t), Schur functions and (N)_lambda."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .times import HalfTimeVector, as_half_times


@dataclass(frozen=True, order=True)
class YoungDiagram:
    """A partition ``rows[0] >= rows[1] >= ... > 0``; ``()`` is the empty diagram."""

    rows: tuple = ()

    def __post_init__(self):
        rows = tuple(int(r) for r in self.rows)
        if any(r <= 0 for r in rows):
            raise ValueError(f"rows must be positive: {rows}")
        if any(a < b for a, b in zip(rows, rows[1:])):
            raise ValueError(f"rows must be non-increasing: {rows}")
        object.__setattr__(self, "rows", rows)

    @property
    def weight(self) -> int:
        return sum(self.rows)

    @property
    def length(self) -> int:
        return len(self.rows)

    def __len__(self):
        return len(self.rows)

    def __repr__(self):
        return f"YoungDiagram{self.rows}"


def elementary_ps(kmax: int, t) -> np.ndarray:
    """``[p_0(t), ..., p_kmax(t)]`` where ``exp(xi(t, z)) = sum_k p_k(t) z^k``.

    Uses ``k p_k = sum_{j=1}^k j t_j p_{k-j}``.
    """
    if kmax < 0:
        raise ValueError("kmax must be non-negative")
    t = as_half_times(t)
    jt = np.arange(1, kmax + 1) * t.padded(kmax)[:kmax]
    p = np.zeros(kmax + 1, dtype=complex)
    p[0] = 1.0
    for k in range(1, kmax + 1):
        # p_{k-1}, ..., p_0 against 1 t_1, ..., k t_k
        p[k] = np.dot(jt[:k], p[k - 1 :: -1]) / k
    return p


def elementary_p(k: int, t) -> complex:
    """Single coefficient p_k(t)."""
    if k < 0:
        raise ValueError(f"p_k needs k >= 0, got {k}")
    return complex(elementary_ps(k, t)[k])


def _jt_indices(diagram: YoungDiagram, length: int) -> np.ndarray:
    """Index matrix ``lambda_i - i + j`` padded with zero rows up to ``length``."""
    rows = np.zeros(length, dtype=int)
    rows[: diagram.length] = diagram.rows
    i = np.arange(length)[:, None]
    j = np.arange(length)[None, :]
    return rows[:, None] - i + j


def schur(diagram: YoungDiagram, t) -> complex:
    """Jacobi-Trudi determinant ``det p_{lambda_i - i + j}(t)``."""
    if not isinstance(diagram, YoungDiagram):
        diagram = YoungDiagram(tuple(diagram))
    n = diagram.length
    if n == 0:
        return 1.0 + 0j
    idx = _jt_indices(diagram, n)
    p = elementary_ps(int(idx.max()), t)
    m = np.where(idx >= 0, p[np.clip(idx, 0, None)], 0)
    return complex(np.linalg.det(m))


def jacobi_trudi_indices(diagrams) -> np.ndarray:
    """Stacked index matrices ``lambda_i - i + j``, zero-padded to a common size.

    Padding with zero rows leaves each determinant unchanged, so all of them
    can be evaluated as one stacked LU by :func:`schur_from_indices`.
    """
    diagrams = tuple(diagrams)
    length = max((d.length for d in diagrams), default=0)
    if length == 0:
        return np.zeros((len(diagrams), 0, 0), dtype=int)
    return np.stack([_jt_indices(d, length) for d in diagrams])


def schur_from_indices(idx: np.ndarray, t) -> np.ndarray:
    if idx.shape[-1] == 0:
        return np.ones(idx.shape[0], dtype=complex)
    p = elementary_ps(max(int(idx.max()), 0), t)
    m = np.where(idx >= 0, p[np.clip(idx, 0, None)], 0)
    return np.linalg.det(m)


def schur_batch(diagrams, t) -> np.ndarray:
    """Schur functions for many diagrams at once."""
    return schur_from_indices(jacobi_trudi_indices(diagrams), t)


def pochhammer(diagram: YoungDiagram, N: int) -> int:
    """``(N)_lambda = prod_i (N+1-i)(N+2-i)...(N+lambda_i-i)``; zero when length > N."""
    if N < 0:
        raise ValueError("N must be non-negative")
    if not isinstance(diagram, YoungDiagram):
        diagram = YoungDiagram(tuple(diagram))
    out = 1
    for i, row in enumerate(diagram.rows, start=1):
        for j in range(1, row + 1):
            out *= N + j - i
            if out == 0:
                return 0
    return out


def _partitions_of(n: int, max_part: int, max_length):
    if n == 0:
        yield ()
        return
    if max_length == 0:
        return
    for first in range(min(n, max_part), 0, -1):
        rest_len = None if max_length is None else max_length - 1
        for rest in _partitions_of(n - first, first, rest_len):
            yield (first,) + rest


def enumerate_partitions(max_weight: int, max_length: int | None = None) -> list:
    """All diagrams with ``|lambda| <= max_weight``, by weight then descending lex.

    ``max_length`` optionally drops diagrams with more rows.
    """
    if max_weight < 0:
        raise ValueError("max_weight must be non-negative")
    return [
        YoungDiagram(rows)
        for w in range(max_weight + 1)
        for rows in _partitions_of(w, w, max_length)
    ]


__all__ = [
    "YoungDiagram",
    "HalfTimeVector",
    "elementary_p",
    "elementary_ps",
    "schur",
    "schur_batch",
    "jacobi_trudi_indices",
    "schur_from_indices",
    "pochhammer",
    "enumerate_partitions",
]

"""Free fermions on a finite window of modes.

Modes ``m_min <= n < m_max`` are mapped to bits ``n - m_min`` of a basis
index (Jordan-Wigner ordering by ascending mode index). ``psi_n`` is the
operator that fills mode n and ``psi*_n`` empties it, so the Dirac vacuum
``|0>`` has every negative mode of the window filled and every
non-negative mode empty, and ``<0| psi_n psi*_m |0> = delta_nm`` for
``m < 0``.

Everything here is exact linear algebra on ``2**D`` dimensional Fock space,
used to check the operator identities and the operator form of the
canonical tau function against its integral form.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .canonical import MeasureSpec, tau_integral_mc
from .logvalue import LogValue
from .schur import elementary_ps
from .times import TimeVector, as_half_times

MAX_MODES = 14

__all__ = [
    "FockWindow",
    "ModeOperators",
    "Fermion",
    "psi",
    "psi_star",
    "build_mode_operators",
    "vacuum_state",
    "shifted_vacuum",
    "projectors_P",
    "bilinear",
    "expm_conserving",
    "exp_bilinear",
    "current_J",
    "J_plus",
    "J_minus",
    "vev_fields_product",
    "random_field_instance",
    "contraction",
    "wick_determinant",
    "wick_vev",
    "fock_vev",
    "tau_operator_vs_integral",
    "IdentityCheck",
    "identity_suite",
]


@dataclass(frozen=True)
class FockWindow:
    m_min: int
    m_max: int

    def __post_init__(self):
        if self.m_max <= self.m_min:
            raise ValueError("empty window")
        if self.D > MAX_MODES:
            raise ValueError(f"window of {self.D} modes exceeds the cap of {MAX_MODES}")

    @property
    def D(self) -> int:
        return self.m_max - self.m_min

    @property
    def dim(self) -> int:
        return 1 << self.D

    @property
    def modes(self) -> range:
        return range(self.m_min, self.m_max)

    def __contains__(self, n) -> bool:
        return self.m_min <= n < self.m_max

    def bit(self, n: int) -> int:
        if n not in self:
            raise ValueError(f"mode {n} outside window [{self.m_min}, {self.m_max})")
        return n - self.m_min

    def enlarged(self, by: int = 2) -> "FockWindow":
        return FockWindow(self.m_min - by, self.m_max + by)


class ModeOperators(NamedTuple):
    window: FockWindow
    psi: dict
    psi_star: dict

    @property
    def identity(self):
        return sp.identity(self.window.dim, dtype=complex, format="csr")


def _annihilator(D: int, b: int) -> sp.csr_matrix:
    states = np.arange(1 << D)
    occ = states[(states >> b) & 1 == 1]
    below = occ & ((1 << b) - 1)
    sign = np.where(np.array([bin(s).count("1") for s in below]) % 2, -1, 1)
    return sp.csr_matrix((sign.astype(complex), (occ ^ (1 << b), occ)), shape=(1 << D, 1 << D))


def build_mode_operators(window: FockWindow) -> ModeOperators:
    """``psi_n`` and ``psi*_n`` for every mode of the window as sparse matrices."""
    psi_star_ops = {n: _annihilator(window.D, window.bit(n)) for n in window.modes}
    psi_ops = {n: m.T.conj().tocsr() for n, m in psi_star_ops.items()}
    return ModeOperators(window, psi_ops, psi_star_ops)


def vacuum_state(window: FockWindow) -> np.ndarray:
    """``|0>``: negative modes filled."""
    if not (window.m_min <= 0 <= window.m_max):
        raise ValueError("window must contain the Fermi level 0")
    v = np.zeros(window.dim, dtype=complex)
    v[(1 << (0 - window.m_min)) - 1] = 1.0
    return v


def shifted_vacuum(ops: ModeOperators, n: int) -> np.ndarray:
    """``|n> = psi_{n-1}...psi_0 |0>`` (n > 0), ``psi*_n ... psi*_{-1} |0>`` (n < 0).

    The dual ``<n|`` is the conjugate transpose (entries are real +-1).
    """
    w = ops.window
    if not (w.m_min <= n <= w.m_max):
        raise ValueError(f"|{n}> needs modes outside the window")
    v = vacuum_state(w)
    if n > 0:
        for j in range(0, n):
            v = ops.psi[j] @ v
    elif n < 0:
        for j in range(-1, n - 1, -1):
            v = ops.psi_star[j] @ v
    return v


def projectors_P(ops: ModeOperators):
    """``P_+ = prod_{i<0} psi_i psi*_i`` and ``P_- = prod_{i>=0} psi*_i psi_i`` on the window."""
    w = ops.window
    p_plus = ops.identity
    p_minus = ops.identity
    for i in w.modes:
        if i < 0:
            p_plus = p_plus @ (ops.psi[i] @ ops.psi_star[i])
        else:
            p_minus = p_minus @ (ops.psi_star[i] @ ops.psi[i])
    return p_plus.tocsr(), p_minus.tocsr()


def bilinear(ops: ModeOperators, A) -> sp.csr_matrix:
    """``sum_{m,n} A[m, n] psi_m psi*_n``; A is indexed by window position."""
    A = np.asarray(A, dtype=complex)
    w = ops.window
    if A.shape != (w.D, w.D):
        raise ValueError(f"A must be {w.D} x {w.D}")
    out = sp.csr_matrix((w.dim, w.dim), dtype=complex)
    for (i, j) in zip(*np.nonzero(A)):
        out = out + A[i, j] * (ops.psi[w.m_min + i] @ ops.psi_star[w.m_min + j])
    return out.tocsr()


def expm_conserving(H, window: FockWindow) -> sp.csr_matrix:
    """Matrix exponential of a particle-number conserving operator, sector by sector."""
    H = sp.csr_matrix(H)
    counts = np.array([bin(s).count("1") for s in range(window.dim)])
    coo = H.tocoo()
    if np.any(counts[coo.row] != counts[coo.col]):
        raise ValueError("operator does not conserve particle number")
    rows, cols, vals = [], [], []
    for k in range(window.D + 1):
        idx = np.flatnonzero(counts == k)
        block = H[idx][:, idx].toarray()
        E = la.expm(block)
        r, c = np.nonzero(E)
        rows.append(idx[r])
        cols.append(idx[c])
        vals.append(E[r, c])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=H.shape
    )


def exp_bilinear(ops: ModeOperators, A) -> sp.csr_matrix:
    """``exp(sum A_mn psi_m psi*_n)``."""
    return expm_conserving(bilinear(ops, A), ops.window)


def current_J(ops: ModeOperators, k: int) -> sp.csr_matrix:
    """``J_k = sum_j psi_j psi*_{j+k}``, restricted to pairs inside the window."""
    w = ops.window
    out = sp.csr_matrix((w.dim, w.dim), dtype=complex)
    for j in w.modes:
        if j + k in w:
            out = out + ops.psi[j] @ ops.psi_star[j + k]
    return out.tocsr()


def J_plus(ops: ModeOperators, t_plus) -> sp.csr_matrix:
    t = as_half_times(t_plus)
    out = sp.csr_matrix((ops.window.dim,) * 2, dtype=complex)
    for k in range(1, t.K + 1):
        if t[k]:
            out = out + t[k] * current_J(ops, k)
    return out.tocsr()


def J_minus(ops: ModeOperators, t_minus) -> sp.csr_matrix:
    t = as_half_times(t_minus)
    out = sp.csr_matrix((ops.window.dim,) * 2, dtype=complex)
    for k in range(1, t.K + 1):
        if t[k]:
            out = out + t[k] * current_J(ops, -k)
    return out.tocsr()


# ------------------------------------------------------------- closed forms


class _QC:
    """Exact complex rational, enough arithmetic for a small determinant."""

    __slots__ = ("re", "im")

    def __init__(self, re, im=Fraction(0)):
        self.re, self.im = Fraction(re), Fraction(im)

    @classmethod
    def of(cls, z: complex) -> "_QC":
        return cls(Fraction(z.real), Fraction(z.imag))

    def __add__(self, o):
        return _QC(self.re + o.re, self.im + o.im)

    def __sub__(self, o):
        return _QC(self.re - o.re, self.im - o.im)

    def __mul__(self, o):
        return _QC(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    def __truediv__(self, o):
        d = o.re * o.re + o.im * o.im
        return _QC((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __complex__(self):
        return complex(float(self.re), float(self.im))


def _exact_det(m: list) -> _QC:
    n = len(m)
    m = [row[:] for row in m]
    det = _QC(1)
    for k in range(n):
        p = next((i for i in range(k, n) if not m[i][k].is_zero()), None)
        if p is None:
            return _QC(0)
        if p != k:
            m[k], m[p] = m[p], m[k]
            det = _QC(0) - det
        det = det * m[k][k]
        for i in range(k + 1, n):
            f = m[i][k] / m[k][k]
            for j in range(k + 1, n):
                m[i][j] = m[i][j] - f * m[k][j]
    return det


class FieldsVEV(NamedTuple):
    determinant_form: complex
    product_form: complex
    difference: float


def vev_fields_product(N: int, zs, zetas, exact: bool = True) -> FieldsVEV:
    """``<N| psi(z_1)...psi(z_n) psi*(zeta_n)...psi*(zeta_1) |N>`` two ways:

    ``prod (z_l/zeta_l)^N det[zeta_i / (z_i - zeta_j)]`` and
    ``prod z_l^N zeta_l^{1-N} / (z_l - zeta_l)
    * prod_{i<j} (z_i - z_j)(zeta_j - zeta_i) / ((z_i - zeta_j)(z_j - zeta_i))``.

    The determinant is ill-conditioned when points nearly coincide, so by
    default it is evaluated exactly in rational arithmetic on the (exactly
    representable) floating-point inputs and rounded once.
    """
    z = np.asarray(zs, dtype=complex).ravel()
    s = np.asarray(zetas, dtype=complex).ravel()
    if z.size != s.size:
        raise ValueError("need as many z as zeta")
    if np.any(z[:, None] == s[None, :]):
        raise ZeroDivisionError("coincident z_i = zeta_j is a pole")
    if np.any(z == 0) or np.any(s == 0):
        raise ZeroDivisionError("fields at the origin are not defined for every N")
    n = z.size
    if n == 0:
        det_form = 1.0 + 0j
    elif exact:
        zq = [_QC.of(complex(v)) for v in z]
        sq = [_QC.of(complex(v)) for v in s]
        det = _exact_det([[sq[i] / (zq[i] - sq[j]) for j in range(n)] for i in range(n)])
        pre = _QC(1)
        for a, b in zip(zq, sq):
            r = a / b if N >= 0 else b / a
            for _ in range(abs(N)):
                pre = pre * r
        det_form = complex(pre * det)
    else:
        det_form = complex(np.prod((z / s) ** N) * np.linalg.det(s[:, None] / (z[:, None] - s[None, :])))
    prod_form = complex(np.prod(z**N * s ** (1 - N) / (z - s)))
    for i in range(n):
        for j in range(i + 1, n):
            prod_form *= (z[i] - z[j]) * (s[j] - s[i]) / ((z[i] - s[j]) * (z[j] - s[i]))
    prod_form = complex(prod_form)
    scale = max(abs(det_form), abs(prod_form))
    return FieldsVEV(det_form, prod_form, float(abs(det_form - prod_form) / scale) if scale else 0.0)


def random_field_instance(rng: np.random.Generator, n: int):
    """Points for the field correlator in its convergence region:
    ``|z_i| < 1`` and ``1.5 <= |zeta_j| <= 3``."""
    z = np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(size=n))
    s = rng.uniform(1.5, 3.0, n) * np.exp(2j * np.pi * rng.uniform(size=n))
    return z, s


# ----------------------------------------------------------------- Wick side


@dataclass(frozen=True)
class Fermion:
    """Finite linear combination ``sum a_n psi_n + sum b_n psi*_n``."""

    psi: dict = field(default_factory=dict)
    psi_star: dict = field(default_factory=dict)

    def __add__(self, other: "Fermion") -> "Fermion":
        a = dict(self.psi)
        b = dict(self.psi_star)
        for n, c in other.psi.items():
            a[n] = a.get(n, 0) + c
        for n, c in other.psi_star.items():
            b[n] = b.get(n, 0) + c
        return Fermion(a, b)

    def __mul__(self, c) -> "Fermion":
        return Fermion({n: c * v for n, v in self.psi.items()}, {n: c * v for n, v in self.psi_star.items()})

    __rmul__ = __mul__

    def modes(self) -> set:
        return set(self.psi) | set(self.psi_star)


def psi(n: int, coeff: complex = 1.0) -> Fermion:
    return Fermion({n: coeff}, {})


def psi_star(n: int, coeff: complex = 1.0) -> Fermion:
    return Fermion({}, {n: coeff})


def contraction(a: Fermion, b: Fermion) -> complex:
    """``<0| a b |0>`` from ``<psi_n psi*_m> = delta_nm [m < 0]`` and
    ``<psi*_m psi_n> = delta_nm [n >= 0]``."""
    out = 0j
    for n, c in a.psi.items():
        if n < 0:
            out += c * b.psi_star.get(n, 0)
    for n, c in a.psi_star.items():
        if n >= 0:
            out += c * b.psi.get(n, 0)
    return out


def wick_determinant(ws, ws_star) -> complex:
    """``<0| w_1...w_n w*_n...w*_1 |0> = det <w_i w*_j>``."""
    if len(ws) != len(ws_star):
        raise ValueError("need equally many w and w*")
    n = len(ws)
    if n == 0:
        return 1.0 + 0j
    m = np.array([[contraction(ws[i], ws_star[j]) for j in range(n)] for i in range(n)])
    return complex(np.linalg.det(m))


def _pfaffian(A: np.ndarray) -> complex:
    n = A.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n % 2:
        return 0j
    out = 0j
    rest = np.arange(1, n)
    for pos, j in enumerate(rest):
        if A[0, j] == 0:
            continue
        keep = np.delete(rest, pos)
        out += (-1) ** pos * A[0, j] * _pfaffian(A[np.ix_(keep, keep)])
    return out


def wick_vev(ws) -> complex:
    """``<0| w_1 ... w_m |0>`` by Wick's theorem (Pfaffian of pair contractions)."""
    m = len(ws)
    if m % 2:
        return 0j
    A = np.zeros((m, m), dtype=complex)
    for i in range(m):
        for j in range(i + 1, m):
            A[i, j] = contraction(ws[i], ws[j])
            A[j, i] = -A[i, j]
    return _pfaffian(A)


def _as_operator(ops: ModeOperators, f: Fermion):
    out = sp.csr_matrix((ops.window.dim,) * 2, dtype=complex)
    for n, c in f.psi.items():
        out = out + c * ops.psi[n]
    for n, c in f.psi_star.items():
        out = out + c * ops.psi_star[n]
    return out


def fock_vev(ops: ModeOperators, ws) -> complex:
    """``<0| w_1 ... w_m |0>`` by explicit matrix products on the window."""
    for f in ws:
        for n in f.modes():
            ops.window.bit(n)
    v = vacuum_state(ops.window)
    u = v.copy()
    for f in reversed(ws):
        v = _as_operator(ops, f) @ v
    return complex(np.vdot(u, v))


# ------------------------------------------------ operator tau vs integral


class OperatorTauCheck(NamedTuple):
    operator: LogValue
    integral: LogValue
    delta: float
    terms: dict  # m -> contribution of the m-th term of g_0
    drift: float  # change of the operator value under window enlargement


def _psi_plus(ops: ModeOperators, z: complex):
    """``psi_+(z) = sum_{n>=0} psi_n z^n`` cut at the window top."""
    out = sp.csr_matrix((ops.window.dim,) * 2, dtype=complex)
    for n in ops.window.modes:
        if n >= 0:
            out = out + z**n * ops.psi[n]
    return out


def _psi_star_plus_reflected(ops: ModeOperators, z: complex):
    """``psi*_+(1/conj z) = sum_{n>=0} psi*_n conj(z)^n``."""
    out = sp.csr_matrix((ops.window.dim,) * 2, dtype=complex)
    zb = np.conj(z)
    for n in ops.window.modes:
        if n >= 0:
            out = out + zb**n * ops.psi_star[n]
    return out


def _operator_tau(N, t, points, weights, window, m_max_terms):
    ops = build_mode_operators(window)
    if N < 0:
        return 0j, {}
    ket = shifted_vacuum(ops, N)
    p_plus, p_minus = projectors_P(ops)
    right = p_plus @ expm_multiply(-J_minus(ops, t.minus).tocsc(), ket)
    # row vector <N| e^{J+}
    left = expm_multiply(J_plus(ops, t.plus).T.tocsc(), ket.conj())
    psi_p = [_psi_plus(ops, z) for z in points]
    psi_s = [_psi_star_plus_reflected(ops, z) for z in points]
    terms = {}
    for m in range(0, m_max_terms + 1):
        total = 0j
        for combo in itertools.combinations(range(len(points)), m):
            v = right
            for i in combo:  # psi*_+(1/zbar_{i_1}) acts first
                v = psi_s[i] @ v
            v = p_minus @ v
            for i in reversed(combo):
                v = psi_p[i] @ v
            total += math.prod(weights[i] for i in combo) * (left @ v)
        terms[m] = complex(total)
    return sum(terms.values()), terms


def tau_operator_vs_integral(
    N: int,
    t: TimeVector,
    points,
    weights,
    window: FockWindow | None = None,
) -> OperatorTauCheck:
    """Evaluate ``<N| e^{J+} g_0 P_+ e^{-J-} |N>`` on a Fock window and the
    discrete-measure Coulomb sum ``(1/N!) sum |Delta_N|^2 prod w e^{xi(t+,z) - xi(t-,conj z)}``.

    ``g_0 = sum_m (1/m!) int psi_+(z_1)..psi_+(z_m) P_- psi*_+(1/conj z_m)..psi*_+(1/conj z_1)``
    with ``d mu = sum_i weights[i] delta_{points[i]}``. Every m-term is
    reported separately; only ``m == N`` may be non-zero. ``drift`` is the
    change of the operator value when the top of the window moves by two
    modes, the leak detector for the truncated currents.
    """
    points = [complex(p) for p in points]
    weights = [float(w) for w in weights]
    if window is None:
        # only modes >= 0 carry the truncation error; one negative mode keeps P_+ non-trivial
        window = FockWindow(-1, MAX_MODES - 1)
    m_terms = min(len(points), window.m_max)
    op, terms = _operator_tau(N, t, points, weights, window, m_terms)
    # the upper cut is what truncates psi_+ and the currents; move it by two
    # modes, downwards when the cap leaves no room above
    top = window.m_max + 2 if window.D + 2 <= MAX_MODES else window.m_max - 2
    big = FockWindow(window.m_min, top)
    op_big, _ = _operator_tau(N, t, points, weights, big, m_terms)
    if N < 0:
        integral = LogValue.zero()
    elif N == 0:
        integral = LogValue.one()
    else:
        integral = tau_integral_mc(N, MeasureSpec.discrete(points, weights), t, samples=1, seed=0).value
    op_v = LogValue.from_complex(op)
    return OperatorTauCheck(
        op_v,
        integral,
        op_v.relative_difference(integral),
        terms,
        abs(op - op_big) / max(abs(op), 1e-300),
    )


# ------------------------------------------------------------ identity suite


class IdentityCheck(NamedTuple):
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.error <= self.tol


def _maxabs(a) -> float:
    if sp.issparse(a):
        a = a.toarray()
    a = np.asarray(a)
    return float(np.abs(a).max()) if a.size else 0.0


def _normal_ordered_diag_exp(ops: ModeOperators, coeffs: dict):
    """``:exp(sum_i a_i psi_i psi*_i):`` as ``prod_i (1 + a_i :psi_i psi*_i:)``."""
    out = ops.identity
    for i, a in coeffs.items():
        nb = ops.psi[i] @ ops.psi_star[i]
        if i < 0:  # subtract the vacuum expectation
            nb = nb - ops.identity
        out = out @ (ops.identity + a * nb)
    return out


def identity_suite(window: FockWindow | None = None, t_plus=(0.2, -0.1j), t_minus=(-0.2, 0.1j),
                   alphas=(0.7, -1.3 + 0.4j), seed: int = 0, n_random: int = 20) -> list:
    """Check the mode-level operator identities on a finite window.

    Returns :class:`IdentityCheck` rows. Every identity below holds exactly
    on the truncated window (the truncated currents act on modes by the same
    shifts), apart from the leak row, which compares a vacuum amplitude
    between the window and a window two modes taller.
    """
    window = window or FockWindow(-3, 7)
    ops = build_mode_operators(window)
    modes = list(window.modes)
    I = ops.identity
    rows = []

    def add(name, err, tol=1e-12):
        rows.append(IdentityCheck(name, float(err), tol))

    e = 0.0
    for m in modes:
        for n in modes:
            e = max(e, _maxabs(ops.psi[m] @ ops.psi_star[n] + ops.psi_star[n] @ ops.psi[m] - (m == n) * I))
            e = max(e, _maxabs(ops.psi[m] @ ops.psi[n] + ops.psi[n] @ ops.psi[m]))
    add("anticommutators", e, 0.0)

    e = 0.0
    for k in modes:
        for a in alphas:
            X = ops.psi[k] @ ops.psi_star[k] if k >= 0 else ops.psi_star[k] @ ops.psi[k]
            lin = I + (np.exp(a) - 1) * X
            e = max(e, _maxabs(expm_conserving(a * X, window) - lin))
            # normal ordering leaves these bilinears alone, so :exp: gives the same
            vev = complex(np.vdot(vacuum_state(window), X @ vacuum_state(window)))
            e = max(e, abs(vev))
    add("single-mode exponentials", e)

    neg = [i for i in modes if i < 0]
    pos = [i for i in modes if i >= 0]
    P_plus, P_minus = projectors_P(ops)
    e = 0.0
    alt_plus, alt_minus = I, I
    for i in neg:
        alt_plus = alt_plus @ (I - ops.psi_star[i] @ ops.psi[i])
    for i in pos:
        alt_minus = alt_minus @ (I - ops.psi[i] @ ops.psi_star[i])
    e = max(e, _maxabs(P_plus - alt_plus), _maxabs(P_minus - alt_minus))
    e = max(e, _maxabs(P_plus - _normal_ordered_diag_exp(ops, {i: 1.0 for i in neg})))
    # for i >= 0, :psi_i psi*_i: = psi_i psi*_i
    e = max(e, _maxabs(P_minus - _normal_ordered_diag_exp(ops, {i: -1.0 for i in pos})))
    e = max(e, _maxabs(P_plus @ P_plus - P_plus), _maxabs(P_minus @ P_minus - P_minus))
    add("projector forms and P^2 = P", e, 0.0)

    e = 0.0
    for k in neg:
        e = max(e, _maxabs(P_plus @ ops.psi_star[k]), _maxabs(ops.psi[k] @ P_plus))
        e = max(e, _maxabs(P_minus @ ops.psi_star[k] - ops.psi_star[k] @ P_minus))
        e = max(e, _maxabs(P_minus @ ops.psi[k] - ops.psi[k] @ P_minus))
    for k in pos:
        e = max(e, _maxabs(P_plus @ ops.psi_star[k] - ops.psi_star[k] @ P_plus))
        e = max(e, _maxabs(P_plus @ ops.psi[k] - ops.psi[k] @ P_plus))
        e = max(e, _maxabs(P_minus @ ops.psi[k]), _maxabs(ops.psi_star[k] @ P_minus))
    add("projector annihilation and commutation", e, 0.0)

    e = 0.0
    for n in range(window.m_min, window.m_max + 1):
        v = shifted_vacuum(ops, n)
        e = max(e, _maxabs(P_plus @ v - (v if n >= 0 else 0 * v)))
        # |0> has no particle in a non-negative mode, so P- keeps it
        e = max(e, _maxabs(P_minus @ v - (v if n <= 0 else 0 * v)))
    add("projectors on shifted vacua", e, 0.0)

    e = 0.0
    for sign, t in ((+1, t_plus), (-1, t_minus)):
        J = J_plus(ops, t) if sign > 0 else J_minus(ops, t)
        E, Ei = expm_conserving(J, window), expm_conserving(-J, window)
        p = elementary_ps(window.D, t)
        pm = elementary_ps(window.D, -as_half_times(t))
        for n in modes:
            rhs = sum(p[k] * ops.psi[n - sign * k] for k in range(window.D + 1) if n - sign * k in window)
            e = max(e, _maxabs(E @ ops.psi[n] @ Ei - rhs))
            rhs = sum(pm[k] * ops.psi_star[n + sign * k] for k in range(window.D + 1) if n + sign * k in window)
            e = max(e, _maxabs(E @ ops.psi_star[n] @ Ei - rhs))
    add("adjoint action of exp(J+-) on modes", e)

    vac = vacuum_state(window)
    right = P_plus @ expm_conserving(-J_minus(ops, t_minus), window) @ vac
    left = P_plus.T @ (expm_conserving(J_plus(ops, t_plus), window).T @ vac)
    add("P+ exp(-J-)|0> = |0> and <0|exp(J+) P+ = <0|", max(_maxabs(right - vac), _maxabs(left - vac)))

    rng = np.random.default_rng(seed)
    e = 0.0
    for _ in range(n_random):
        m = int(rng.choice([2, 4, 6]))
        ws = []
        for _ in range(m):
            f = Fermion()
            for n in rng.choice(modes, size=3, replace=False):
                c = complex(rng.normal(), rng.normal())
                f = f + (psi(int(n), c) if rng.random() < 0.5 else psi_star(int(n), c))
            ws.append(f)
        ref = fock_vev(ops, ws)
        e = max(e, abs(wick_vev(ws) - ref) / max(1.0, abs(ref)))
        half = m // 2
        wp = [Fermion({int(n): complex(rng.normal(), rng.normal()) for n in rng.choice(modes, 3, replace=False)})
              for _ in range(half)]
        wq = [Fermion({}, {int(n): complex(rng.normal(), rng.normal()) for n in rng.choice(modes, 3, replace=False)})
              for _ in range(half)]
        ref = fock_vev(ops, wp + wq[::-1])
        e = max(e, abs(wick_determinant(wp, wq) - ref) / max(1.0, abs(ref)))
    add("Wick theorem vs Fock-space products", e)

    # leak detector: the truncated currents must not feel the window edge
    def amp(w):
        o = build_mode_operators(w)
        ket = shifted_vacuum(o, 1)
        pp, _ = projectors_P(o)
        r = pp @ expm_multiply(-J_minus(o, t_minus).tocsc(), ket)
        l = expm_multiply(J_plus(o, t_plus).T.tocsc(), ket.conj())
        return complex(l @ r)

    bigger = FockWindow(window.m_min, window.m_max + 2) if window.D + 2 <= MAX_MODES else window
    a0, a1 = amp(window), amp(bigger)
    add("window-enlargement drift of <1|e^J+ P+ e^-J-|1>", abs(a0 - a1) / max(abs(a1), 1e-300), 1e-6)
    return rows

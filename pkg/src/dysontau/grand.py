"""Grand canonical Coulomb gases next to an ideal conductor.

Particles outside the unit disk (images at ``1/conj z``) or in the upper
half-plane (images at ``conj z``). In both cases the fugacity series is the
Fredholm expansion of ``det(1 + K)`` for a Cauchy-type kernel, which is
evaluated here by the Nystrom method for measures carried by the circle
``|z| = e^eps`` or by the line ``Im z = eps``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import gammainc

from .logvalue import LogValue, log_det
from .times import HalfTimeVector, TimeVector, as_half_times, xi

__all__ = [
    "DiskEnsembleSpec",
    "HalfPlaneEnsembleSpec",
    "NystromGrid",
    "FredholmResult",
    "omega",
    "potential_V",
    "chemical_potential",
    "fredholm_kernel_circle",
    "circle_nystrom_matrix",
    "fredholm_det_circle",
    "fredholm_series_bound",
    "grand_expansion_circle",
    "image_energy_weight",
    "halfplane_nystrom_matrix",
    "halfplane_weight",
    "fredholm_det_halfplane",
    "disk_tau_family",
]


@dataclass(frozen=True)
class DiskEnsembleSpec:
    """Particles on ``|z| = e^epsilon`` with ``d mu = e^epsilon d phi``.

    ``t0`` is the discrete Toda time n; ``fugacity`` multiplies the weight of
    every particle.
    """

    epsilon: float
    t0: float = 0
    times: TimeVector = field(default_factory=TimeVector.zero)
    fugacity: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive (the measure must stay off |z| = 1)")
        if self.fugacity < 0:
            raise ValueError("fugacity must be non-negative")
        if not isinstance(self.times, TimeVector):
            object.__setattr__(self, "times", TimeVector.locked(self.times))


def _gaussian_damping(L: float) -> Callable:
    s2 = 2 * (L / 6) ** 2
    return lambda x: np.exp(-np.asarray(x) ** 2 / s2)


@dataclass(frozen=True)
class HalfPlaneEnsembleSpec:
    """Particles on the line ``x + i epsilon`` with ``d mu_H = damping(x) dx``.

    The line is truncated to ``[-window, window]`` (default ``10 epsilon``);
    the default damping is ``exp(-x^2 / (2 (window/6)^2))``.
    """

    epsilon: float
    times: HalfTimeVector = field(default_factory=HalfTimeVector)
    window: float | None = None
    damping: Callable | None = field(default=None, compare=False)
    imaginary_times: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "times", as_half_times(self.times))
        if self.window is None:
            object.__setattr__(self, "window", 10 * self.epsilon)
        if not self.window > 0:
            raise ValueError("window must be positive")
        if self.damping is None:
            object.__setattr__(self, "damping", _gaussian_damping(self.window))
        if self.imaginary_times and np.any(np.abs(self.times.coeffs.real) > 1e-14):
            raise ValueError("times must be purely imaginary")


class NystromGrid(NamedTuple):
    nodes: np.ndarray
    weights: np.ndarray
    rule: str

    @classmethod
    def periodic_trapezoid(cls, M: int) -> "NystromGrid":
        return cls(2 * np.pi * np.arange(M) / M, np.full(M, 2 * np.pi / M), "periodic_trapezoid")

    @classmethod
    def gauss_legendre(cls, M: int, a: float, b: float) -> "NystromGrid":
        x, w = np.polynomial.legendre.leggauss(M)
        return cls(0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w, "gauss_legendre")


class FredholmResult(NamedTuple):
    value: LogValue
    error: float  # refinement delta (circle) or window-tail bound (half-plane)
    flagged: bool


def omega(spec: DiskEnsembleSpec, z):
    """``t0 log|z|^2 + sum_k (t_k (z^k - conj(z)^-k) - t_-k (conj(z)^k - z^-k))``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ValueError("omega is singular at z = 0")
    t = spec.times
    zb = z.conj()
    out = (
        spec.t0 * np.log(np.abs(z) ** 2)
        + xi(t.plus, z) - xi(t.plus, 1 / zb)
        - xi(t.minus, zb) + xi(t.minus, 1 / z)
    )
    if t.reality_locked:
        out = out.real
    return out if out.ndim else out[()]


def potential_V(spec: DiskEnsembleSpec, phi):
    """``V(phi) = 2 sum_{k != 0} sinh(eps k) t_k e^{i k phi}``, i.e. omega on the circle minus ``2 eps t0``."""
    phi = np.asarray(phi, dtype=float)
    t = spec.times
    out = np.zeros(phi.shape, dtype=complex)
    for k in range(1, t.K + 1):
        s = 2 * math.sinh(spec.epsilon * k)
        out += s * (t.plus[k] * np.exp(1j * k * phi) - t.minus[k] * np.exp(-1j * k * phi))
    if t.reality_locked:
        out = out.real
    return out if out.ndim else out[()]


def chemical_potential(spec: DiskEnsembleSpec) -> float:
    """``mu = 2 eps t0 - log(e^eps - e^-eps)``; diverges as eps -> 0."""
    eps = spec.epsilon
    if not eps > 0:
        raise ValueError("chemical potential diverges at epsilon <= 0")
    return 2 * eps * spec.t0 - math.log(2 * math.sinh(eps))


def fredholm_kernel_circle(spec: DiskEnsembleSpec, phi, phi_prime):
    """``K(phi, phi') = fugacity e^eps e^{omega(zeta)} / (z conj(zeta) - 1)``,
    ``z = e^{eps + i phi}``, ``zeta = e^{eps + i phi'}``."""
    eps = spec.epsilon
    z = np.exp(eps + 1j * np.asarray(phi, dtype=float))
    zeta = np.exp(eps + 1j * np.asarray(phi_prime, dtype=float))
    return spec.fugacity * math.exp(eps) * np.exp(omega(spec, zeta)) / (z * zeta.conj() - 1)


def circle_nystrom_matrix(spec: DiskEnsembleSpec, M: int) -> np.ndarray:
    """Symmetrised Nystrom matrix ``W^1/2 C W^1/2`` with ``C_ij = 1/(z_i conj z_j - 1)``.

    Similar to the plain discretisation ``K(phi_i, phi_j) 2pi/M``, so the
    determinant is the same; for real weights the matrix is Hermitian PSD.
    """
    grid = NystromGrid.periodic_trapezoid(M)
    z = np.exp(spec.epsilon + 1j * grid.nodes)
    a = spec.fugacity * math.exp(spec.epsilon) * np.exp(omega(spec, z)) * grid.weights
    r = np.sqrt(a.astype(complex))
    return r[:, None] * r[None, :] / (z[:, None] * z.conj()[None, :] - 1)


def fredholm_det_circle(spec: DiskEnsembleSpec, M: int = 256, tol: float = 1e-10) -> FredholmResult:
    """``det(1 + K)`` on M trapezoid nodes, with the M -> 2M relative change as error.

    ``flagged`` is set when that change exceeds ``tol``.
    """
    if M < 8:
        raise ValueError("need M >= 8")
    vals = [log_det(np.eye(m) + circle_nystrom_matrix(spec, m)) for m in (M, 2 * M)]
    delta = vals[0].relative_difference(vals[1])
    return FredholmResult(vals[0], delta, delta > tol)


def fredholm_series_bound(matrix: np.ndarray, N_max: int) -> float:
    """Bound on ``|det(1 + A) - sum_{N <= N_max} e_N(A)|``.

    ``|e_N(A)| <= ||A||_1^N / N!`` with ``||A||_1`` the nuclear norm, so the
    tail is at most ``sum_{N > N_max} s^N / N! = e^s P(N_max + 1, s)``.
    """
    s = float(np.sum(np.linalg.svd(matrix, compute_uv=False)))
    if s == 0:
        return 0.0
    return float(math.exp(s) * gammainc(N_max + 1, s))


def grand_expansion_circle(spec: DiskEnsembleSpec, N_max: int, M: int = 48, chunk: int = 200_000) -> list:
    """Terms ``N = 0..N_max`` of the grand partition sum on the circle:

    ``e^{mu N}/N! int prod_{j<k} |sin((phi_j-phi_k)/2) / sin((phi_j-phi_k+2i eps)/2)|^2
    prod_l e^{V(phi_l)} d phi_l``  (times ``fugacity^N``).

    Each N-fold integral is an M-point trapezoid tensor rule; the integrand
    vanishes on coincident nodes, so only M-choose-N subsets are summed.
    """
    if N_max > 5:
        raise ValueError("N_max must be <= 5")
    if N_max < 0:
        raise ValueError("N_max must be >= 0")
    eps = spec.epsilon
    grid = NystromGrid.periodic_trapezoid(M)
    phi = grid.nodes
    log_one = np.log(spec.fugacity) + chemical_potential(spec) + np.log(2 * np.pi / M) if spec.fugacity > 0 else -np.inf
    ev = np.exp(potential_V(spec, phi))
    alpha = phi[:, None] - phi[None, :]
    pair = np.abs(np.sin(alpha / 2)) ** 2 / np.abs(np.sin((alpha + 2j * eps) / 2)) ** 2
    terms = [LogValue.one()]
    for N in range(1, N_max + 1):
        if log_one == -np.inf:
            terms.append(LogValue.zero())
            continue
        total = 0j
        it = itertools.combinations(range(M), N)
        while True:
            block = np.array(list(itertools.islice(it, chunk)), dtype=np.intp).reshape(-1, N)
            if block.size == 0:
                break
            w = np.prod(ev[block], axis=1).astype(complex)
            for a in range(N):
                for b in range(a + 1, N):
                    w *= pair[block[:, a], block[:, b]]
            total += w.sum()
        terms.append(LogValue(N * log_one) * LogValue.from_complex(total))
    return terms


def image_energy_weight(zs) -> float:
    """``prod_{j<k} |(z_j - z_k)/(z_j conj(z_k) - 1)|^2 prod_l |z_l| / (|z_l|^2 - 1)``."""
    z = np.asarray(zs, dtype=complex).ravel()
    r2 = np.abs(z) ** 2
    if np.any(r2 <= 1):
        raise ValueError("all particles must lie outside the unit disk")
    out = float(np.prod(np.sqrt(r2) / (r2 - 1)))
    for j in range(z.size):
        for k in range(j + 1, z.size):
            out *= abs((z[j] - z[k]) / (z[j] * z[k].conjugate() - 1)) ** 2
    return out


def halfplane_weight(spec: HalfPlaneEnsembleSpec, x):
    """``damping(x) exp(xi(t, x + i eps) - xi(t, x - i eps))`` on the support line."""
    x = np.asarray(x, dtype=float)
    z = x + 1j * spec.epsilon
    return spec.damping(x) * np.exp(xi(spec.times, z) - xi(spec.times, z.conj()))


def halfplane_nystrom_matrix(spec: HalfPlaneEnsembleSpec, M: int) -> np.ndarray:
    """Symmetrised Nystrom matrix of ``K(x, x') = w(x') / (-i (x - x' + 2 i eps))``.

    The kernel ``i / (z - conj(zeta))`` has diagonal ``1/(2 eps) = 1/(2 Im z)``,
    so the first-order term reproduces the single-particle weight of the
    half-plane ensemble exactly; the Cauchy determinant of the same kernel
    gives the image-charge pair factors.
    """
    L = spec.window
    grid = NystromGrid.gauss_legendre(M, -L, L)
    x = grid.nodes
    a = grid.weights * halfplane_weight(spec, x)
    r = np.sqrt(a.astype(complex))
    return r[:, None] * r[None, :] / (-1j * (x[:, None] - x[None, :] + 2j * spec.epsilon))


def fredholm_det_halfplane(spec: HalfPlaneEnsembleSpec, M: int = 128, tail_tol: float = 1e-8) -> FredholmResult:
    """``det(1 + K)`` on M Gauss-Legendre nodes in ``[-window, window]``.

    ``error`` bounds the dropped first-order mass
    ``int_{|x| > window} |w(x)| / (2 eps) dx``; ``flagged`` when above ``tail_tol``.
    """
    if M < 16:
        raise ValueError("need M >= 16")
    val = log_det(np.eye(M) + halfplane_nystrom_matrix(spec, M))
    L = spec.window

    def f(x):
        return abs(halfplane_weight(spec, x)) / (2 * spec.epsilon)

    tail = 0.0
    for a, b in ((L, np.inf), (-np.inf, -L)):
        v, _ = integrate.quad(f, a, b, limit=200)
        tail += v
    return FredholmResult(val, tail, tail > tail_tol)


def disk_tau_family(epsilon: float, fugacity: float = 1.0, M: int = 128) -> Callable:
    """``n -> tau_n(t) = exp(-sum_k k t_k t_-k) det(1 + K)`` with ``t0 = n``.

    The exponential prefactor turns the grand partition function into the
    operator expectation value that obeys the Toda bilinear equations.
    """

    def tau(n, t):
        spec = DiskEnsembleSpec(epsilon, n, t, fugacity)
        det = log_det(np.eye(M) + circle_nystrom_matrix(spec, M))
        return LogValue.from_complex(np.exp(-t.sum_k_tk_tmk())) * det

    return tau

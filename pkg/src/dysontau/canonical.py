"""Canonical-ensemble tau functions of the 2D Dyson gas.

Four independent routes to ``tau_N(t_+, t_-)``:

* the Schur-function expansion for the Gaussian measure ``exp(-c|z|^2) d^2z``;
* the N x N Toeplitz determinant for particles on the unit circle;
* Monte Carlo (or exhaustive enumeration) of the N-fold Coulomb integral;
* tensor-grid quadrature of the N-fold contour integral on the circle.

plus :func:`hirota_residual`, the finite-difference check of the lowest
2D Toda bilinear equation.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gammaln

from .logvalue import LogValue, log_det
from .schur import enumerate_partitions, jacobi_trudi_indices, pochhammer, schur_from_indices
from .times import HalfTimeVector, TimeVector, as_half_times, xi

__all__ = [
    "MeasureSpec",
    "TimeVector",
    "HalfTimeVector",
    "xi",
    "gaussian_moment_h",
    "tau_gaussian_schur",
    "tau_integral_mc",
    "partition_ZN",
    "symbol_fourier",
    "symbol_coefficients",
    "tau_toeplitz",
    "unitary_integral_quadrature",
    "hirota_residual",
    "gaussian_tau_family",
    "toeplitz_tau_family",
    "ZeroTauError",
    "AliasingError",
    "ConvergenceWarning",
]


class ZeroTauError(ArithmeticError):
    """tau vanishes at the base point, so the Hirota residual is undefined."""


class AliasingError(ValueError):
    """The DFT grid is too coarse for the symbol."""


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class MeasureSpec:
    """Background measure ``d mu`` for the canonical integrals.

    Variants
    --------
    ``radial_gaussian``  ``exp(-c |z|^2) d^2 z``
    ``circle``           ``d phi / 2 pi`` on ``|z| = radius`` (unit mass)
    ``discrete``         ``sum_i weights[i] delta(z - points[i])``
    ``radial_custom``    ``exp(-U(|z|)) d^2 z``; sampled with a Gaussian
                         proposal of parameter ``c``
    """

    variant: str
    c: float = 1.0
    radius: float = 1.0
    points: tuple = ()
    weights: tuple = ()
    U: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.variant not in ("radial_gaussian", "circle", "discrete", "radial_custom"):
            raise ValueError(f"unknown measure variant {self.variant!r}")
        if self.variant in ("radial_gaussian", "radial_custom") and not self.c > 0:
            raise ValueError("Gaussian parameter c must be positive")
        if self.variant == "circle" and not self.radius > 0:
            raise ValueError("circle radius must be positive")
        if self.variant == "discrete":
            if len(self.points) != len(self.weights) or not self.points:
                raise ValueError("discrete measure needs matching non-empty points and weights")
            if any(not w > 0 for w in self.weights):
                raise ValueError("discrete weights must be positive")
            object.__setattr__(self, "points", tuple(complex(p) for p in self.points))
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.variant == "radial_custom" and self.U is None:
            raise ValueError("radial_custom needs U")

    @classmethod
    def radial_gaussian(cls, c: float = 1.0) -> "MeasureSpec":
        return cls("radial_gaussian", c=c)

    @classmethod
    def circle(cls, radius: float = 1.0) -> "MeasureSpec":
        return cls("circle", radius=radius)

    @classmethod
    def discrete(cls, points, weights) -> "MeasureSpec":
        return cls("discrete", points=tuple(points), weights=tuple(weights))

    @classmethod
    def radial_custom(cls, U: Callable, c: float = 1.0) -> "MeasureSpec":
        return cls("radial_custom", c=c, U=U)


def gaussian_moment_h(n: int, c: float) -> LogValue:
    """``h_n = int |z|^{2n} exp(-c|z|^2) d^2z = pi c^{-n-1} n!``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if not c > 0:
        raise ValueError("c must be positive")
    return LogValue(math.log(math.pi) - (n + 1) * math.log(c) + float(gammaln(n + 1)))


# ---------------------------------------------------------------- Schur route


class SchurTau(NamedTuple):
    value: LogValue
    last_shell: float  # sum of |terms| in the top weight shell / |partial sum|


@lru_cache(maxsize=128)
def _schur_terms(N: int, cutoff: int):
    diagrams = tuple(d for d in enumerate_partitions(cutoff, max_length=N) if pochhammer(d, N) != 0)
    weights = np.array([d.weight for d in diagrams])
    poch = np.array([float(pochhammer(d, N)) for d in diagrams])
    return jacobi_trudi_indices(diagrams), weights, poch


def tau_gaussian_schur(N: int, c: float, t: TimeVector, cutoff: int) -> SchurTau:
    """Schur expansion of tau_N for ``d mu = exp(-c|z|^2) d^2z``.

    ``tau_N = pi^N c^{-N(N+1)/2} prod_{k<=N} Gamma(k)
    * sum_lambda c^{-|lambda|} (N)_lambda s_lambda(t_+) s_lambda(-t_-)``,
    summed over ``|lambda| <= cutoff``. Diagrams longer than N drop out
    through ``(N)_lambda``.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    if N < 0:
        return SchurTau(LogValue.zero(), 0.0)
    if N == 0:
        return SchurTau(LogValue.one(), 0.0)
    if not isinstance(t, TimeVector):
        raise TypeError("t must be a TimeVector")
    idx, weights, poch = _schur_terms(N, cutoff)
    s_plus = schur_from_indices(idx, t.plus)
    s_minus = schur_from_indices(idx, -t.minus)
    terms = poch * c ** (-weights.astype(float)) * s_plus * s_minus
    total = complex(terms.sum())
    # shell sums of |term|: signed shells can cancel and mimic growth
    mags = np.zeros(cutoff + 1)
    np.add.at(mags, weights, np.abs(terms))
    last = float(mags[-1] / abs(total)) if total != 0 else math.inf
    # pairs of adjacent shells, since odd and even weights can decay at different rates
    if cutoff >= 4 and mags[-1] > 1e-15 * abs(total):
        top, below = mags[-1] + mags[-2], mags[-3] + mags[-4]
        if top > below:
            warnings.warn(
                f"Schur shells not decreasing at cutoff {cutoff} (last pair {top:.3g} > {below:.3g})",
                ConvergenceWarning,
                stacklevel=2,
            )
    log_pref = N * math.log(math.pi) - 0.5 * N * (N + 1) * math.log(c) + float(np.sum(gammaln(np.arange(1, N + 1))))
    return SchurTau(LogValue(log_pref) * LogValue.from_complex(total), last)


# ---------------------------------------------------------- Monte Carlo route


class MCEstimate(NamedTuple):
    value: LogValue
    stderr: float

    @property
    def rel_stderr(self) -> float:
        mag = abs(self.value.to_complex())
        return self.stderr / mag if mag else math.inf


def _log_vandermonde_sq(z: np.ndarray) -> np.ndarray:
    """``log |Delta_N(z)|^2`` along the last axis."""
    N = z.shape[-1]
    out = np.zeros(z.shape[:-1])
    for i in range(N):
        for j in range(i + 1, N):
            out += 2 * np.log(np.abs(z[..., i] - z[..., j]))
    return out


def _log_time_weight(z: np.ndarray, t: TimeVector) -> np.ndarray:
    return np.sum(xi(t.plus, z) - xi(t.minus, z.conj()), axis=-1)


def _log_potential_weight(z: np.ndarray, t: TimeVector) -> np.ndarray:
    """The same factor written as ``2 Re sum_k t_k z^k`` (reality-locked form)."""
    return np.sum(2 * np.real(xi(t.plus, z)), axis=-1)


def _draw(measure: MeasureSpec, N: int, rng: np.random.Generator, size: int):
    """Samples from the proposal and the log of (base measure / proposal density)."""
    if measure.variant in ("radial_gaussian", "radial_custom"):
        s = math.sqrt(0.5 / measure.c)
        z = rng.normal(scale=s, size=(size, N)) + 1j * rng.normal(scale=s, size=(size, N))
        log_base = np.full(size, N * math.log(math.pi / measure.c))
        if measure.variant == "radial_custom":
            r = np.abs(z)
            log_base = log_base + np.sum(-np.asarray(measure.U(r), dtype=float) + measure.c * r**2, axis=-1)
        return z, log_base
    if measure.variant == "circle":
        theta = rng.uniform(0, 2 * math.pi, size=(size, N))
        return measure.radius * np.exp(1j * theta), np.zeros(size)
    raise ValueError(f"no sampler for measure {measure.variant!r}")


def _enumerate_discrete(N: int, measure: MeasureSpec, log_factor) -> LogValue:
    pts = np.array(measure.points)
    logw = np.log(np.array(measure.weights))
    if N > len(pts):
        return LogValue.zero()
    # coincident points kill |Delta|^2, so only N-subsets survive and the 1/N! cancels
    combos = np.array(list(itertools.combinations(range(len(pts)), N)))
    z = pts[combos]
    lw = _log_vandermonde_sq(z) + logw[combos].sum(axis=-1) + log_factor(z)
    ref = float(np.max(lw.real))
    total = complex(np.sum(np.exp(lw - ref)))
    return LogValue(ref) * LogValue.from_complex(total)


def _mc_core(N, measure, t, log_factor, samples, seed, batches, threads, check_positive):
    if measure.variant == "discrete":
        return MCEstimate(_enumerate_discrete(N, measure, log_factor), 0.0)
    if samples < batches:
        raise ValueError(f"need at least {batches} samples for batch means")
    sizes = np.full(batches, samples // batches)
    sizes[: samples % batches] += 1
    streams = np.random.SeedSequence(seed).spawn(batches)

    def run(b):
        rng = np.random.default_rng(streams[b])
        z, log_base = _draw(measure, N, rng, int(sizes[b]))
        return _log_vandermonde_sq(z) + log_base + log_factor(z)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            logs = list(ex.map(run, range(batches)))
    else:
        logs = [run(b) for b in range(batches)]
    ref = max(float(np.max(lw.real)) for lw in logs)
    means = np.array([np.mean(np.exp(lw - ref)) for lw in logs])
    if check_positive:
        for lw in logs:
            if np.any(np.abs(np.sin(lw.imag)) > 1e-10) or np.any(np.cos(lw.imag) < 0):
                raise AssertionError("reality-locked integrand produced a non-positive sample")
    mean = complex(np.sum(means * sizes) / samples)
    var = np.var(means.real, ddof=1) + np.var(means.imag, ddof=1)
    stderr_scaled = math.sqrt(var / batches)
    log_norm = -float(gammaln(N + 1)) + ref
    value = LogValue(log_norm) * LogValue.from_complex(mean)
    stderr = math.exp(log_norm) * stderr_scaled if log_norm < 700 else math.inf
    return MCEstimate(value, stderr)


def tau_integral_mc(
    N: int,
    measure: MeasureSpec,
    t: TimeVector,
    samples: int,
    seed: int,
    batches: int = 32,
    threads: int = 1,
) -> MCEstimate:
    """Monte Carlo estimate of
    ``(1/N!) int |Delta_N|^2 prod exp(xi(t_+, z_l) - xi(t_-, conj z_l)) d mu(z_l)``.

    The proposal is the base measure itself (Gaussian or uniform angle), so
    the Vandermonde and time factors are the importance weights. The
    standard error comes from ``batches`` batch means, each on its own
    spawned RNG stream; the result depends only on (seed, samples, batches).
    Discrete measures are summed exhaustively and report ``stderr = 0``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return _mc_core(
        N, measure, t, lambda z: _log_time_weight(z, t), samples, seed, batches, threads,
        check_positive=t.reality_locked,
    )


def partition_ZN(
    N: int,
    measure: MeasureSpec,
    t: TimeVector,
    samples: int,
    seed: int,
    batches: int = 32,
    threads: int = 1,
) -> MCEstimate:
    """Coulomb gas partition function with potential ``W = -U + 2 Re sum t_k z^k``.

    Evaluated on the same random stream as :func:`tau_integral_mc`; the two
    parameterisations must agree, which is asserted.
    """
    if not t.satisfies_reality():
        raise ValueError("partition_ZN needs t_-k = -conj(t_k)")
    z_form = _mc_core(
        N, measure, t, lambda z: _log_potential_weight(z, t), samples, seed, batches, threads,
        check_positive=True,
    )
    tau_form = tau_integral_mc(N, measure, t, samples, seed, batches, threads)
    if z_form.value.relative_difference(tau_form.value) > 1e-12:
        raise AssertionError("W-parameterisation disagrees with the tau integrand")
    return z_form


# -------------------------------------------------------------- circle route


def _symbol_values(t: TimeVector, n_grid: int) -> np.ndarray:
    z = np.exp(2j * np.pi * np.arange(n_grid) / n_grid)
    return np.exp(xi(t.plus, z) - xi(t.minus, 1 / z))


def symbol_coefficients(t: TimeVector, n_grid: int, tail_tol: float = 1e-13) -> np.ndarray:
    """All DFT coefficients of ``exp(xi(t_+, e^{i theta}) - xi(t_-, e^{-i theta}))``.

    Entry ``k mod n_grid`` holds the k-th Fourier coefficient. Raises
    :class:`AliasingError` unless the coefficients near the Nyquist index
    are below ``tail_tol`` relative to the largest one.
    """
    if n_grid < 4 or n_grid & (n_grid - 1):
        raise ValueError("n_grid must be a power of two >= 4")
    coef = np.fft.fft(_symbol_values(t, n_grid)) / n_grid
    mags = np.abs(coef)
    k = np.abs(np.fft.fftfreq(n_grid, 1 / n_grid))
    tail = mags[k >= 3 * n_grid // 8]
    if tail.size and tail.max() > tail_tol * mags.max():
        raise AliasingError(f"n_grid={n_grid} too small: tail coefficient {tail.max():.2e}")
    return coef


def symbol_fourier(t: TimeVector, k: int, n_grid: int) -> complex:
    """k-th Fourier coefficient of the circle symbol by the trapezoid rule."""
    if n_grid < 4 * (t.K + abs(k)):
        raise AliasingError(f"n_grid={n_grid} below 4*(support + |k|)")
    return complex(symbol_coefficients(t, n_grid)[k % n_grid])


def _auto_grid(t: TimeVector, N: int, n_grid: int | None) -> tuple:
    if n_grid is not None:
        if n_grid < 4 * (t.K + N):
            raise AliasingError(f"n_grid={n_grid} below 4*(support + N)")
        return n_grid, symbol_coefficients(t, n_grid)
    n = 64
    while n < 4 * (t.K + N):
        n *= 2
    while True:
        try:
            return n, symbol_coefficients(t, n)
        except AliasingError:
            if n >= 1 << 20:
                raise
            n *= 2


def tau_toeplitz(N: int, t: TimeVector, n_grid: int | None = None) -> LogValue:
    """``det_{0<=j,k<N} c_{k-j}`` with ``c_m`` the symbol's Fourier coefficients.

    This is the unitary-ensemble (circle) tau function. ``n_grid=None``
    picks the smallest power of two that passes the aliasing guard.
    """
    if N < 0:
        return LogValue.zero()
    if N == 0:
        return LogValue.one()
    n, coef = _auto_grid(t, N, n_grid)
    j = np.arange(N)
    m = coef[(j[None, :] - j[:, None]) % n]
    return log_det(m)


def unitary_integral_quadrature(N: int, t: TimeVector, n_nodes: int = 32) -> LogValue:
    """Tensor-grid trapezoid evaluation of the N-fold contour integral

    ``(1/N!) oint ... prod_{j<k} (z_j - z_k)(1/z_j - 1/z_k)
    prod_l exp(xi(t_+, z_l) - xi(t_-, 1/z_l)) dz_l / (2 pi i z_l)``.

    Costs ``n_nodes**N``; intended as an independent check for N <= 3.
    """
    if N < 0:
        return LogValue.zero()
    if N == 0:
        return LogValue.one()
    z1 = np.exp(2j * np.pi * np.arange(n_nodes) / n_nodes)
    sym = np.exp(xi(t.plus, z1) - xi(t.minus, 1 / z1))
    grids = np.meshgrid(*([np.arange(n_nodes)] * N), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=-1)
    z = z1[idx]
    vdm = np.ones(idx.shape[0], dtype=complex)
    for a in range(N):
        for b in range(a + 1, N):
            vdm *= (z[:, a] - z[:, b]) * (1 / z[:, a] - 1 / z[:, b])
    total = np.sum(vdm * np.prod(sym[idx], axis=-1)) / n_nodes**N / math.factorial(N)
    return LogValue.from_complex(total)


# --------------------------------------------------------------------- Hirota


def _log_continuous(v: LogValue, ref_phase: float) -> complex:
    ph = v.phase + 2 * math.pi * round((ref_phase - v.phase) / (2 * math.pi))
    return complex(v.log_magnitude, ph)


def hirota_residual(
    tau_family: Callable[[int, TimeVector], LogValue],
    n: int,
    t: TimeVector,
    step: float = 1e-3,
    floor: float = 1e-300,
) -> float:
    """Relative residual of ``d1 tau_n d-1 tau_n - tau_n d1 d-1 tau_n = tau_{n+1} tau_{n-1}``.

    Derivatives are taken on log tau by central differences on the 3 x 3
    (t_1, t_-1) stencil at ``step`` and ``step/2`` with one Richardson step.
    Dividing by ``tau_n^2`` the identity reads ``-d1 d-1 log tau_n =
    tau_{n+1} tau_{n-1} / tau_n^2``; the residual is
    ``|lhs - rhs| / (|lhs| + |rhs| + floor)``, except when ``rhs == 0``
    (e.g. ``tau_{-1} = 0``) where ``|lhs|`` itself is returned.

    Raises :class:`ZeroTauError` if ``tau_n(t) == 0``.
    """
    base = tau_family(n, t)
    if base.is_zero:
        raise ZeroTauError(f"tau_{n} vanishes at the base point")
    L0 = base.log()

    def mixed(h):
        vals = {}
        for a in (-1, 1):
            for b in (-1, 1):
                vals[a, b] = _log_continuous(tau_family(n, t.shifted(a * h, b * h)), base.phase) - L0
        return (vals[1, 1] - vals[1, -1] - vals[-1, 1] + vals[-1, -1]) / (4 * h * h)

    d_mixed = (4 * mixed(step / 2) - mixed(step)) / 3
    lhs = -d_mixed
    up, down = tau_family(n + 1, t), tau_family(n - 1, t)
    if up.is_zero or down.is_zero:
        return float(abs(lhs))
    rhs = np.exp(up.log() + down.log() - 2 * L0)
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs) + floor))


def gaussian_tau_family(c: float = 1.0, cutoff: int = 60) -> Callable[[int, TimeVector], LogValue]:
    def tau(n, t):
        return tau_gaussian_schur(n, c, t, cutoff).value

    return tau


def toeplitz_tau_family(n_grid: int | None = None) -> Callable[[int, TimeVector], LogValue]:
    def tau(n, t):
        return tau_toeplitz(n, t, n_grid)

    return tau

"""Dispersionless data: harmonic moments, electrostatic energies, asymptotics.

Domains are either analytic shapes (disk, half-disk attached to the real
axis) or boolean masks on a uniform grid. Moments of analytic shapes use
polar product rules; masks use the midpoint rule. Energies are computed on
a raster of cell-coverage fractions by FFT convolution with the exact
integral of ``log|z|`` over a square cell, so the logarithmic singularity
is integrated analytically rather than sampled.

Exterior moments ``int_{C \\ D} z^{-k} sigma`` are turned into integrals
over D with a smooth radial cutoff ``chi`` that vanishes near the origin
and equals one outside a disk contained in D: for a radial density the
integral of ``z^{-k} chi`` over the whole plane vanishes by the angular
integration, leaving ``-int_D z^{-k} chi sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve
from scipy.special import gammaln

from .canonical import tau_gaussian_schur
from .times import TimeVector


class NonConvergentMomentError(ValueError):
    """Exterior moment integral does not converge for this domain/density."""


# ------------------------------------------------------------------ density


@dataclass(frozen=True)
class ChargeDensity:
    """Positive background density ``sigma(z)``.

    ``func=None`` means the constant ``value``; ``radial`` declares that
    ``func`` depends on ``|z|`` only, which the exterior-moment reduction uses.
    """

    func: Callable | None = None
    value: float = 1.0 / np.pi
    radial: bool = False

    def __post_init__(self):
        if self.func is None and not self.value > 0:
            raise ValueError("sigma must be positive")

    @property
    def is_constant(self) -> bool:
        return self.func is None

    @property
    def is_radial(self) -> bool:
        return self.func is None or self.radial

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.func is None:
            return np.full(z.shape, self.value)
        s = np.asarray(self.func(z), dtype=float)
        if np.any(s <= 0):
            raise ValueError("sigma must be positive on the domain")
        return s

    def scaled(self, lam: float) -> "ChargeDensity":
        if self.func is None:
            return ChargeDensity(None, self.value * lam)
        f = self.func
        return ChargeDensity(lambda z: lam * f(z), radial=self.radial)


# ------------------------------------------------------------------- domain


@dataclass(frozen=True)
class DomainSpec:
    """``variant`` is ``"disk"``, ``"half_disk"`` or ``"mask"``.

    Masks are indexed ``mask[iy, ix]`` with row 0 at the bottom; cell
    ``(iy, ix)`` covers ``[ox + ix h, ox + (ix+1) h] x [oy + iy h, oy + (iy+1) h]``.
    """

    variant: str
    radius: float = 0.0
    center: complex = 0j
    mask: np.ndarray | None = field(default=None, compare=False)
    h: float = 0.0
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.variant in ("disk", "half_disk"):
            if not self.radius >= 0:
                raise ValueError("radius must be non-negative")
            if self.variant == "half_disk" and complex(self.center).imag != 0:
                raise ValueError("half-disk centre must lie on the real axis")
        elif self.variant == "mask":
            m = np.asarray(self.mask, dtype=bool)
            if m.ndim != 2 or not self.h > 0:
                raise ValueError("mask must be 2-D with positive cell size")
            m = m.copy()
            m.setflags(write=False)
            object.__setattr__(self, "mask", m)
        else:
            raise ValueError(f"unknown domain variant {self.variant!r}")

    @classmethod
    def disk(cls, radius: float, center: complex = 0j) -> "DomainSpec":
        return cls("disk", radius=float(radius), center=complex(center))

    @classmethod
    def half_disk(cls, radius: float, center: float = 0.0) -> "DomainSpec":
        """Upper half of the disk of given radius centred on the real axis."""
        return cls("half_disk", radius=float(radius), center=complex(center))

    @classmethod
    def from_mask(cls, mask, h: float, origin=(0.0, 0.0)) -> "DomainSpec":
        return cls("mask", mask=np.asarray(mask, dtype=bool), h=float(h), origin=tuple(map(float, origin)))

    @classmethod
    def from_bitmap(cls, source) -> "DomainSpec":
        """Parse the plain-text bitmap format (see ``docs/bitmap.md``)."""
        text = Path(source).read_text() if isinstance(source, Path) or "\n" not in str(source) else str(source)
        return parse_bitmap(text)

    def mirrored(self) -> "DomainSpec":
        """Reflection ``z -> -conj(z)`` across the imaginary axis."""
        if self.variant == "mask":
            nx = self.mask.shape[1]
            ox, oy = self.origin
            return DomainSpec.from_mask(self.mask[:, ::-1], self.h, (-(ox + nx * self.h), oy))
        return DomainSpec(self.variant, self.radius, -np.conj(self.center))

    @property
    def is_empty(self) -> bool:
        if self.variant == "mask":
            return not self.mask.any()
        return self.radius == 0

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        if self.variant == "disk":
            return np.abs(z - self.center) < self.radius
        if self.variant == "half_disk":
            return (np.abs(z - self.center) < self.radius) & (z.imag > 0)
        ox, oy = self.origin
        ix = np.floor((z.real - ox) / self.h).astype(int)
        iy = np.floor((z.imag - oy) / self.h).astype(int)
        ny, nx = self.mask.shape
        ok = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
        out = np.zeros(z.shape, dtype=bool)
        out[ok] = self.mask[iy[ok], ix[ok]]
        return out

    def bbox(self):
        """``(xmin, xmax, ymin, ymax)``."""
        if self.variant == "mask":
            ny, nx = self.mask.shape
            ox, oy = self.origin
            return ox, ox + nx * self.h, oy, oy + ny * self.h
        c, r = complex(self.center), self.radius
        ymin = c.imag if self.variant == "half_disk" else c.imag - r
        return c.real - r, c.real + r, ymin, c.imag + r

    def in_closed_upper_half_plane(self) -> bool:
        if self.variant == "mask":
            ny, _ = self.mask.shape
            oy = self.origin[1]
            rows_below = int(np.clip(np.ceil(-oy / self.h - 1e-12), 0, ny))
            return not self.mask[:rows_below].any()
        return self.bbox()[2] >= 0

    def origin_clearance(self, half_plane: bool = False) -> float:
        """Radius of a disk about 0 inside the domain (0 if there is none).

        With ``half_plane`` it is the radius of the upper half-disk about 0
        contained in the domain.
        """
        if self.variant == "disk":
            return max(self.radius - abs(self.center), 0.0)
        if self.variant == "half_disk":
            return max(self.radius - abs(self.center.real), 0.0) if half_plane else 0.0
        ox, oy = self.origin
        ny, nx = self.mask.shape
        xs = ox + self.h * np.arange(nx + 1)
        ys = oy + self.h * np.arange(ny + 1)
        # nearest point of every uncovered cell, plus the box boundary
        x_lo, x_hi = xs[:-1][None, :], xs[1:][None, :]
        y_lo, y_hi = ys[:-1][:, None], ys[1:][:, None]
        dx = np.maximum(np.maximum(x_lo, -x_hi), 0.0)
        dy = np.maximum(np.maximum(y_lo, -y_hi), 0.0)
        dist = np.hypot(dx, dy)
        if half_plane:
            dist = np.where(y_hi > 0, dist, np.inf)
        holes = dist[~self.mask]
        box = min(-xs[0], xs[-1], ys[-1], np.inf if half_plane else -ys[0])
        rho = min(holes.min() if holes.size else np.inf, box)
        return max(float(rho), 0.0)


def parse_bitmap(text: str) -> DomainSpec:
    """Read ``h:``/``origin:`` headers and rows of ``#``/``1`` (inside) and
    ``.``/``0`` (outside); the first row is the top of the picture."""
    h = None
    origin = (0.0, 0.0)
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if ":" in line:
            key, _, val = line.partition(":")
            key = key.strip().lower()
            if key == "h":
                h = float(val)
            elif key == "origin":
                parts = val.replace(",", " ").split()
                if len(parts) != 2:
                    raise ValueError("origin needs two numbers")
                origin = (float(parts[0]), float(parts[1]))
            else:
                raise ValueError(f"unknown bitmap header {key!r}")
            continue
        bad = set(line) - set("#1.0")
        if bad:
            raise ValueError(f"unexpected bitmap characters {sorted(bad)}")
        rows.append([ch in "#1" for ch in line])
    if h is None:
        raise ValueError("bitmap needs an 'h:' header")
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("bitmap rows must be non-empty and of equal length")
    return DomainSpec.from_mask(np.array(rows[::-1], dtype=bool), h, origin)


# ------------------------------------------------------------- quadrature


def domain_rule(D: DomainSpec, h: float):
    """Nodes and weights for ``int_D f d^2z`` at resolution about h."""
    if D.is_empty:
        return np.zeros(0, dtype=complex), np.zeros(0)
    if D.variant == "mask":
        factor = max(int(round(D.h / h)), 1)
        m = np.kron(D.mask, np.ones((factor, factor), dtype=bool))
        hh = D.h / factor
        iy, ix = np.nonzero(m)
        ox, oy = D.origin
        z = (ox + (ix + 0.5) * hh) + 1j * (oy + (iy + 0.5) * hh)
        return z, np.full(z.size, hh * hh)
    r = D.radius
    n_r = max(int(np.ceil(r / h)), 8)
    x, w = np.polynomial.legendre.leggauss(n_r)
    rad = 0.5 * r * (x + 1)
    wr = 0.5 * r * w * rad
    if D.variant == "disk":
        n_t = max(int(np.ceil(2 * np.pi * r / h)), 16)
        th = 2 * np.pi * np.arange(n_t) / n_t
        wt = np.full(n_t, 2 * np.pi / n_t)
    else:
        n_t = max(int(np.ceil(np.pi * r / h)), 16)
        xt, wt = np.polynomial.legendre.leggauss(n_t)
        th = 0.5 * np.pi * (xt + 1)
        wt = 0.5 * np.pi * wt
    z = D.center + rad[:, None] * np.exp(1j * th[None, :])
    return z.ravel(), (wr[:, None] * wt[None, :]).ravel()


def _cutoff(r, a: float, b: float):
    """C-infinity step: 0 for r <= a, 1 for r >= b."""
    x = np.clip((np.asarray(r, dtype=float) - a) / (b - a), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1)), 0.0)
        g = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1 - x, 1)), 0.0)
    return f / (f + g)


class HarmonicMoments(NamedTuple):
    T0: float
    T: np.ndarray  # T[k-1] = T_k
    error: np.ndarray  # refinement estimate, index 0 for T0
    flagged: bool


def _plane_integral_general(sigma, k, a, b, R_out, n_r=400, n_t=256):
    """``int_{|z|<R_out} z^{-k} chi(|z|) sigma`` by a polar rule (non-radial sigma)."""
    x, w = np.polynomial.legendre.leggauss(n_r)
    # logarithmic radial variable keeps the rule accurate over many decades
    lo, hi = np.log(a), np.log(R_out)
    s = 0.5 * (hi - lo) * (x + 1) + lo
    rad = np.exp(s)
    wr = 0.5 * (hi - lo) * w * rad * rad
    th = 2 * np.pi * np.arange(n_t) / n_t
    z = rad[:, None] * np.exp(1j * th[None, :])
    vals = z ** (-k) * _cutoff(rad, a, b)[:, None] * sigma(z)
    return complex(np.sum(vals * wr[:, None]) * 2 * np.pi / n_t)


def harmonic_moments(D: DomainSpec, sigma: ChargeDensity | None = None, k_max: int = 4, h: float = 0.01,
                     tail_tol: float = 1e-8) -> HarmonicMoments:
    """``T0 = int_D sigma`` and ``T_k = -(1/k) int_{C \\ D} z^{-k} sigma``.

    The origin must be an interior point of D. Errors are the change
    between resolutions h and 2h. For a non-radial density the whole-plane
    term is integrated numerically out to a large radius; it is flagged when
    doubling that radius moves it by more than ``tail_tol``.
    """
    sigma = sigma or ChargeDensity()
    rho = D.origin_clearance()
    if rho <= 0:
        raise NonConvergentMomentError("exterior moments need the origin inside the domain")
    a, b = rho / 4, rho / 2
    flagged = False

    def run(step):
        z, w = domain_rule(D, step)
        s = sigma(z) * w
        T0 = float(np.sum(s))
        chi = _cutoff(np.abs(z), a, b)
        T = np.empty(k_max, dtype=complex)
        for k in range(1, k_max + 1):
            T[k - 1] = np.sum(z ** (-k) * chi * s) / k
        return T0, T

    T0, T = run(h)
    T0c, Tc = run(2 * h)
    err = np.concatenate([[abs(T0 - T0c)], np.abs(T - Tc)])
    if not sigma.is_radial:
        x0, x1, y0, y1 = D.bbox()
        R = 8 * max(abs(x0), abs(x1), abs(y0), abs(y1))
        for k in range(1, k_max + 1):
            full = _plane_integral_general(sigma, k, a, b, R)
            full2 = _plane_integral_general(sigma, k, a, b, 2 * R)
            tail = abs(full2 - full)
            T[k - 1] -= full2 / k
            err[k] += tail / k
            flagged |= tail > tail_tol
    return HarmonicMoments(T0, T, err, bool(flagged))


def fatslit_moments(B: DomainSpec, sigma: ChargeDensity | None = None, k_max: int = 4, h: float = 0.01):
    """``T1 = -2i int_B sigma`` and ``T_k = (2i/k) Im int_{H \\ B} z^{-k} sigma`` (k >= 2).

    Convergence at the origin needs B to contain a half-disk about 0; a
    radial density is required for the half-plane term. The integral
    defining T1 is real, so it is carried as ``-2i`` times that integral.
    """
    sigma = sigma or ChargeDensity()
    if not B.in_closed_upper_half_plane():
        raise ValueError("fat slit protrudes below the real axis")
    T = np.zeros(k_max, dtype=complex)
    err = np.zeros(k_max)
    if B.is_empty:
        return HarmonicMoments(0.0, T, np.zeros(k_max + 1), False)
    if not sigma.is_radial:
        raise NonConvergentMomentError("half-plane moments need a radial density")

    def run(step):
        z, w = domain_rule(B, step)
        s = sigma(z) * w
        out = np.zeros(k_max, dtype=complex)
        out[0] = -2j * np.sum(s)
        if k_max >= 2:
            rho = B.origin_clearance(half_plane=True)
            if rho <= 0:
                raise NonConvergentMomentError("fat-slit moments need B to contain a half-disk about 0")
            a, b = rho / 4, rho / 2
            chi = _cutoff(np.abs(z), a, b)
            for k in range(2, k_max + 1):
                ang = (1 - (-1) ** k) / (1j * k)
                if ang:
                    radial, _ = integrate.quad(
                        lambda r: _cutoff(r, a, b) * float(sigma(np.array(r))) * r ** (1 - k), a, np.inf, limit=200
                    )
                else:
                    radial = 0.0
                outside = ang * radial - np.sum(z ** (-k) * chi * s)
                out[k - 1] = 2j / k * outside.imag
        return out

    T = run(h)
    Tc = run(2 * h)
    err = np.concatenate([[abs(T[0] - Tc[0]) / 2], np.abs(T - Tc)])
    assert np.all(T.real == 0)
    return HarmonicMoments(float(abs(T[0]) / 2), T, err, False)


# ------------------------------------------------------------ energies


def _cell_log_primitive(x, y):
    """``int_0^x int_0^y log sqrt(u^2 + v^2) dv du``."""
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(r2 > 0, x * y * (np.log(np.where(r2 > 0, r2, 1.0)) - 3.0), 0.0)
        b = np.where(x != 0, x * x * np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
        c = np.where(y != 0, y * y * np.arctan(x / np.where(y != 0, y, 1.0)), 0.0)
    return 0.5 * (a + b + c)


def cell_log_integral(cx, cy, h: float):
    """Exact ``int log|zeta|`` over the square of side h centred at (cx, cy)."""
    x1, x2 = cx - h / 2, cx + h / 2
    y1, y2 = cy - h / 2, cy + h / 2
    P = _cell_log_primitive
    return P(x2, y2) - P(x1, y2) - P(x2, y1) + P(x1, y1)


class Raster(NamedTuple):
    rho: np.ndarray  # sigma times covered fraction, rows from the bottom
    x0: float
    y0: float
    h: float

    def centers(self):
        ny, nx = self.rho.shape
        x = self.x0 + (np.arange(nx) + 0.5) * self.h
        y = self.y0 + (np.arange(ny) + 0.5) * self.h
        return x[None, :] + 1j * y[:, None]


def _quadrant_disk_area(x, y, r: float):
    """Signed area of ``[0, x] x [0, y]`` inside the disk of radius r about 0."""
    sx, sy = np.sign(x), np.sign(y)
    x = np.minimum(np.abs(x), r)
    y = np.minimum(np.abs(y), r)
    ustar = np.sqrt(np.maximum(r * r - y * y, 0.0))
    F = lambda u: 0.5 * (u * np.sqrt(np.maximum(r * r - u * u, 0.0)) + r * r * np.arcsin(u / r))
    inside = x * x + y * y <= r * r
    area = np.where(inside, x * y, y * ustar + F(x) - F(np.minimum(ustar, x)))
    return sx * sy * area


def _disk_coverage(D: DomainSpec, xe: np.ndarray, ye: np.ndarray) -> np.ndarray:
    """Exact covered fraction of each cell for the disk variants."""
    c, r = complex(D.center), D.radius
    h = xe[1] - xe[0]
    x = (xe - c.real)[None, :]
    y = (ye - c.imag)[:, None]
    if D.variant == "half_disk":
        y = np.maximum(y, 0.0)
    Q = _quadrant_disk_area(x, y, r)
    return np.clip((Q[1:, 1:] - Q[1:, :-1] - Q[:-1, 1:] + Q[:-1, :-1]) / (h * h), 0.0, 1.0)


def rasterize(D: DomainSpec, sigma: ChargeDensity, h: float) -> Raster:
    """Coverage fractions on a grid whose lines sit at integer multiples of h.

    Disk coverage is exact; a mask must be commensurate with h.
    """
    if D.variant == "mask":
        factor = D.h / h
        ox, oy = D.origin
        if factor >= 1 and abs(factor - round(factor)) < 1e-9:
            f = int(round(factor))
            cov = np.kron(D.mask, np.ones((f, f))).astype(float)
        elif factor < 1 and abs(1 / factor - round(1 / factor)) < 1e-9:
            f = int(round(1 / factor))
            ny, nx = D.mask.shape
            m = np.zeros((-(-ny // f) * f, -(-nx // f) * f))
            m[:ny, :nx] = D.mask
            cov = m.reshape(m.shape[0] // f, f, m.shape[1] // f, f).mean(axis=(1, 3))
        else:
            raise ValueError("mask resolution must be an integer multiple or divisor of h")
        r = Raster(cov, ox, oy, h)
        return Raster(cov * sigma(r.centers()), ox, oy, h)
    x0, x1, y0, y1 = D.bbox()
    i0, i1 = int(np.floor(x0 / h)), int(np.ceil(x1 / h))
    j0, j1 = int(np.floor(y0 / h + 1e-12)), int(np.ceil(y1 / h))
    cov = _disk_coverage(D, np.arange(i0, i1 + 1) * h, np.arange(j0, j1 + 1) * h)
    r = Raster(cov, i0 * h, j0 * h, h)
    return Raster(cov * sigma(r.centers()), r.x0, r.y0, h)


def _log_potential(rho: np.ndarray, h: float) -> np.ndarray:
    """``int log|c - zeta| rho(zeta) d^2 zeta`` at every cell centre c."""
    ny, nx = rho.shape
    mx = np.arange(-(nx - 1), nx) * h
    my = np.arange(-(ny - 1), ny) * h
    K = cell_log_integral(mx[None, :], my[:, None], h)
    return fftconvolve(rho, K, mode="same")


class EnergyResult(NamedTuple):
    value: float
    error: float


def _F0_raster(r: Raster) -> float:
    h = r.h
    U = _log_potential(r.rho, h)
    E = np.sum(r.rho * U) * h * h
    c = r.centers()
    L = np.sum(r.rho * cell_log_integral(c.real, c.imag, h))
    T0 = np.sum(r.rho) * h * h
    return float(-E + 2 * T0 * L)


def F0_energy(D: DomainSpec, sigma: ChargeDensity | None = None, h: float = 0.005) -> EnergyResult:
    """``F0 = -int_D int_D sigma log|1/z - 1/zeta| sigma``.

    The kernel is split as ``log|z - zeta| - log|z| - log|zeta|``. The error
    is the change between resolutions h and 2h.
    """
    sigma = sigma or ChargeDensity()
    if not bool(D.contains(0j)):
        raise ValueError("the origin must lie in the domain")
    f = _F0_raster(rasterize(D, sigma, h))
    fc = _F0_raster(rasterize(D, sigma, 2 * h))
    return EnergyResult(f, abs(f - fc))


def _F0_tilde_raster(r: Raster) -> float:
    if r.rho.size == 0 or not r.rho.any():
        return 0.0
    h = r.h
    j0 = int(round(r.y0 / h))
    ny, nx = r.rho.shape
    top = j0 + ny
    up = np.zeros((top, nx))
    up[j0:] = r.rho
    # density minus its mirror image in the lower half-plane
    signed = np.vstack([-up[::-1], up])
    U = _log_potential(signed, h)[top:]
    val = -float(np.sum(up * U) * h * h)
    scale = float(np.sum(up) * h * h) ** 2
    assert val >= -1e-12 * max(scale, 1.0), "discretised kernel must give a non-negative energy"
    return max(val, 0.0)


def F0_tilde_fatslit(B: DomainSpec, sigma: ChargeDensity | None = None, h: float = 0.005) -> EnergyResult:
    """``F0~ = -int_B int_B sigma log|(z - zeta)/(z - conj zeta)| sigma``, non-negative."""
    sigma = sigma or ChargeDensity()
    if not B.in_closed_upper_half_plane():
        raise ValueError("fat slit protrudes below the real axis")
    if B.is_empty:
        return EnergyResult(0.0, 0.0)
    f = _F0_tilde_raster(rasterize(B, sigma, h))
    fc = _F0_tilde_raster(rasterize(B, sigma, 2 * h))
    return EnergyResult(f, abs(f - fc))


def F0_disk_closed_form(T0: float) -> float:
    """``F0 = T0^2 log(T0)/2 - 3 T0^2/4`` for a centred disk with sigma = 1/pi."""
    return 0.5 * T0 * T0 * np.log(T0) - 0.75 * T0 * T0


# ---------------------------------------------------------- asymptotics


class AsymptoticRow(NamedTuple):
    N: int
    log_tau: float
    prediction: float
    deviation: float


def asymptotic_check_gaussian(N_list) -> list:
    """Compare ``log tau_N(0) - N log(pi)`` with ``F0(T0 = N)`` (hbar = 1, c = 1).

    ``deviation = (log tau_N - N log pi - F0) / N^2``.
    """
    rows = []
    for N in N_list:
        N = int(N)
        if N < 1:
            raise ValueError("N must be positive")
        log_tau = tau_gaussian_schur(N, 1.0, TimeVector.zero(), 0).value.log_magnitude
        reduced = log_tau - N * np.log(np.pi)
        pred = F0_disk_closed_form(float(N))
        rows.append(AsymptoticRow(N, log_tau, pred, (reduced - pred) / N**2))
    return rows


def log_barnes_sum(N: int) -> float:
    """``sum_{k=1}^N log Gamma(k)`` directly from log-gamma."""
    return float(np.sum(gammaln(np.arange(1, N + 1))))

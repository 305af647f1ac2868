import math
import warnings

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln, iv

from dysontau.canonical import (
    AliasingError,
    ConvergenceWarning,
    MeasureSpec,
    ZeroTauError,
    gaussian_moment_h,
    gaussian_tau_family,
    hirota_residual,
    partition_ZN,
    symbol_coefficients,
    symbol_fourier,
    tau_gaussian_schur,
    tau_integral_mc,
    tau_toeplitz,
    toeplitz_tau_family,
    unitary_integral_quadrature,
)
from dysontau.logvalue import LogValue
from dysontau.times import TimeVector, xi


def random_locked(rng, K, max_abs):
    r = max_abs * np.sqrt(rng.uniform(size=K))
    return TimeVector.locked(r * np.exp(2j * np.pi * rng.uniform(size=K)))


class TestTimes:
    def test_xi_examples(self):
        assert xi([], 3.0) == 0
        assert xi([1.0], 2.0) == 2
        assert xi([0.3, -0.1], 1 + 1j) == pytest.approx(0.3 + 0.1j)

    def test_locked_reality(self):
        t = TimeVector.locked([0.1 + 0.2j, -0.3])
        assert t.minus[1] == pytest.approx(-0.1 + 0.2j)
        assert t.satisfies_reality()

    def test_lock_violation(self):
        with pytest.raises(ValueError):
            TimeVector([0.1], [0.1], reality_locked=True)

    def test_shift_unlocks(self):
        t = TimeVector.locked([0.1]).shifted(1e-3, 0)
        assert not t.reality_locked and t.plus[1] == pytest.approx(0.101)


class TestGaussianMoment:
    def test_examples(self):
        assert complex(gaussian_moment_h(0, 1.0)) == pytest.approx(math.pi)
        assert complex(gaussian_moment_h(2, 1.0)) == pytest.approx(2 * math.pi)
        assert complex(gaussian_moment_h(1, 2.0)) == pytest.approx(math.pi / 4)

    def test_radial_quadrature_oracle(self):
        for n, c in [(0, 0.5), (3, 1.0), (1, 2.0)]:
            val, _ = integrate.quad(lambda r: r ** (2 * n) * math.exp(-c * r * r) * 2 * math.pi * r, 0, np.inf)
            assert complex(gaussian_moment_h(n, c)) == pytest.approx(val, rel=1e-10)

    def test_bad_c(self):
        with pytest.raises(ValueError):
            gaussian_moment_h(1, 0.0)


class TestSchurTau:
    def test_small_N(self):
        zero = TimeVector.zero()
        assert complex(tau_gaussian_schur(0, 1.0, TimeVector.locked([0.2]), 8).value) == 1
        assert tau_gaussian_schur(-1, 1.0, zero, 8).value.is_zero
        assert tau_gaussian_schur(2, 1.0, zero, 0).value.log_magnitude == pytest.approx(2 * math.log(math.pi), rel=1e-15)

    def test_closed_form_large_N_no_overflow(self):
        v = tau_gaussian_schur(300, 1.0, TimeVector.zero(), 0).value
        expected = 300 * math.log(math.pi) + gammaln(np.arange(1, 301)).sum()
        assert v.log_magnitude == pytest.approx(expected, rel=1e-13)

    def test_c_scaling(self):
        t = TimeVector.locked([0.15, 0.05j])
        N, cut = 3, 20
        a = tau_gaussian_schur(N, 1.0, t, cut).value
        # rescaling z -> z/sqrt(2) maps c=2 to c=1 with t_k -> t_k 2^{-k/2}
        t2 = TimeVector.locked([0.15 * 2**0.5, 0.05j * 2])
        b = tau_gaussian_schur(N, 2.0, t2, cut).value
        assert b.log_magnitude - a.log_magnitude == pytest.approx(-N * (N + 1) / 2 * math.log(2), rel=1e-10)

    def test_last_shell_decreases(self):
        t = TimeVector.locked([0.1])
        shells = [tau_gaussian_schur(2, 1.0, t, c).last_shell for c in (4, 8, 12)]
        assert shells[0] > shells[1] > shells[2]

    def test_divergent_series_warns(self):
        t = TimeVector.locked([0.0, 0.0, 0.9])
        with pytest.warns(ConvergenceWarning):
            tau_gaussian_schur(3, 1.0, t, 12)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            tau_gaussian_schur(2, -1.0, TimeVector.zero(), 4)
        with pytest.raises(ValueError):
            tau_gaussian_schur(2, 1.0, TimeVector.zero(), -1)


class TestMonteCarlo:
    def test_N1_is_h0(self):
        r = tau_integral_mc(1, MeasureSpec.radial_gaussian(1.0), TimeVector.zero(), 20000, seed=1)
        assert abs(float(r.value) - math.pi) < 1e-12  # zero times: every weight equals the normalisation

    def test_N2_zero_times(self):
        r = tau_integral_mc(2, MeasureSpec.radial_gaussian(1.0), TimeVector.zero(), 100_000, seed=3)
        assert abs(float(r.value) - math.pi**2) < 3 * r.stderr

    def test_schur_agreement_N1(self):
        t = TimeVector.locked([0.2])
        s = complex(tau_gaussian_schur(1, 1.0, t, 8).value)
        r = tau_integral_mc(1, MeasureSpec.radial_gaussian(1.0), t, 200_000, seed=5)
        assert abs(s - float(r.value)) < 3 * r.stderr

    def test_deterministic_and_thread_independent(self):
        m, t = MeasureSpec.radial_gaussian(1.0), TimeVector.locked([0.1])
        a = tau_integral_mc(2, m, t, 40_000, seed=9)
        b = tau_integral_mc(2, m, t, 40_000, seed=9, threads=4)
        assert a == b
        c = tau_integral_mc(2, m, t, 40_000, seed=10)
        assert c.value != a.value

    def test_discrete_is_exhaustive(self):
        pts = [0.3 + 0.2j, -0.5, 0.1 - 0.7j]
        w = [0.7, 1.1, 0.5]
        t = TimeVector.locked([0.2 - 0.1j])
        r = tau_integral_mc(2, MeasureSpec.discrete(pts, w), t, samples=1, seed=0)
        brute = 0.0
        for i in range(3):
            for j in range(3):
                zi, zj = pts[i], pts[j]
                f = lambda z: np.exp(xi(t.plus, z) - xi(t.minus, np.conj(z)))
                brute += abs(zi - zj) ** 2 * w[i] * w[j] * (f(zi) * f(zj)).real
        assert float(r.value) == pytest.approx(brute / 2, rel=1e-13)
        assert r.stderr == 0

    def test_circle_measure(self):
        # N=1 on |z|=1 with dphi/2pi: tau = I_0(2a) for t_1 = a real
        a = 0.3
        r = tau_integral_mc(1, MeasureSpec.circle(1.0), TimeVector.locked([a]), 100_000, seed=2)
        assert abs(float(r.value) - iv(0, 2 * a)) < 3 * r.stderr

    def test_partition_ZN_matches_tau_form(self):
        m, t = MeasureSpec.radial_gaussian(1.0), TimeVector.locked([0.1])
        z = partition_ZN(2, m, t, 20_000, seed=4)
        tau = tau_integral_mc(2, m, t, 20_000, seed=4)
        assert z.value.relative_difference(tau.value) < 1e-12

    def test_partition_ZN_needs_reality(self):
        with pytest.raises(ValueError):
            partition_ZN(1, MeasureSpec.radial_gaussian(), TimeVector([0.1], [0.1]), 10, seed=0)

    def test_bad_samples(self):
        with pytest.raises(ValueError):
            tau_integral_mc(1, MeasureSpec.radial_gaussian(), TimeVector.zero(), 0, seed=0)


class TestToeplitz:
    def test_symbol_examples(self):
        z = TimeVector.zero()
        assert symbol_fourier(z, 0, 16) == pytest.approx(1)
        assert abs(symbol_fourier(z, 3, 16)) < 1e-15

    def test_bessel_coefficients(self):
        a = 0.4
        t = TimeVector.locked([a])
        for k in range(4):
            brute, _ = integrate.quad(lambda th: math.exp(2 * a * math.cos(th)) * math.cos(k * th) / (2 * math.pi),
                                      0, 2 * math.pi)
            assert symbol_fourier(t, k, 64).real == pytest.approx(brute, abs=1e-14)
            assert symbol_fourier(t, k, 64).real == pytest.approx(iv(k, 2 * a), abs=1e-14)

    def test_aliasing_guard(self):
        with pytest.raises(AliasingError):
            symbol_coefficients(TimeVector.locked([5.0]), 8)
        with pytest.raises(ValueError):
            symbol_coefficients(TimeVector.zero(), 12)

    def test_examples(self):
        assert complex(tau_toeplitz(4, TimeVector.zero())) == pytest.approx(1)
        a = 0.3
        assert float(tau_toeplitz(1, TimeVector.locked([a]))) == pytest.approx(iv(0, 2 * a), rel=1e-13)
        assert tau_toeplitz(-1, TimeVector.zero()).is_zero

    @pytest.mark.parametrize("N", [2, 3])
    def test_vs_tensor_quadrature(self, N, rng):
        t = random_locked(rng, 2, 0.3)
        a = tau_toeplitz(N, t)
        b = unitary_integral_quadrature(N, t, 24)
        assert a.relative_difference(b) < 1e-10


class TestHirota:
    def test_gaussian_at_zero_times(self):
        fam = gaussian_tau_family(1.0)
        assert hirota_residual(fam, 1, TimeVector.zero(), step=1e-3) < 1e-6

    def test_toeplitz_random(self, rng):
        fam = toeplitz_tau_family()
        assert hirota_residual(fam, 2, random_locked(rng, 3, 0.3)) < 1e-6

    def test_degenerate_n0(self):
        fam = gaussian_tau_family(1.0)
        # tau_{-1} = 0, so the left-hand side itself must vanish
        assert hirota_residual(fam, 0, TimeVector.locked([0.1])) < 1e-8

    def test_zero_base_raises(self):
        fam = gaussian_tau_family(1.0)
        with pytest.raises(ZeroTauError):
            hirota_residual(fam, -1, TimeVector.zero())

    def test_detects_a_non_tau_function(self):
        fam = gaussian_tau_family(1.0)

        def wrong(n, t):
            return fam(n, t) * LogValue(0.3 * n * n)

        assert hirota_residual(wrong, 2, TimeVector.locked([0.1])) > 1e-2

import math

import numpy as np
import pytest
from scipy import integrate

from dysontau.canonical import hirota_residual
from dysontau.grand import (
    DiskEnsembleSpec,
    HalfPlaneEnsembleSpec,
    NystromGrid,
    chemical_potential,
    circle_nystrom_matrix,
    disk_tau_family,
    fredholm_det_circle,
    fredholm_det_halfplane,
    fredholm_kernel_circle,
    fredholm_series_bound,
    grand_expansion_circle,
    halfplane_nystrom_matrix,
    halfplane_weight,
    image_energy_weight,
    omega,
    potential_V,
)
from dysontau.times import TimeVector


class TestOmegaAndPotential:
    def test_omega_examples(self):
        eps = 0.4
        assert omega(DiskEnsembleSpec(eps), 2.0 + 1j) == 0
        z = np.exp(eps + 0.7j)
        assert omega(DiskEnsembleSpec(eps, t0=1), z) == pytest.approx(2 * eps)
        spec = DiskEnsembleSpec(eps, times=TimeVector.locked([0.3j]))
        phi = np.linspace(0, 2 * np.pi, 17)
        assert np.allclose(omega(spec, np.exp(1j * phi)), 0, atol=1e-15)

    def test_omega_real_when_locked(self):
        spec = DiskEnsembleSpec(0.5, times=TimeVector.locked([0.2 + 0.1j, -0.1j]))
        assert np.isrealobj(omega(spec, np.array([1.5 + 0.3j, -2.0j])))

    def test_omega_origin(self):
        with pytest.raises(ValueError):
            omega(DiskEnsembleSpec(0.5), 0.0)

    def test_potential_is_omega_on_circle(self):
        eps, t0 = 0.3, 2
        spec = DiskEnsembleSpec(eps, t0, TimeVector.locked([0.2 - 0.1j, 0.05]))
        phi = np.linspace(0, 2 * np.pi, 33)
        lhs = np.exp(potential_V(spec, phi)) * math.exp(2 * eps * t0)
        rhs = np.exp(omega(spec, np.exp(eps + 1j * phi)))
        assert np.allclose(lhs, rhs, rtol=1e-13)

    def test_potential_single_time(self):
        eps, a = 0.5, 0.2 + 0.1j
        t = TimeVector.locked([a])
        phi = 0.9
        expected = 2 * math.sinh(eps) * (a * np.exp(1j * phi) - t.minus[1] * np.exp(-1j * phi))
        assert potential_V(DiskEnsembleSpec(eps, times=t), phi) == pytest.approx(expected.real)
        assert potential_V(DiskEnsembleSpec(eps), phi) == 0

    def test_chemical_potential(self):
        assert chemical_potential(DiskEnsembleSpec(math.log(2))) == pytest.approx(-math.log(1.5))
        assert chemical_potential(DiskEnsembleSpec(1.0, t0=1)) == pytest.approx(2 - math.log(math.e - 1 / math.e))
        assert chemical_potential(DiskEnsembleSpec(1e-9)) > 20

    def test_epsilon_guard(self):
        with pytest.raises(ValueError):
            DiskEnsembleSpec(0.0)


class TestKernel:
    def test_diagonal_at_zero_times(self):
        eps = 0.7
        k = fredholm_kernel_circle(DiskEnsembleSpec(eps), 1.1, 1.1)
        assert k == pytest.approx(math.exp(eps) / (math.exp(2 * eps) - 1))

    def test_bound(self):
        eps = 0.5
        spec = DiskEnsembleSpec(eps, times=TimeVector.locked([0.1]))
        phi = np.linspace(0, 2 * np.pi, 40, endpoint=False)
        K = fredholm_kernel_circle(spec, phi[:, None], phi[None, :])
        wmax = np.exp(omega(spec, np.exp(eps + 1j * phi))).max()
        assert np.abs(K).max() <= math.exp(eps) * wmax / (math.exp(2 * eps) - 1) * (1 + 1e-12)

    def test_symmetrised_matrix_similar_to_plain(self):
        spec = DiskEnsembleSpec(0.5, times=TimeVector.locked([0.2]), fugacity=0.7)
        M = 32
        grid = NystromGrid.periodic_trapezoid(M)
        plain = fredholm_kernel_circle(spec, grid.nodes[:, None], grid.nodes[None, :]) * grid.weights[None, :]
        sym = circle_nystrom_matrix(spec, M)
        assert np.allclose(np.linalg.det(np.eye(M) + plain), np.linalg.det(np.eye(M) + sym), rtol=1e-12)
        assert np.allclose(sym, sym.conj().T, atol=1e-15)


class TestFredholmCircle:
    def test_zero_fugacity(self):
        r = fredholm_det_circle(DiskEnsembleSpec(0.5, fugacity=0.0), 64)
        assert complex(r.value) == 1

    @pytest.mark.parametrize("eps,fug,t", [(1.0, 0.01, []), (0.5, 0.002, [0.1]), (0.7, 0.005, [0.1 + 0.1j, 0.05])])
    def test_series_agreement_when_certified(self, eps, fug, t):
        spec = DiskEnsembleSpec(eps, times=TimeVector.locked(t), fugacity=fug)
        det = fredholm_det_circle(spec, 256)
        bound = fredholm_series_bound(circle_nystrom_matrix(spec, 256), 4)
        assert bound < 1e-8
        series = sum(complex(v) for v in grand_expansion_circle(spec, 4, 48))
        assert abs(complex(det.value) - series) / abs(complex(det.value)) < 1e-6
        assert det.error < 1e-10 and not det.flagged

    def test_expansion_first_terms(self):
        spec = DiskEnsembleSpec(0.6, fugacity=0.3)
        terms = grand_expansion_circle(spec, 1, 32)
        assert complex(terms[0]) == 1
        assert complex(terms[1]) == pytest.approx(0.3 * math.exp(chemical_potential(spec)) * 2 * math.pi)

    def test_expansion_limit(self):
        with pytest.raises(ValueError):
            grand_expansion_circle(DiskEnsembleSpec(0.5), 6)

    def test_at_least_one(self, rng):
        for _ in range(5):
            t = TimeVector.locked(0.2 * (rng.normal(size=2) + 1j * rng.normal(size=2)))
            r = fredholm_det_circle(DiskEnsembleSpec(0.5, int(rng.integers(-2, 3)), t, 1.0), 128)
            assert r.value.log_magnitude >= -1e-10

    def test_fugacity_derivative_is_first_term(self):
        spec = DiskEnsembleSpec(0.5, 1, TimeVector.locked([0.1]), 1.0)
        first = complex(grand_expansion_circle(spec, 1, 64)[1])
        h = 1e-5
        up = fredholm_det_circle(DiskEnsembleSpec(0.5, 1, spec.times, h), 128).value.log_magnitude
        dn = fredholm_det_circle(DiskEnsembleSpec(0.5, 1, spec.times, 2 * h), 128).value.log_magnitude
        deriv = (4 * up - dn) / (2 * h)  # one-sided, second-order at fugacity 0
        assert deriv == pytest.approx(first.real, rel=1e-6)


class TestImageWeight:
    def test_single(self):
        z = 1.5 + 0.5j
        r = abs(z)
        assert image_energy_weight([z]) == pytest.approx(r / (r * r - 1))

    def test_pair_trig_identity(self):
        eps = 0.4
        for p1, p2 in [(0.1, 2.0), (1.0, -2.5), (3.0, 3.3)]:
            z1, z2 = np.exp(eps + 1j * p1), np.exp(eps + 1j * p2)
            pair = image_energy_weight([z1, z2]) / (image_energy_weight([z1]) * image_energy_weight([z2]))
            a = p1 - p2
            trig = abs(np.sin(a / 2) / np.sin((a + 2j * eps) / 2)) ** 2
            assert pair == pytest.approx(trig, rel=1e-12)

    def test_inside_unit_disk(self):
        with pytest.raises(ValueError):
            image_energy_weight([1.0 + 0j])


class TestHalfPlane:
    def test_zero_damping(self):
        spec = HalfPlaneEnsembleSpec(0.5, damping=lambda x: 0 * np.asarray(x))
        assert complex(fredholm_det_halfplane(spec, 32).value) == 1

    def test_first_order_term(self):
        spec = HalfPlaneEnsembleSpec(0.5, [0.2j, -0.1j], imaginary_times=True)
        tr = np.trace(halfplane_nystrom_matrix(spec, 128))
        direct, _ = integrate.quad(lambda x: halfplane_weight(spec, x).real / (2 * spec.epsilon),
                                   -spec.window, spec.window, limit=200)
        assert tr == pytest.approx(direct, rel=1e-12)

    def test_imaginary_times_give_real_weight(self):
        spec = HalfPlaneEnsembleSpec(0.3, [0.5j, 0.2j, -0.3j], imaginary_times=True)
        w = halfplane_weight(spec, np.linspace(-3, 3, 101))
        assert np.abs(w.imag).max() < 1e-12

    def test_imaginary_flag_validation(self):
        with pytest.raises(ValueError):
            HalfPlaneEnsembleSpec(0.5, [0.2], imaginary_times=True)

    def test_tail_and_convergence(self):
        spec = HalfPlaneEnsembleSpec(0.5, [0.1j], imaginary_times=True)
        a = fredholm_det_halfplane(spec, 128)
        b = fredholm_det_halfplane(spec, 256)
        assert not a.flagged and a.error < 1e-8
        assert a.value.relative_difference(b.value) < 1e-8

    def test_narrow_window_flagged(self):
        spec = HalfPlaneEnsembleSpec(0.5, window=5.0, damping=lambda x: np.exp(-np.abs(x)))
        assert fredholm_det_halfplane(spec, 64).flagged

    def test_two_particle_term_matches_image_product(self):
        # the second-order Fredholm coefficient equals the pair integral with
        # |(z1 - z2)/(z1 - conj z2)|^2 and 1/(2 Im z) per particle
        spec = HalfPlaneEnsembleSpec(0.5, [0.1j], imaginary_times=True)
        A = halfplane_nystrom_matrix(spec, 96)
        e2 = 0.5 * (np.trace(A) ** 2 - np.trace(A @ A))
        grid = NystromGrid.gauss_legendre(96, -spec.window, spec.window)
        x, w = grid.nodes, grid.weights * halfplane_weight(spec, grid.nodes).real
        z = x + 1j * spec.epsilon
        pair = np.abs((z[:, None] - z[None, :]) / (z[:, None] - z.conj()[None, :])) ** 2
        direct = 0.5 * np.einsum("i,j,ij->", w, w, pair) / (2 * spec.epsilon) ** 2
        assert e2.real == pytest.approx(direct, rel=1e-12)


class TestHirotaGrand:
    def test_tau_with_prefactor_satisfies_hirota(self, rng):
        fam = disk_tau_family(0.5, 1.0, M=96)
        for n in (-1, 0, 1):
            t = TimeVector.locked(0.15 * (rng.normal(size=2) + 1j * rng.normal(size=2)))
            assert hirota_residual(fam, n, t) < 1e-6

    def test_without_prefactor_it_fails(self):
        fam = disk_tau_family(0.5, 1.0, M=96)
        t = TimeVector.locked([0.2 + 0.1j])

        def tilde(n, tt):
            from dysontau.logvalue import LogValue

            return fam(n, tt) * LogValue.from_complex(np.exp(tt.sum_k_tk_tmk()))

        assert hirota_residual(tilde, 0, t) > 1e-3

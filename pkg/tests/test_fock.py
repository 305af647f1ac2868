import numpy as np
import pytest
from scipy.linalg import expm

from dysontau.fock import (
    MAX_MODES,
    FockWindow,
    bilinear,
    build_mode_operators,
    exp_bilinear,
    fock_vev,
    identity_suite,
    projectors_P,
    psi,
    psi_star,
    random_field_instance,
    shifted_vacuum,
    tau_operator_vs_integral,
    vacuum_state,
    vev_fields_product,
    wick_determinant,
    wick_vev,
)
from dysontau.times import TimeVector


@pytest.fixture(scope="module")
def ops():
    return build_mode_operators(FockWindow(-3, 4))


def anti(a, b):
    return (a @ b + b @ a).toarray()


class TestWindow:
    def test_cap(self):
        with pytest.raises(ValueError):
            FockWindow(-8, 8)
        assert FockWindow(-4, 10).D == MAX_MODES

    def test_needs_fermi_level(self):
        with pytest.raises(ValueError):
            vacuum_state(FockWindow(1, 5))

    def test_mode_outside(self, ops):
        with pytest.raises((ValueError, KeyError)):
            fock_vev(ops, [psi(10), psi_star(10)])


class TestAlgebra:
    def test_anticommutators(self, ops):
        I = np.eye(ops.window.dim)
        for m in ops.window.modes:
            for n in ops.window.modes:
                assert np.allclose(anti(ops.psi[m], ops.psi_star[n]), I * (m == n))
                assert np.allclose(anti(ops.psi[m], ops.psi[n]), 0)
                assert np.allclose(anti(ops.psi_star[m], ops.psi_star[n]), 0)

    def test_vacuum_rules(self, ops):
        v = vacuum_state(ops.window)
        assert np.allclose(ops.psi[-1] @ v, 0)
        assert np.allclose(ops.psi_star[0] @ v, 0)
        assert np.vdot(v, ops.psi[-1] @ (ops.psi_star[-1] @ v)) == pytest.approx(1)

    def test_shifted_vacua_orthonormal(self, ops):
        ns = range(-3, 5)
        G = np.array([[np.vdot(shifted_vacuum(ops, a), shifted_vacuum(ops, b)) for b in ns] for a in ns])
        assert np.allclose(G, np.eye(len(ns)))

    def test_projectors(self, ops):
        pp, pm = projectors_P(ops)
        assert np.allclose((pp @ pp).toarray(), pp.toarray())
        assert np.allclose((pm @ pm).toarray(), pm.toarray())
        for n in range(-3, 5):
            v = shifted_vacuum(ops, n)
            assert np.allclose(pp @ v, v if n >= 0 else 0)
            assert np.allclose(pm @ v, v if n <= 0 else 0)

    def test_exp_bilinear_zero(self, ops):
        assert np.allclose(exp_bilinear(ops, np.zeros((7, 7))).toarray(), np.eye(ops.window.dim))

    def test_adjoint_action(self, ops, rng):
        # e^A psi_n e^{-A} = sum_m (e^a)_{mn} psi_m for A = sum a_{mn} psi_m psi*_n
        a = 0.3 * (rng.normal(size=(7, 7)) + 1j * rng.normal(size=(7, 7)))
        E = exp_bilinear(ops, a).toarray()
        Einv = exp_bilinear(ops, -a).toarray()
        ea = expm(a)
        w = ops.window
        for n in w.modes:
            lhs = E @ ops.psi[n].toarray() @ Einv
            rhs = sum(ea[w.bit(m), w.bit(n)] * ops.psi[m].toarray() for m in w.modes)
            assert np.allclose(lhs, rhs, atol=1e-12)

    def test_bilinear_matches_dense(self, ops, rng):
        a = rng.normal(size=(7, 7))
        H = bilinear(ops, a).toarray()
        assert np.allclose(exp_bilinear(ops, a).toarray(), expm(H), atol=1e-10)


class TestWick:
    def test_examples(self, ops):
        assert wick_determinant([psi(-1)], [psi_star(-1)]) == 1
        assert wick_determinant([psi(0)], [psi_star(0)]) == 0
        assert wick_vev([psi(1), psi(2), psi_star(2)]) == 0

    def test_wick_matches_fock(self, ops, rng):
        modes = list(ops.window.modes)
        for _ in range(10):
            ws = []
            for _ in range(4):
                f = psi(int(rng.choice(modes)), rng.normal()) + psi_star(int(rng.choice(modes)), rng.normal())
                ws.append(f)
            assert wick_vev(ws) == pytest.approx(fock_vev(ops, ws), abs=1e-12)

    def test_determinant_matches_fock(self, ops, rng):
        modes = list(ops.window.modes)
        ws = [psi(int(rng.choice(modes)), 1.0) + psi(int(rng.choice(modes)), 0.5j) for _ in range(3)]
        wss = [psi_star(int(rng.choice(modes)), 1.0) + psi_star(int(rng.choice(modes)), -0.3) for _ in range(3)]
        assert wick_determinant(ws, wss) == pytest.approx(fock_vev(ops, ws + wss[::-1]), abs=1e-12)


class TestFieldCorrelator:
    def test_single_pair(self):
        z, s = 0.3 + 0.1j, 2.0 - 0.5j
        r = vev_fields_product(1, [z], [s])
        assert r.determinant_form == pytest.approx(z / (z - s))
        r0 = vev_fields_product(0, [z], [s])
        assert r0.determinant_form == pytest.approx(s / (z - s))

    def test_two_forms_agree(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 5))
            N = int(rng.integers(-3, 4))
            z, s = random_field_instance(rng, n)
            assert vev_fields_product(N, z, s).difference < 1e-12

    def test_degree_zero_homogeneity(self, rng):
        z, s = random_field_instance(rng, 3)
        a = vev_fields_product(2, z, s).determinant_form
        b = vev_fields_product(2, 1.7 * z, 1.7 * s).determinant_form
        assert a == pytest.approx(b, rel=1e-12)

    def test_poles(self):
        with pytest.raises(ZeroDivisionError):
            vev_fields_product(0, [0.5, 0.2], [2.0, 0.5])
        with pytest.raises(ZeroDivisionError):
            vev_fields_product(1, [0.0], [2.0])


class TestOperatorTau:
    def test_N0(self):
        r = tau_operator_vs_integral(0, TimeVector.zero(), [0.5], [1.0])
        assert r.delta < 1e-13

    def test_N1_single_point(self):
        r = tau_operator_vs_integral(1, TimeVector.zero(), [0.5 + 0.2j], [0.7])
        assert r.integral.to_complex() == pytest.approx(0.7)
        assert r.delta < 1e-12

    def test_N2_only_matching_term(self):
        t = TimeVector.locked([0.1])
        r = tau_operator_vs_integral(2, t, [0.3, -0.2 + 0.4j, 0.1j], [1.0, 0.5, 0.8])
        assert r.delta < 1e-10
        assert r.drift < 1e-8
        for m, v in r.terms.items():
            if m != 2:
                assert abs(v) < 1e-14


def test_identity_suite():
    checks = identity_suite()
    failed = [c for c in checks if not c.passed]
    assert not failed, failed
    assert len(checks) >= 9

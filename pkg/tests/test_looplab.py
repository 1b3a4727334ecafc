import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from nnoid.looplab import (IwasawaError, LoopSL2, TruncationWarning, circle_grid, is_r_unitary, iwasawa,
                           random_positive_loop, random_su2_loop, star, theta_derivative)

K = 128
I2 = np.eye(2)
SU = expm(np.array([[0.3j, 0.4 + 0.2j], [-0.4 + 0.2j, -0.3j]]))
seeds = st.integers(0, 2 ** 31)


def diag_loop(K=K):
    return LoopSL2.from_laurent({1: np.diag([1, 0]), -1: np.diag([0, 1])}, K)


def factor(X, N=16):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return iwasawa(X, N)


def test_laurent_roundtrip():
    rng = np.random.default_rng(0)
    coeffs = {k: rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for k in range(-5, 6)}
    X = LoopSL2.from_laurent(coeffs, 64)
    back = X.laurent()
    assert max(np.max(np.abs(back[k] - coeffs[k])) for k in coeffs) < 1e-10
    assert LoopSL2.from_laurent(back, 64).samples == pytest.approx(X.samples, abs=1e-12)


def test_star_of_constant_unitary_is_inverse():
    X = LoopSL2.constant(SU, K)
    assert np.allclose(star(X).samples, np.linalg.inv(SU)[None], atol=1e-14)


def test_star_reflects_coefficients():
    S = star(diag_loop())
    c = S.laurent()
    assert np.allclose(c[-1], np.diag([1, 0]), atol=1e-13)
    assert np.allclose(c[1], np.diag([0, 1]), atol=1e-13)


def test_star_on_smaller_circle():
    rng = np.random.default_rng(2)
    coeffs = {k: rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for k in range(-2, 3)}
    X = LoopSL2.from_laurent(coeffs, 32, r=0.8)
    c = star(X).laurent()
    for k, A in coeffs.items():
        assert np.allclose(c[-k], A.conj().T, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_star_involution_and_antiautomorphism(seed):
    rng = np.random.default_rng(seed)
    X = random_su2_loop(rng, 64) * random_positive_loop(rng, 64)
    Y = random_positive_loop(rng, 64)
    assert np.allclose(star(star(X)).samples, X.samples, atol=1e-12)
    assert np.allclose(star(X * Y).samples, (star(Y) * star(X)).samples, atol=1e-10)


def test_constant_su2_is_unitary():
    ok, res = is_r_unitary(LoopSL2.constant(SU, K))
    assert ok and res < 1e-14


def test_diag_not_unitary():
    ok, _ = is_r_unitary(LoopSL2.constant(np.diag([2, 0.5]), K))
    assert not ok


def test_exponential_of_hermitian_pattern_is_unitary():
    A = np.array([[0.7, 0.2 - 0.5j], [0.2 + 0.5j, -0.7]])
    X = LoopSL2.from_function(lambda l: expm((l - 1 / l) * A), K)
    ok, res = is_r_unitary(X)
    assert ok, res


def test_iwasawa_of_unitary_constant():
    iw = factor(LoopSL2.constant(SU, K))
    assert np.allclose(iw.F.samples, SU[None], atol=1e-12)
    assert np.allclose(iw.B.samples, I2[None], atol=1e-12)


@pytest.mark.parametrize("B0", [np.array([[2.0, 0.3 - 1j], [0, 0.5]]), np.diag([2.0, 0.5])])
def test_iwasawa_of_positive_constant(B0):
    iw = factor(LoopSL2.constant(B0, K))
    assert np.allclose(iw.F.samples, I2[None], atol=1e-12)
    assert np.allclose(iw.B.samples, B0[None], atol=1e-12)


def test_iwasawa_recovers_factors_and_is_idempotent():
    rng = np.random.default_rng(11)
    for _ in range(10):
        F0, B0 = random_su2_loop(rng, K), random_positive_loop(rng, K)
        iw = factor(F0 * B0)
        assert np.max(np.abs(iw.F.samples - F0.samples)) < 1e-8
        assert np.max(np.abs(iw.B.samples - B0.samples)) < 1e-8
        again = factor(iw.F * iw.B)
        assert np.max(np.abs(again.F.samples - iw.F.samples)) < 1e-8
        assert np.max(np.abs(again.B.samples - iw.B.samples)) < 1e-8


def test_iwasawa_normalization_and_det():
    rng = np.random.default_rng(4)
    iw = factor(random_su2_loop(rng, K) * random_positive_loop(rng, K))
    assert iw.F.det_residual() < 1e-9 and iw.B.det_residual() < 1e-9
    assert is_r_unitary(iw.F, 1e-8)[0]
    assert iw.B.negative_part() < 1e-8
    B0 = iw.B.laurent()[0]
    assert abs(B0[1, 0]) < 1e-8
    assert B0[0, 0].real > 0 and abs(B0[0, 0].imag) < 1e-10 and B0[1, 1].real > 0


def test_iwasawa_of_unitary_loop_has_trivial_positive_part():
    rng = np.random.default_rng(8)
    iw = factor(random_su2_loop(rng, K))
    assert np.max(np.abs(iw.B.samples - I2)) < 1e-8


def test_iwasawa_warns_on_unresolved_spectrum():
    X = LoopSL2.from_laurent({0: I2, 30: 0.5 * np.array([[0, 1], [0, 0]])}, K)
    with pytest.warns(TruncationWarning):
        iwasawa(X, 8)


def test_iwasawa_ill_conditioned_raises():
    X = LoopSL2.constant(np.diag([1e9, 1e-9]), K)
    with pytest.raises(IwasawaError):
        iwasawa(X, 16, max_condition=1e6)


def test_iwasawa_off_grid_unitary_factor():
    rng = np.random.default_rng(9)
    F0, B0 = random_su2_loop(rng, K, phase=0.01), random_positive_loop(rng, K, phase=0.01)
    X = F0 * B0
    iw = factor(X)
    # evaluate at lambda = 1, which is off the rotated grid
    X1 = X(1.0)
    F1 = iw.unitary_factor(X1, 1.0)[0]
    assert np.allclose(F1 @ F1.conj().T, I2, atol=1e-8)


def test_theta_derivative_of_constant_is_zero():
    assert np.max(np.abs(theta_derivative(LoopSL2.constant(SU, K)).samples)) < 1e-12


def test_theta_derivative_monomial():
    C = np.array([[1.0, 2.0], [0.5j, 1.0]])
    X = diag_loop() * C
    lam = X.grid
    want = np.einsum("lij,jk->lik", np.array([np.diag([1j * l, -1j / l]) for l in lam]), C)
    assert np.allclose(theta_derivative(X).samples, want, atol=1e-10)


def test_theta_derivative_matches_finite_difference():
    rng = np.random.default_rng(12)
    X = random_su2_loop(rng, K) * random_positive_loop(rng, K)
    h = 1e-4
    fd = (X(np.exp(1j * h)) - X(np.exp(-1j * h)))[0] / (2 * h)
    assert np.max(np.abs(theta_derivative(X)(1.0)[0] - fd)) < 1e-6


def test_circle_grid_phase():
    g = circle_grid(8, 1.0, 0.1)
    assert g[0] == pytest.approx(np.exp(0.1j))
    assert np.allclose(np.abs(g), 1)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_iwasawa_uniqueness_property(seed):
    rng = np.random.default_rng(seed)
    F0, B0 = random_su2_loop(rng, K), random_positive_loop(rng, K)
    iw = factor(F0 * B0)
    assert np.max(np.abs((iw.F * iw.B).samples - (F0 * B0).samples)) < 1e-8
    assert np.max(np.abs(iw.F.samples - F0.samples)) < 1e-8

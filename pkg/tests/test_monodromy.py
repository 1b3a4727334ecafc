import numpy as np
import pytest
from scipy.linalg import expm

from nnoid.moebius import MoebiusElem, build_group
from nnoid.monodromy import (LambdaGrid, Path, PathError, check_closing, circle_loop, descent_check,
                             downstairs_loops, eta_coef, eigen_exponent, monodromies_downstairs, mu_formula,
                             trace_residuals, transport, upstairs_basepoint, upstairs_end_monodromies)
from nnoid.potentials import build_spec, offdiag

I2 = np.eye(2)


def same_pair(ev, nu, tol):
    want = np.exp(np.array([2j, -2j]) * np.pi * nu)
    ev = np.asarray(ev)
    return min(np.max(np.abs(ev - want)), np.max(np.abs(ev[::-1] - want))) < tol


def ring(center=0.0, radius=1.0, n=256, start=None):
    ang = 2 * np.pi * np.arange(n + 1) / n
    pts = center + radius * np.exp(1j * ang)
    pts[-1] = pts[0]
    return pts


def test_zero_potential_transport_is_identity():
    T = transport(lambda x, lam: np.zeros((lam.size, 2, 2)), [0, 1 + 1j, 2], np.array([1.0, 1j]))
    assert np.allclose(T, I2)


def test_constant_potential_gives_exponential():
    A = np.array([[0.2, 1.0 - 0.5j], [0.3j, -0.2]])
    a, b = 0.1 + 0.2j, 1.3 - 0.4j
    T = transport(lambda x, lam: np.repeat(A[None], lam.size, 0), [a, b], np.array([1.0]))
    assert np.allclose(T[0], expm((b - a) * A), atol=1e-10)


@pytest.mark.parametrize("c, lam", [(0.1, 1.0), (0.3, np.exp(0.7j)), (-0.05, np.exp(2.1j))])
def test_euler_system_frobenius_exponents(c, lam):
    coef = lambda x, l: offdiag(1.0 / l, c / x ** 2)
    T = transport(coef, ring(), np.array([lam]))[0]
    nu = 0.5 - 0.5 * np.sqrt(1 + 4 * c / lam + 0j)
    assert same_pair(np.linalg.eigvals(T), nu, 1e-8)
    assert abs(np.linalg.det(T) - 1) < 1e-9


def test_mu_formula_zero_weight():
    lam = np.exp(1j * np.linspace(0.1, 6, 7))
    assert np.allclose(mu_formula(0.0, lam, 3), 0.5 - 1 / 6)


def test_mu_formula_at_one():
    for w in (0.3, -2, 7):
        assert mu_formula(w, 1.0, 4) == pytest.approx(0.5 - 1 / 8)


def test_mu_formula_imaginary_regime():
    assert mu_formula(4.0, -1.0, 1) == pytest.approx(0.5 - 1j * np.sqrt(3) / 2)


def test_lambda_grid_layout():
    g = LambdaGrid(16)
    v = g.values
    assert v.size == 19
    assert v[g.i_one] == 1
    assert v[g.i_plus] == pytest.approx(np.exp(1e-3j))
    assert v[g.i_minus] == pytest.approx(np.exp(-1e-3j))
    assert np.min(np.abs(g.main - 1)) > 0.1


def test_path_check_rejects_close_pass():
    p = Path(np.array([-1 + 1e-6j, 1 + 1e-6j]))
    with pytest.raises(PathError):
        p.check([0.0, 5.0])
    assert Path(np.array([-1 + 0.5j, 1 + 0.5j])).check([0.0, 5.0]) == pytest.approx(0.5)


def test_loops_avoid_punctures():
    for path in downstairs_loops().values():
        assert path.closed
        assert path.clearance([0.0, 1.0]) > 0.2


@pytest.fixture(scope="module")
def d3_rep16(d3_spec):
    return monodromies_downstairs(d3_spec, LambdaGrid(16))


@pytest.fixture(scope="module")
def c3_rep16(c3_spec):
    return monodromies_downstairs(c3_spec, LambdaGrid(16))


def test_det_and_relation(d3_rep16):
    assert d3_rep16.det_residual() < 1e-8
    assert d3_rep16.relation_residual() < 1e-7


@pytest.mark.parametrize("which", ["d3", "c3"])
def test_trace_formula(which, d3_rep16, c3_rep16, d3_spec, c3_spec):
    spec, rep = (d3_spec, d3_rep16) if which == "d3" else (c3_spec, c3_rep16)
    worst = max(float(np.max(r)) for r in trace_residuals(spec, rep).values())
    assert worst < 1e-5


def test_eigenvalues_at_one_ignore_weights(d3_spec, d3_rep16):
    i = d3_rep16.grid.i_one
    for k, name in enumerate(("0", "1", "inf")):
        n = d3_spec.branch.mults[k]
        ev = np.linalg.eigvals(d3_rep16.generators[name][i])
        nu = 0.5 - 1 / (2 * n)
        assert same_pair(ev, nu, 1e-8)


def test_zero_weights_exponents():
    spec = build_spec(build_group("dihedral", 4), (0, 0, 0))
    rep = monodromies_downstairs(spec, LambdaGrid(8))
    for k, name in enumerate(("0", "1", "inf")):
        nu = eigen_exponent(rep.generators[name])
        assert np.allclose(nu, 0.5 - 1 / (2 * spec.branch.mults[k]), atol=1e-8)


def test_eigenvalues_match_formula_off_one(d3_spec):
    rng = np.random.default_rng(2)
    lam = np.exp(2j * np.pi * rng.random(5))
    coef = eta_coef(d3_spec)
    for k, (name, path) in enumerate(downstairs_loops().items()):
        M = transport(coef, path.waypoints, lam)
        mu = mu_formula(d3_spec.weights.as_tuple()[k], lam, d3_spec.branch.mults[k])
        for Mj, m in zip(M, mu):
            assert same_pair(np.linalg.eigvals(Mj), m, 1e-6)


def test_homotopy_invariance(d3_spec):
    lam = np.exp(1j * np.array([0.4, 2.0, 4.4]))
    coef = eta_coef(d3_spec)
    b = 0.37 + 0.21j
    circle = circle_loop(0.0, b, 0.25).waypoints
    # counterclockwise square around 0 with its own tail
    square = np.array([b, 0.2 + 0.1j, 0.2 + 0.2j, -0.2 + 0.2j, -0.2 - 0.2j, 0.2 - 0.2j, 0.2 + 0.1j, b])
    T1 = transport(coef, circle, lam)
    T2 = transport(coef, square, lam)
    assert np.max(np.abs(T1 - T2)) < 1e-7


def test_basepoint_move_conjugates(d3_spec):
    grid = LambdaGrid(8)
    b0, b1 = 0.37 + 0.21j, 0.45 + 0.33j
    r0 = monodromies_downstairs(d3_spec, grid, b0)
    r1 = monodromies_downstairs(d3_spec, grid, b1)
    T = transport(eta_coef(d3_spec), [b0, b1], grid.values)
    Ti = np.linalg.inv(T)
    for name in ("0", "1", "inf"):
        conj = Ti @ r0.generators[name] @ T
        d = np.minimum(np.max(np.abs(conj - r1.generators[name]), axis=(1, 2)),
                       np.max(np.abs(conj + r1.generators[name]), axis=(1, 2)))
        assert np.max(d) < 1e-7


def test_check_closing_identity():
    g = LambdaGrid(8)
    M = np.repeat(I2[None], g.values.size, 0)
    r = check_closing(M, g)
    assert r["value"] == 0 and r["derivative"] == 0


def test_check_closing_detects_derivative():
    g = LambdaGrid(8)
    th = 0.7 * np.angle(g.values)
    M = np.zeros((th.size, 2, 2), complex)
    M[:, 0, 0], M[:, 1, 1] = np.exp(1j * th), np.exp(-1j * th)
    r = check_closing(M, g)
    assert r["value"] < 1e-15
    assert r["derivative"] == pytest.approx(0.7, rel=1e-5)


@pytest.mark.parametrize("which", ["d3", "c3"])
def test_upstairs_end_loops_close(which, d3_spec, c3_spec):
    spec = d3_spec if which == "d3" else c3_spec
    g = LambdaGrid(16)
    for M in upstairs_end_monodromies(spec, g, per_slot=2).values():
        r = check_closing(M, g)
        assert r["value"] < 1e-5 and r["derivative"] < 1e-4


def test_upstairs_basepoint_choice(d3_spec):
    zb = upstairs_basepoint(d3_spec)
    pre = d3_spec.inv.preimages(0.37 + 0.21j)
    assert zb.imag > 0
    assert abs(zb) <= min(abs(z) for z in pre if z.imag > 0) + 1e-12


def test_descent_identity(d3_spec):
    r = descent_check(d3_spec, MoebiusElem(I2))
    assert r["residual"] == 0


def order_element(G, m):
    return next(g for g in G.elements if not g.is_identity and g.order() == m)


def test_descent_cyclic_two():
    G = build_group("cyclic", 2)
    spec = build_spec(G, (0.3, 0.0, 0.4))
    r = descent_check(spec, order_element(G, 2))
    assert r["order"] == 2 and r["residual"] < 1e-6


@pytest.mark.parametrize("label, n, w, m", [("tetrahedral", None, (0.2, 0.1, 0.3), 3),
                                            ("cyclic", 3, (0.3, 0.0, 0.4), 3)])
def test_descent_order_three(label, n, w, m):
    G = build_group(label, n) if n else build_group(label)
    r = descent_check(build_spec(G, w), order_element(G, m))
    assert r["order"] == m and r["residual"] < 1e-6


def test_descent_icosahedral_order_five():
    G = build_group("icosahedral")
    r = descent_check(build_spec(G, (0.1, 0.0, 0.0)), order_element(G, 5), LambdaGrid(8))
    assert r["order"] == 5 and r["residual"] < 1e-6

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nnoid.checks import gauge_residual, random_rational
from nnoid.complexrat import INF, Poly, RationalMap, compose
from nnoid.moebius import BranchData, build_group, orbit_invariant
from nnoid.potentials import (Convention, PotentialError, WeightTriple, alpha_downstairs, alpha_pullback_residual,
                              alpha_residues, build_spec, eta_at, gauge_apply, hopf_downstairs, pulled_eta_at,
                              pulled_hopf, schwartz_gauge, xi_at)

rng0 = np.random.default_rng(0)
Z = rng0.normal(size=20) + 1j * rng0.normal(size=20)
LAM = np.exp(2j * np.pi * rng0.random(20))


def fake_branch(mults):
    return BranchData(tuple(mults), ((), (), ()), 1)


def moebius_map(a, b, c, d):
    return RationalMap(Poly([b, a]), Poly([d, c]))


def test_unscaled_convention_coefficients():
    w = (1.6, 4.8, 3.2)
    q = hopf_downstairs(WeightTriple(*w), fake_branch((2, 3, 5)), Convention.UNSCALED_W16)
    c = q.coeff.num.padded(3)
    assert c[0] == pytest.approx(w[0] / 16)
    assert c[2] == pytest.approx(w[2] / 16)
    assert c[1] == pytest.approx((w[1] - w[0] - w[2]) / 16)


def test_zero_weights_give_zero_differential():
    q = hopf_downstairs(WeightTriple(0, 0, 0), fake_branch((2, 2, 3)))
    assert q.is_zero or np.all(q.coeff.num.coeffs == 0)


def test_unit_residues_in_unscaled_convention():
    q = hopf_downstairs(WeightTriple(16, 16, 16), fake_branch((2, 3, 4)), "unscaled")
    for p in (0.0, 1.0, INF):
        assert q.quad_residue(p) == pytest.approx(1.0)


def test_scaled_convention_divides_by_square_multiplicity():
    bd = fake_branch((2, 3, 5))
    q = hopf_downstairs(WeightTriple(1, 2, 3), bd)
    for p, w, n in zip((0.0, 1.0, INF), (1, 2, 3), (2, 3, 5)):
        assert q.quad_residue(p) == pytest.approx(w / (16 * n * n))


def test_convention_parse():
    assert Convention.parse("unscaled") is Convention.UNSCALED_W16
    assert Convention.parse("scaled_w16n2") is Convention.SCALED_W16N2
    with pytest.raises(ValueError):
        Convention.parse("w16n")


@pytest.mark.parametrize("n", [2, 3, 5])
def test_alpha_cyclic(n):
    G = build_group("cyclic", n)
    inv = orbit_invariant(G)
    alpha = alpha_downstairs(inv.branch, inv)
    assert alpha.quad_residue(0.0) == pytest.approx((n ** -2 - 1) / 2)
    z = Z[:5]
    assert np.allclose(alpha(z ** n) * (n * z ** (n - 1)) ** 2, (1 - n * n) / (2 * z * z))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_alpha_dihedral_residues(n):
    inv = orbit_invariant(build_group("dihedral", n))
    res = dict(zip(inv.branch.mults, alpha_residues(inv.branch)))
    assert res[2] == pytest.approx(-3 / 8)
    assert res[n] == pytest.approx((n ** -2 - 1) / 2)
    alpha = alpha_downstairs(inv.branch, inv)
    assert alpha_pullback_residual(alpha, inv) < 1e-9


def test_alpha_unbranched_value_has_zero_residue():
    alpha = alpha_downstairs(fake_branch((3, 1, 3)))
    assert alpha.quad_residue(1.0) == 0


def test_alpha_wrong_residues_fail_loudly():
    inv = orbit_invariant(build_group("dihedral", 3))
    with pytest.raises(PotentialError):
        alpha_downstairs(fake_branch((2, 2, 4)), inv)


@pytest.fixture(scope="module")
def d3():
    return build_spec(build_group("dihedral", 3), (0.3, 0.3, 0.3))


def test_xi_at_lambda_one_is_nilpotent(d3):
    x = xi_at(d3, Z, 1.0)
    assert np.all(x[:, 1, 0] == 0)


def test_xi_zero_weights_strictly_upper():
    spec = build_spec(build_group("dihedral", 3), (0, 0, 0))
    x = xi_at(spec, Z, LAM)
    assert np.all(x[:, 1, 0] == 0) and np.all(x[:, 0, 0] == 0) and np.all(x[:, 1, 1] == 0)


def test_xi_lower_left_is_pullback(d3):
    inv = d3.inv
    u, d1, _, _ = inv.derivs(Z)
    want = (1 - LAM) ** 2 * d3.Q(u) * d1 ** 2
    got = xi_at(d3, Z, LAM)[:, 1, 0]
    assert np.allclose(got, want, rtol=1e-9)
    assert np.allclose(xi_at(d3, Z, LAM)[:, 0, 1], 1 / LAM)


def test_xi_rejects_zero_lambda(d3):
    with pytest.raises(PotentialError):
        xi_at(d3, Z, 0.0)


def test_eta_at_lambda_one(d3):
    u = Z[:5]
    e = eta_at(d3, u, 1.0)
    assert np.allclose(e[:, 1, 0], 0.5 * d3.alpha(u))


def test_eta_without_alpha_is_trinoid_form():
    G = build_group("cyclic", 3)
    spec = build_spec(G, (0.1, 0.2, 0.3))
    # the fiber over 1 of the cyclic invariant is unbranched in the orbit convention
    assert alpha_residues(fake_branch((1, 1, 1))) == (0, 0, 0)
    u = Z[:5]
    e = eta_at(spec, u, LAM[:5])
    want = (1 - LAM[:5]) ** 2 * spec.Q(u) + 0.5 * LAM[:5] * spec.alpha(u)
    assert np.allclose(e[:, 1, 0], want)


def test_eta_singular_points_rejected(d3):
    for u in (0.0, 1.0):
        with pytest.raises(PotentialError):
            eta_at(d3, u, 0.5j)


def test_schwartz_gauge_identity_map():
    g = schwartz_gauge(RationalMap(Poly([0, 1])), Z[:3], LAM[:3])
    assert np.allclose(g, np.eye(2)[None])


def test_schwartz_gauge_affine():
    a, b = 2.5, 1 - 1j
    g = schwartz_gauge(RationalMap(Poly([b, a])), Z[:3], LAM[:3])
    assert np.allclose(g, np.diag([a ** -0.5, a ** 0.5])[None])


def test_schwartz_gauge_square_at_one():
    lam = 0.3 + 0.4j
    g = schwartz_gauge(RationalMap(Poly([0, 0, 1])), 1.0, lam)
    v, v1 = 2 ** -0.5, -0.5 * 2 ** -0.5
    assert np.allclose(g, [[v, 0], [-lam * v1, 1 / v]])


def test_schwartz_gauge_singular_at_branch_point():
    with pytest.raises(PotentialError):
        schwartz_gauge(RationalMap(Poly([0, 0, 1])), 0.0, 1.0)


def test_gauge_apply_identity_and_zero():
    xi = np.array([[0.3, 1j], [2.0, -0.3]])
    assert np.allclose(gauge_apply(xi, np.eye(2), np.zeros((2, 2))), xi)
    g = np.array([[2.0, 1j], [0.0, 0.5]])
    assert np.allclose(gauge_apply(np.zeros((2, 2)), g, np.zeros((2, 2))), 0)


@pytest.mark.parametrize("label, n, w", [("tetrahedral", None, (0.2, 0.1, 0.3)), ("dihedral", 3, (0.3, 0.3, 0.3))])
def test_gauge_identity(label, n, w):
    G = build_group(label, n) if n else build_group(label)
    assert gauge_residual(build_spec(G, w), 100, seed=3) < 1e-9


def test_gauge_identity_formula(d3):
    # lower-left over du of the gauged potential: (1-lam)^2 Q + lam/2 S(u)
    g, dg = schwartz_gauge(d3.inv, Z, LAM, with_derivative=True)
    gauged = gauge_apply(xi_at(d3, Z, LAM), g, dg)
    u, d1, _, _ = d3.inv.derivs(Z)
    lower = (1 - LAM) ** 2 * d3.Q(u) * d1 ** 2 + 0.5 * LAM * d3.inv.schwarzian(Z)
    # the entry is a dz-coefficient of a du-form: one factor u' short of the quadratic differential
    assert np.allclose(gauged[:, 1, 0] * d1, lower, rtol=1e-8, atol=1e-10)
    assert np.allclose(gauged, pulled_eta_at(d3, Z, LAM), rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize("label, n", [("dihedral", 3), ("tetrahedral", None)])
def test_symmetry_acts_by_schwartz_gauge(label, n):
    G = build_group(label, n) if n else build_group(label)
    spec = build_spec(G, (0.2, 0.1, 0.3))
    for tau in G.elements[1:4]:
        a, b, c, d = tau.matrix.ravel()
        t = moebius_map(a, b, c, d)
        tz, dt = t(Z), t.deriv()(Z)
        lhs = xi_at(spec, tz, LAM) * dt[:, None, None]
        g, dg = schwartz_gauge(t, Z, LAM, with_derivative=True)
        rhs = gauge_apply(xi_at(spec, Z, LAM), g, dg)
        assert np.max(np.abs(lhs - rhs) / (1 + np.abs(rhs))) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_gauge_composition_up_to_sign(seed):
    rng = np.random.default_rng(seed)
    u, v = random_rational(rng, 3), random_rational(rng, 3)
    if u.is_constant or v.is_constant:
        return
    z = complex(rng.normal(), rng.normal())
    lam = np.exp(2j * np.pi * rng.random())
    uz = u(z)
    if not np.isfinite(uz) or abs(u.deriv()(z)) < 1e-2 or not np.isfinite(v(uz)) or abs(v.deriv()(uz)) < 1e-2:
        return
    if abs(uz) > 1e3 or abs(u.deriv()(z)) > 1e3 or abs(v.deriv()(uz)) > 1e3:
        return
    g_vu = schwartz_gauge(compose(v, u), z, lam)
    # v's gauge is pulled back: evaluated at u(z), with dz-derivatives via u'
    prod = schwartz_gauge(u, z, lam) @ schwartz_gauge(v, uz, lam)
    scale = 1 + np.max(np.abs(prod))
    assert min(np.max(np.abs(g_vu - prod)), np.max(np.abs(g_vu + prod))) < 1e-7 * scale


def test_weights_must_be_finite():
    with pytest.raises(ValueError):
        WeightTriple(0, float("nan"), 1)
    with pytest.raises(ValueError):
        WeightTriple.parse("1,2")


def test_spec_pullback_matches_schwarzian(d3):
    assert alpha_pullback_residual(d3.alpha, d3.inv) < 1e-9


def test_pulled_hopf_charts_agree(d3):
    # u*Q transforms as a quadratic differential between z and w = 1/z
    z = Z[:5]
    qz = pulled_hopf(d3, z, "z")
    qw = pulled_hopf(d3, 1 / z, "w")
    assert np.allclose(qw, qz * z ** 4, rtol=1e-8)

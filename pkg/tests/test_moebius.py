import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nnoid.complexrat import INF, Poly, RationalMap, mult_at
from nnoid.moebius import (GroupError, MoebiusElem, branch_data, build_group, invariant_map, orbit_invariant,
                           reflection_residual, stereo, unstereo, verify_invariance)

LABELS = [("cyclic", n) for n in range(2, 9)] + [("dihedral", n) for n in range(2, 9)] + [
    ("tetrahedral", None), ("octahedral", None), ("icosahedral", None)]


def group(label, n=None):
    return build_group(label, n) if n else build_group(label)


@pytest.mark.parametrize("label, n, order", [("cyclic", 5, 5), ("dihedral", 3, 6), ("tetrahedral", None, 12),
                                             ("octahedral", None, 24), ("icosahedral", None, 60)])
def test_group_orders(label, n, order):
    G = group(label, n)
    assert G.order == order
    for g in G.elements:
        m = g.matrix
        assert np.allclose(m @ m.conj().T, np.eye(2), atol=1e-12)


def test_cyclic_generated_by_rotation():
    G = build_group("cyclic", 5)
    rot = MoebiusElem(np.diag([np.exp(1j * np.pi / 5), np.exp(-1j * np.pi / 5)]))
    assert G.contains(rot)
    assert rot(1.0) == pytest.approx(np.exp(2j * np.pi / 5))


def test_group_closed_under_products():
    G = build_group("octahedral")
    for g in G.elements[::5]:
        for h in G.elements[::7]:
            assert G.contains(g * h)


@pytest.mark.parametrize("label", ["cyclic", "dihedral"])
def test_small_n_rejected(label):
    with pytest.raises(GroupError):
        build_group(label, 1)


@pytest.mark.parametrize("n", [2, 3, 7])
def test_cyclic_invariant_is_power(n):
    u = invariant_map(build_group("cyclic", n))
    assert u.degree == n
    for x in [0.3 + 0.2j, -1.4 + 0.9j]:
        assert u(x) == pytest.approx(x ** n)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_dihedral_invariant(n):
    G = build_group("dihedral", n)
    u = invariant_map(G)
    assert u.degree == 2 * n
    assert sorted(branch_data(G, u).mults) == sorted((2, 2, n))
    # apexes at 0 and infinity, vertices at roots of unity
    assert mult_at(u, 0.0) in (2, n)
    assert mult_at(u, np.exp(2j * np.pi / n)) in (2, n)


def test_tetrahedral_invariant():
    G = build_group("tetrahedral")
    u = invariant_map(G)
    assert u.degree == 12
    assert branch_data(G, u).mults == (3, 3, 2)


def test_octahedral_branch_data():
    G = build_group("octahedral")
    assert branch_data(G, invariant_map(G)).mults == (4, 3, 2)


def test_icosahedral_orbit_sizes():
    G = build_group("icosahedral")
    bd = branch_data(G, invariant_map(G))
    assert bd.mults == (5, 3, 2)
    assert bd.orbit_sizes() == (12, 20, 30)


@pytest.mark.parametrize("label, sizes", [("tetrahedral", (4, 4, 6)), ("octahedral", (6, 8, 12))])
def test_platonic_orbit_sizes(label, sizes):
    G = build_group(label)
    assert branch_data(G, invariant_map(G)).orbit_sizes() == sizes


def test_dihedral_orbit_sizes():
    G = build_group("dihedral", 5)
    assert sorted(branch_data(G, invariant_map(G)).orbit_sizes()) == [2, 5, 5]


def test_cyclic_branch_convention():
    G = build_group("cyclic", 4)
    assert branch_data(G, invariant_map(G)).mults == (4, 1, 4)


def test_branch_data_rejects_wrong_map():
    G = build_group("dihedral", 3)
    with pytest.raises(GroupError):
        branch_data(G, RationalMap(Poly([0, 0, 0, 1])))


@pytest.mark.parametrize("label, n", LABELS)
def test_riemann_hurwitz(label, n):
    G = group(label, n)
    u = invariant_map(G)
    assert branch_data(G, u).hurwitz_sum() == 2 * u.degree - 2


@pytest.mark.parametrize("label, n", LABELS)
def test_invariance_and_reflection(label, n):
    G = group(label, n)
    u = invariant_map(G)
    assert verify_invariance(u, G) < 1e-8
    assert reflection_residual(u) < 1e-8


def test_invariance_exact_for_power():
    G = build_group("cyclic", 5)
    assert verify_invariance(RationalMap(Poly(np.eye(6)[5])), G) < 1e-10


def test_broken_invariance_detected():
    n = 5
    c = np.zeros(n + 1, complex)
    c[n], c[1] = 1.0, 1e-3
    assert verify_invariance(RationalMap(Poly(c)), build_group("cyclic", n)) > 1e-6


def test_icosahedral_invariance():
    G = build_group("icosahedral")
    assert verify_invariance(invariant_map(G), G) < 1e-8


@pytest.mark.parametrize("label, n", [("dihedral", 4), ("tetrahedral", None), ("octahedral", None)])
def test_fibers_are_orbits(label, n):
    G = group(label, n)
    inv = orbit_invariant(G)
    rng = np.random.default_rng(5)
    for _ in range(3):
        x = complex(rng.normal(), rng.normal())
        pre = inv.preimages(x)
        assert len(pre) == G.order
        assert np.min(np.abs(pre[:, None] - pre[None, :]) + np.eye(len(pre))) > 1e-6
        orbit = np.array(G.orbit(pre[0]))
        assert len(orbit) == G.order
        assert all(np.min(np.abs(orbit - p)) < 1e-7 for p in pre)
        assert np.allclose(inv(pre), x, atol=1e-8)


@pytest.mark.parametrize("label, n", [("dihedral", 3), ("icosahedral", None)])
def test_fiber_shares_multiplicity(label, n):
    G = group(label, n)
    u = invariant_map(G)
    for B in orbit_invariant(G).branch.orbits:
        assert len({mult_at(u, p) for p in B}) == 1


def test_stereo_roundtrip():
    z = np.array([0.3 + 0.1j, -2 + 5j, 1j])
    assert np.allclose(stereo(unstereo(z)), z)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(LABELS), st.integers(0, 10 ** 6))
def test_group_elements_permute_orbits(case, seed):
    G = group(*case)
    rng = np.random.default_rng(seed)
    z = complex(rng.normal(), rng.normal())
    orbit = np.array(G.orbit(z))
    g = G.elements[int(rng.integers(G.order))]
    assert all(np.min(np.abs(orbit - g(p))) < 1e-7 * max(1, abs(p)) ** 2 for p in orbit)

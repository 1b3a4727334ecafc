"""Finite Moebius groups, their invariant rational maps and branch data.

Groups are realized as unitary matrices acting on the stereographic
coordinate ``z = (x + i y)/(1 - x3)`` of the unit sphere.  Each model is
oriented so that complex conjugation (the mirror ``y -> -y``) normalizes
the group and preserves every branch orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .complexrat import INF, Poly, RationalMap, is_infinity, mult_at

PHI = (1.0 + math.sqrt(5.0)) / 2.0

# multiplicities (n0, n1, n_inf) in table order
TABLE = {
    "tetrahedral": (3, 3, 2),
    "octahedral": (4, 3, 2),
    "icosahedral": (5, 3, 2),
}
ORBIT_SIZES = {
    "tetrahedral": (4, 4, 6),
    "octahedral": (6, 8, 12),
    "icosahedral": (12, 20, 30),
}
LABELS = ("cyclic", "dihedral", "tetrahedral", "octahedral", "icosahedral")


class GroupError(ValueError):
    pass


# ---------------------------------------------------------------- geometry

def stereo(p: np.ndarray):
    """Unit vector(s) to the stereographic coordinate; the north pole is ``INF``."""
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        if p[2] > 1.0 - 1e-14:
            return INF
        return complex(p[0], p[1]) / (1.0 - p[2])
    out = np.empty(p.shape[0], dtype=complex)
    north = p[:, 2] > 1.0 - 1e-14
    out[north] = complex(INF, 0.0)
    q = p[~north]
    out[~north] = (q[:, 0] + 1j * q[:, 1]) / (1.0 - q[:, 2])
    return out


def unstereo(z) -> np.ndarray:
    """Stereographic coordinate(s) back to unit vectors."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty((z.size, 3))
    inf = np.isinf(z)
    out[inf] = (0.0, 0.0, 1.0)
    w = z[~inf]
    r2 = np.abs(w) ** 2
    out[~inf, 0] = 2 * w.real / (1 + r2)
    out[~inf, 1] = 2 * w.imag / (1 + r2)
    out[~inf, 2] = (r2 - 1) / (r2 + 1)
    return out[0] if scalar else out


def rotation_matrix(axis, angle: float) -> np.ndarray:
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    K = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K


def su2_from_rotation(R: np.ndarray) -> np.ndarray:
    """Unitary Moebius matrix acting on ``z`` as ``R`` acts on the sphere."""
    R = np.asarray(R, dtype=float)
    # Shepperd's quaternion extraction, stable near half turns
    tr = np.trace(R)
    k = int(np.argmax([tr, R[0, 0], R[1, 1], R[2, 2]]))
    if k == 0:
        w = 0.5 * math.sqrt(1.0 + tr)
        x, y, z = (R[2, 1] - R[1, 2]) / (4 * w), (R[0, 2] - R[2, 0]) / (4 * w), (R[1, 0] - R[0, 1]) / (4 * w)
    elif k == 1:
        x = 0.5 * math.sqrt(1.0 + 2 * R[0, 0] - tr)
        w, y, z = (R[2, 1] - R[1, 2]) / (4 * x), (R[0, 1] + R[1, 0]) / (4 * x), (R[0, 2] + R[2, 0]) / (4 * x)
    elif k == 2:
        y = 0.5 * math.sqrt(1.0 + 2 * R[1, 1] - tr)
        w, x, z = (R[0, 2] - R[2, 0]) / (4 * y), (R[0, 1] + R[1, 0]) / (4 * y), (R[1, 2] + R[2, 1]) / (4 * y)
    else:
        z = 0.5 * math.sqrt(1.0 + 2 * R[2, 2] - tr)
        w, x, y = (R[1, 0] - R[0, 1]) / (4 * z), (R[0, 2] + R[2, 0]) / (4 * z), (R[1, 2] + R[2, 1]) / (4 * z)
    # conj(exp(-i angle/2 n.sigma)) with this stereographic convention
    return np.array([[w + 1j * z, 1j * x - y], [1j * x + y, w - 1j * z]], dtype=complex)


# ---------------------------------------------------------------- elements

def mobius_apply(m: np.ndarray, z, conjugate: bool = False):
    """Apply ``z -> m(z)`` (or ``m(conj z)``) with ``INF`` handled."""
    z = np.asarray(z, dtype=complex)
    if conjugate:
        z = np.conj(z)
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty(z.shape, dtype=complex)
    inf = np.isinf(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        den = c * z + d
        out = (a * z + b) / den
        out[~inf & (np.abs(den) < 1e-300)] = complex(INF, 0)
    if np.any(inf):
        out[inf] = a / c if abs(c) > 1e-14 else complex(INF, 0)
    return out[0] if scalar else out


@dataclass(frozen=True)
class MoebiusElem:
    """A (possibly anticonformal) Moebius map ``z -> m(z)`` or ``m(conj z)``.

    Matrices have determinant one and are compared up to sign.
    """

    matrix: np.ndarray
    conjugate: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        det = np.linalg.det(m)
        if abs(det) < 1e-300:
            raise GroupError("singular Moebius matrix")
        m = m / np.sqrt(det)
        object.__setattr__(self, "matrix", m)

    def __call__(self, z):
        return mobius_apply(self.matrix, z, self.conjugate)

    def __mul__(self, other: "MoebiusElem") -> "MoebiusElem":
        rhs = np.conj(other.matrix) if self.conjugate else other.matrix
        return MoebiusElem(self.matrix @ rhs, self.conjugate ^ other.conjugate)

    def inverse(self) -> "MoebiusElem":
        inv = np.linalg.inv(self.matrix)
        if self.conjugate:
            inv = np.conj(inv)
        return MoebiusElem(inv, self.conjugate)

    def same(self, other: "MoebiusElem", tol: float = 1e-9) -> bool:
        if self.conjugate != other.conjugate:
            return False
        a, b = self.matrix, other.matrix
        return min(np.max(np.abs(a - b)), np.max(np.abs(a + b))) < tol

    @property
    def is_identity(self) -> bool:
        return self.same(MoebiusElem(np.eye(2)))

    def fixed_points(self) -> list:
        """Fixed points of a conformal non-identity element."""
        a, b, c, d = self.matrix.ravel()
        if abs(c) < 1e-14:
            return [INF, b / (d - a)] if abs(d - a) > 1e-14 else [INF]
        # roots of c z^2 + (d - a) z - b, in the cancellation-free form
        B = d - a
        disc = np.sqrt(B * B + 4 * b * c)
        if (B.conjugate() * disc).real < 0:
            disc = -disc
        q = -0.5 * (B + disc)
        if abs(q) < 1e-14:
            return [q / c, INF]
        return [q / c, -b / q]

    def order(self, max_order: int = 240) -> int:
        g = self
        for k in range(1, max_order + 1):
            if g.is_identity:
                return k
            g = g * self
        raise GroupError("element of infinite or excessive order")

    def rotation(self) -> np.ndarray:
        """Induced orthogonal map of the sphere (O(3), conj -> mirror y)."""
        pts = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0], [-1.0, 0, 0], [0, -1.0, 0], [0, 0, -1.0]])
        img = unstereo(self(stereo(pts)))
        # R e_k = (img_k - img_{k+3}) / 2
        return ((img[:3] - img[3:]) / 2.0).T


CONJ = MoebiusElem(np.eye(2), conjugate=True)


# ---------------------------------------------------------------- groups

@dataclass(frozen=True)
class FiniteMoebiusGroup:
    label: str
    n: int
    elements: tuple

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def name(self) -> str:
        return f"{self.label}({self.n})" if self.label in ("cyclic", "dihedral") else self.label

    def expected_order(self) -> int:
        return {"cyclic": self.n, "dihedral": 2 * self.n, "tetrahedral": 12,
                "octahedral": 24, "icosahedral": 60}[self.label]

    def contains(self, g: MoebiusElem) -> bool:
        return any(g.same(h) for h in self.elements)

    def with_reflection(self) -> list:
        """The group generated by ``G`` and ``z -> conj z``."""
        return list(self.elements) + [CONJ * g for g in self.elements]

    def orbit(self, z) -> list:
        pts = []
        for g in self.elements:
            w = g(z)
            if not any(_same_point(w, p) for p in pts):
                pts.append(w)
        return pts


def _same_point(a, b, tol=1e-8) -> bool:
    if is_infinity(a) or is_infinity(b):
        return is_infinity(a) and is_infinity(b)
    return abs(a - b) < tol * max(1.0, abs(a), abs(b))


def _close(gens: list) -> list:
    """Rotation-matrix closure of a generating set."""
    elems = [np.eye(3)]
    frontier = [np.eye(3)]
    while frontier:
        new = []
        for a in frontier:
            for g in gens:
                b = g @ a
                if not any(np.max(np.abs(b - e)) < 1e-9 for e in elems):
                    elems.append(b)
                    new.append(b)
        frontier = new
        if len(elems) > 240:
            raise GroupError("closure did not terminate")
    return elems


def _tetra_vertices() -> np.ndarray:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / math.sqrt(3)
    return v @ rotation_matrix([0, 0, 1], math.pi / 4).T


def _ico_vertices() -> np.ndarray:
    v = []
    for s1 in (1, -1):
        for s2 in (1, -1):
            v += [(0, s1, s2 * PHI), (s1, s2 * PHI, 0), (s2 * PHI, 0, s1)]
    v = np.array(v, dtype=float)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def build_group(label: str, n: int | None = None) -> FiniteMoebiusGroup:
    """Concrete unitary model of ``Z_n``, ``D_n``, ``A4``, ``S4`` or ``A5``."""
    label = label.lower()
    aliases = {"z": "cyclic", "d": "dihedral", "a4": "tetrahedral", "s4": "octahedral",
               "a5": "icosahedral", "tetra": "tetrahedral", "octa": "octahedral", "ico": "icosahedral"}
    label = aliases.get(label, label)
    if label not in LABELS:
        raise GroupError(f"unknown group label {label!r}")
    if label in ("cyclic", "dihedral"):
        if n is None or n < 2:
            raise GroupError("cyclic and dihedral groups need n >= 2")
        gens = [rotation_matrix([0, 0, 1], 2 * math.pi / n)]
        if label == "dihedral":
            gens.append(rotation_matrix([1, 0, 0], math.pi))
    elif label == "tetrahedral":
        n = 0
        gens = [rotation_matrix([0, 0, 1], math.pi), rotation_matrix(_tetra_vertices()[0], 2 * math.pi / 3)]
    elif label == "octahedral":
        n = 0
        gens = [rotation_matrix([0, 0, 1], math.pi / 2), rotation_matrix([1, 1, 1], 2 * math.pi / 3)]
    else:
        n = 0
        gens = [rotation_matrix(_ico_vertices()[0], 2 * math.pi / 5), rotation_matrix([0, 0, 1], math.pi)]
    rots = _close(gens)
    elems = tuple(MoebiusElem(su2_from_rotation(R)) for R in rots)
    G = FiniteMoebiusGroup(label, int(n), elems)
    if G.order != G.expected_order():
        raise GroupError(f"{G.name}: built {G.order} elements, expected {G.expected_order()}")
    return G


# ---------------------------------------------------------------- orbits

def _orbit_key(points) -> tuple:
    return tuple(sorted((math.inf, 0.0) if is_infinity(p) else (round(p.real, 9), round(p.imag, 9))
                        for p in points))


def branch_orbits(G: FiniteMoebiusGroup) -> list:
    """Orbits of fixed points of non-identity elements, as lists of points."""
    pts = []
    for g in G.elements:
        if g.is_identity:
            continue
        for p in g.fixed_points():
            if not any(_same_point(p, q) for q in pts):
                pts.append(p)
    # every point of a branch orbit is itself a fixed point, so group the
    # directly computed points rather than transporting one representative
    orbits = []
    for p in pts:
        for orb in orbits:
            if any(_same_point(g(orb[0]), p) for g in G.elements):
                orb.append(p)
                break
        else:
            orbits.append([p])
    return orbits


@dataclass(frozen=True)
class BranchData:
    """Multiplicities and fibers of the invariant over ``0, 1, inf``."""

    mults: tuple  # (n0, n1, n_inf)
    orbits: tuple  # (B0, B1, B_inf) as point lists
    order: int
    values: tuple = (0.0, 1.0, INF)

    def hurwitz_sum(self) -> int:
        return sum(len(B) * (m - 1) for B, m in zip(self.orbits, self.mults))

    def branch_multiplicities(self) -> tuple:
        """Multiplicities at branch points only (drops unbranched fibers)."""
        return tuple(m for m in self.mults if m > 1)

    def orbit_sizes(self) -> tuple:
        return tuple(len(B) for B in self.orbits)


def _assign_slots(G: FiniteMoebiusGroup, orbits: list) -> list:
    d = G.order
    if G.label == "dihedral":
        target = (2, 2, G.n)
    else:
        target = TABLE[G.label]
    cands = sorted(orbits, key=lambda B: (len(B), _orbit_key(B)))
    out = []
    for m in target:
        for B in cands:
            if d // len(B) == m and not any(B is o for o in out):
                out.append(B)
                break
        else:
            raise GroupError(f"{G.name}: no orbit of multiplicity {m}")
    return out


@dataclass(frozen=True)
class OrbitInvariant:
    """``u(z) = c * prod (z - a)**n_zero / prod (z - b)**n_pole``.

    ``zeros`` and ``poles`` exclude the point at infinity.
    """

    zeros: np.ndarray
    n_zero: int
    poles: np.ndarray
    n_pole: int
    scale: complex
    branch: BranchData
    ones: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    n_one: int = 1

    @cached_property
    def rational(self) -> RationalMap:
        num = Poly.from_roots(np.repeat(self.zeros, self.n_zero), self.scale)
        den = Poly.from_roots(np.repeat(self.poles, self.n_pole))
        return RationalMap(num, den)

    @property
    def degree(self) -> int:
        return self.branch.order

    def log_derivs(self, z):
        z = np.asarray(z, dtype=complex)[..., None]
        L = self.n_zero * np.sum(1.0 / (z - self.zeros), axis=-1) - self.n_pole * np.sum(1.0 / (z - self.poles), axis=-1)
        L1 = -self.n_zero * np.sum(1.0 / (z - self.zeros) ** 2, axis=-1) + self.n_pole * np.sum(1.0 / (z - self.poles) ** 2, axis=-1)
        L2 = 2 * self.n_zero * np.sum(1.0 / (z - self.zeros) ** 3, axis=-1) - 2 * self.n_pole * np.sum(1.0 / (z - self.poles) ** 3, axis=-1)
        return L, L1, L2

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        zz = z[..., None]
        return self.scale * np.prod((zz - self.zeros) ** self.n_zero, axis=-1) / np.prod(
            (zz - self.poles) ** self.n_pole, axis=-1)

    @cached_property
    def _one_scale(self) -> complex:
        # u - 1 = c1 prod (z - p)^n_one / prod (z - b)^n_pole; fix c1 at a point far from the fiber over 1
        z0 = self.zeros[0] if self.zeros.size else 0.123 + 0.456j
        return complex((self(z0) - 1.0) / self._one_ratio(z0))

    def _one_ratio(self, z):
        zz = np.asarray(z, dtype=complex)[..., None]
        return np.prod((zz - self.ones) ** self.n_one, axis=-1) / np.prod((zz - self.poles) ** self.n_pole, axis=-1)

    def minus_one(self, z):
        """``u(z) - 1`` without cancellation near the fiber over 1."""
        return self._one_scale * self._one_ratio(z)

    def derivs(self, z):
        """``u, u', u'', u'''`` at finite points off the zeros and poles."""
        u = self(z)
        L, L1, L2 = self.log_derivs(z)
        d1 = u * L
        d2 = u * (L * L + L1)
        d3 = u * (L ** 3 + 3 * L * L1 + L2)
        return u, d1, d2, d3

    def schwarzian(self, z):
        _, d1, d2, d3 = self.derivs(z)
        return d3 / d1 - 1.5 * (d2 / d1) ** 2

    def inverted(self) -> "OrbitInvariant":
        """The same map in the chart ``w = 1/z``, i.e. ``w -> u(1/w)``."""
        zf = self.zeros[self.zeros != 0]
        pf = self.poles[self.poles != 0]
        scale = self.scale * np.prod((-zf) ** self.n_zero) / np.prod((-pf) ** self.n_pole)
        # each finite zero gives w**-n_zero, each finite pole w**n_pole
        e = self.n_pole * self.poles.size - self.n_zero * self.zeros.size
        zeros, poles = 1.0 / zf, 1.0 / pf
        if e > 0:
            zeros = np.append(zeros, 0j)
        elif e < 0:
            poles = np.append(poles, 0j)
        of = self.ones[self.ones != 0]
        ones = 1.0 / of
        if self.n_one * self.ones.size < self.degree:
            # the fiber over 1 contains infinity, which becomes w = 0
            ones = np.append(ones, 0j)
        return OrbitInvariant(zeros.astype(complex), self.n_zero, poles.astype(complex), self.n_pole,
                              complex(scale), self.branch, ones.astype(complex), self.n_one)

    def preimages(self, x: complex, newton_steps: int = 4) -> np.ndarray:
        """All finite solutions of ``u(z) = x`` for a non-branch value ``x``."""
        r = self.rational
        roots = (r.num - r.den * x).roots()
        for _ in range(newton_steps):
            u, d1, _, _ = self.derivs(roots)
            roots = roots - (u - x) / d1
        return roots


def _orbit_invariant(G, B0, n0, Binf, ninf, B1, branch) -> OrbitInvariant:
    zeros = np.array([p for p in B0 if not is_infinity(p)], dtype=complex)
    poles = np.array([p for p in Binf if not is_infinity(p)], dtype=complex)
    raw = OrbitInvariant(zeros, n0, poles, ninf, 1.0 + 0j, branch)
    p1 = next(p for p in B1 if not is_infinity(p))
    c = 1.0 / raw(p1)
    ones = np.array([p for p in B1 if not is_infinity(p)], dtype=complex)
    return OrbitInvariant(zeros, n0, poles, ninf, complex(c), branch, ones, branch.mults[1])


def orbit_invariant(G: FiniteMoebiusGroup) -> OrbitInvariant:
    """Normalized orbit-quotient invariant with branch values ``0, 1, inf``.

    The orbit quotient ``prod(z - g p)/prod(z - g q)`` is taken with ``p``
    and ``q`` in two branch orbits, so the result is already normalized up
    to a scale fixed by sending the third orbit to 1.
    """
    d = G.order
    if G.label == "cyclic":
        n = G.n
        roots = np.exp(2j * np.pi * np.arange(n) / n)
        bd = BranchData((n, 1, n), ((0j,), tuple(roots), (INF,)), d)
        return OrbitInvariant(np.array([0j]), n, np.zeros(0, complex), 1, 1.0 + 0j, bd, roots, 1)
    B0, B1, Binf = _assign_slots(G, branch_orbits(G))
    bd = BranchData(tuple(d // len(B) for B in (B0, B1, Binf)), (tuple(B0), tuple(B1), tuple(Binf)), d)
    return _orbit_invariant(G, B0, bd.mults[0], Binf, bd.mults[2], B1, bd)


def nnoid_invariant(G: FiniteMoebiusGroup) -> OrbitInvariant:
    """Invariant used to build n-noid potentials.

    Identical to :func:`orbit_invariant` except for cyclic groups, where the
    unbranched fiber (the n-th roots of unity) is moved to ``inf`` via
    ``z**n / (z**n - 1)``, giving multiplicities ``(n, n, 1)``.
    """
    if G.label != "cyclic":
        return orbit_invariant(G)
    n = G.n
    roots = np.exp(2j * np.pi * np.arange(n) / n)
    bd = BranchData((n, n, 1), ((0j,), (INF,), tuple(roots)), G.order)
    return OrbitInvariant(np.array([0j]), n, roots, 1, 1.0 + 0j, bd, np.zeros(0, complex), n)


def invariant_map(G: FiniteMoebiusGroup) -> RationalMap:
    """Generator of the invariant field, branch values ``{0, 1, inf}``."""
    return orbit_invariant(G).rational


def branch_data(G: FiniteMoebiusGroup, u: RationalMap) -> BranchData:
    """Recompute multiplicities of ``u`` on the branch orbits and check the table."""
    inv = orbit_invariant(G)
    mults = []
    for B, target in zip(inv.branch.orbits, inv.branch.mults):
        ms = {mult_at(u, p) for p in B}
        if len(ms) != 1:
            raise GroupError(f"{G.name}: multiplicity differs along an orbit: {ms}")
        m = ms.pop()
        if m != target:
            raise GroupError(f"{G.name}: multiplicity {m} where the table has {target}")
        mults.append(m)
    if G.label in ORBIT_SIZES and inv.branch.orbit_sizes() != ORBIT_SIZES[G.label]:
        raise GroupError(f"{G.name}: orbit sizes {inv.branch.orbit_sizes()}")
    if G.label == "dihedral" and sorted(inv.branch.orbit_sizes()) != sorted((G.n, G.n, 2)):
        raise GroupError(f"{G.name}: orbit sizes {inv.branch.orbit_sizes()}")
    return BranchData(tuple(mults), inv.branch.orbits, G.order)


def _sample_points(count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.normal(size=count) + 1j * rng.normal(size=count)


def verify_invariance(u, G: FiniteMoebiusGroup, samples: int = 50, seed: int = 0) -> float:
    """max over g, z of ``|u(g z) - u(z)| / (1 + |u(z)|)``."""
    z = _sample_points(samples, seed)
    uz = u(z)
    worst = 0.0
    for g in G.elements:
        worst = max(worst, float(np.max(np.abs(u(g(z)) - uz) / (1 + np.abs(uz)))))
    return worst


def reflection_residual(u, samples: int = 50, seed: int = 1) -> float:
    """max of ``|conj(u(conj z)) - u(z)| / (1 + |u(z)|)``."""
    z = _sample_points(samples, seed)
    uz = u(z)
    return float(np.max(np.abs(np.conj(u(np.conj(z))) - uz) / (1 + np.abs(uz))))

"""Unitary frames on a sphere grid, the Sym map at lambda = 1, closing and symmetry checks."""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .complexrat import is_infinity
from .looplab import IwasawaError, LoopSL2, dagger, inv2, iwasawa
from .moebius import MoebiusElem, FiniteMoebiusGroup, stereo, unstereo
from .monodromy import (BASEPOINT, LambdaGrid, end_loop_monodromy, frame_at_base, plan_segment,
                        singular_points, transport, upstairs_basepoint, xi_coef)
from .potentials import PotentialSpec, chart_gauge
from .unitarize import Unitarizer

SIGMA = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
EXPECTED_ORDERS = {"cyclic": lambda n: 2 * n, "dihedral": lambda n: 4 * n,
                   "tetrahedral": lambda n: 24, "octahedral": lambda n: 48, "icosahedral": lambda n: 120}


class SurfaceError(RuntimeError):
    pass


class UnitarityWarning(UserWarning):
    pass


# ---------------------------------------------------------------- Sym map

def su2_coords(f: np.ndarray) -> np.ndarray:
    """Coordinates of ``f = (i/2)(x s1 + y s2 + z s3)``; broadcasts over leading axes."""
    return np.real(-1j * np.einsum("...ij,kji->...k", f, SIGMA))


def su2_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 0.5j * np.einsum("...k,kij->...ij", x.astype(complex), SIGMA)


def sym_matrix(F_minus, F_one, F_plus, eps: float) -> np.ndarray:
    """``F'(1) F(1)^{-1}`` by a central difference in ``theta``."""
    return (np.asarray(F_plus) - np.asarray(F_minus)) / (2 * eps) @ inv2(np.asarray(F_one))


def anti_hermitian_residual(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f)
    tr = f[..., 0, 0] + f[..., 1, 1]
    return np.maximum(np.max(np.abs(f + dagger(f)), axis=(-2, -1)), np.abs(tr))


def sym_point(F_minus, F_one, F_plus, eps: float = 1e-3, tol: float = 1e-5) -> np.ndarray:
    """Point of R^3 from unitary frames at ``e^{-i eps}``, ``1`` and ``e^{i eps}``."""
    f = sym_matrix(F_minus, F_one, F_plus, eps)
    res = float(np.max(anti_hermitian_residual(f)))
    scale = max(1.0, float(np.max(np.abs(f))))
    if res > tol * scale:
        warnings.warn(f"Sym value is not anti-Hermitian (residual {res:.3g})", UnitarityWarning, stacklevel=2)
    return su2_coords(f)


# ---------------------------------------------------------------- domain grid

def fibonacci_sphere(count: int) -> np.ndarray:
    k = np.arange(count) + 0.5
    z = 1 - 2 * k / count
    phi = math.pi * (3 - math.sqrt(5)) * k
    r = np.sqrt(1 - z * z)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _full_group_matrices(G: FiniteMoebiusGroup, include_reflection: bool = True) -> list:
    elems = G.with_reflection() if include_reflection else list(G.elements)
    return [g.rotation() for g in elems]


def _frame_axes(p: np.ndarray) -> tuple:
    a = np.array([1.0, 0, 0]) if abs(p[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = np.cross(p, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(p, e1)


def end_vectors(spec: PotentialSpec) -> np.ndarray:
    ends = spec.ends()
    if not ends:
        return np.zeros((0, 3))
    return np.array([unstereo(p) for p in ends])


def _cut_radius(E: np.ndarray, r_cut: float) -> float:
    if len(E) < 2:
        return r_cut
    ang = np.arccos(np.clip(E @ E.T, -1, 1))
    sep = float(np.min(ang[np.triu_indices(len(E), 1)]))
    return min(r_cut, 0.4 * sep)


@dataclass(frozen=True)
class DomainGrid:
    """Sample points on the sphere and the excluded caps around the ends."""

    points: np.ndarray  # (V, 3) unit vectors
    ends: np.ndarray  # (E, 3)
    r_cut: float
    r_inner: float

    @property
    def z(self) -> np.ndarray:
        return stereo(self.points) if len(self.points) else np.zeros(0, dtype=complex)


def domain_grid(spec: PotentialSpec, sphere_points: int = 600, radial: int = 4, angular: int = 48,
                r_cut: float = 0.35, inner_frac: float = 0.3, symmetric: bool = True) -> DomainGrid:
    """Quasi-uniform points away from the ends plus rings around each end.

    With ``symmetric`` the point set is made invariant under ``G`` and
    ``z -> conj z``: candidates in a fundamental region are kept and their
    orbits added.  Positions are symmetric; frames are still computed
    independently at every point.
    """
    E = end_vectors(spec)
    r_cut = _cut_radius(E, r_cut)
    r_in = inner_frac * r_cut
    cand = [fibonacci_sphere(sphere_points)]
    if len(E):
        ang = np.arccos(np.clip(cand[0] @ E.T, -1, 1))
        cand[0] = cand[0][np.min(ang, axis=1) >= r_cut]
        radii = np.geomspace(0.9 * r_cut, r_in, radial) if radial > 1 else np.array([0.9 * r_cut])
        t = 2 * np.pi * np.arange(angular) / angular
        for e in E:
            e1, e2 = _frame_axes(e)
            for rad in radii:
                ring = (np.cos(rad) * e[None] + np.sin(rad) * (np.cos(t)[:, None] * e1 + np.sin(t)[:, None] * e2))
                cand.append(ring)
    pts = np.concatenate(cand)
    if symmetric:
        pts = _symmetrize(pts, _full_group_matrices(spec.group))
    return DomainGrid(pts, E, r_cut, r_in)


def _symmetrize(pts: np.ndarray, mats: list, tol: float = 1e-9) -> np.ndarray:
    a = np.array([0.3141592653, 0.5772156649, 0.7536067024])
    a /= np.linalg.norm(a)
    images = np.einsum("gij,vj->gvi", np.array(mats), pts)
    key = images @ a
    keep = key[0] >= np.max(key, axis=0) - 1e-12  # mats[0] is the identity
    orbit = images[:, keep].transpose(1, 0, 2).reshape(-1, 3)
    orbit /= np.linalg.norm(orbit, axis=1, keepdims=True)
    tree = cKDTree(orbit)
    first = np.arange(len(orbit))
    for i, j in sorted(tree.query_pairs(tol)):
        first[j] = min(first[j], first[i])
    return orbit[first == np.arange(len(orbit))]


def triangulate(points: np.ndarray, markers: np.ndarray) -> np.ndarray:
    """Outward-oriented triangles of the hull of ``points``, dropping any that touch ``markers``."""
    if len(points) < 3:
        return np.zeros((0, 3), dtype=int)
    allp = np.concatenate([points, markers]) if len(markers) else points
    if len(allp) < 4:
        return np.array([[0, 1, 2]]) if len(points) == 3 else np.zeros((0, 3), dtype=int)
    hull = ConvexHull(allp)
    faces = hull.simplices
    faces = faces[np.all(faces < len(points), axis=1)]
    a, b, c = (points[faces[:, k]] for k in range(3))
    normal = np.cross(b - a, c - a)
    flip = np.einsum("ij,ij->i", normal, a + b + c) < 0
    faces[flip] = faces[flip][:, ::-1]
    area = 0.5 * np.linalg.norm(normal, axis=1)
    faces = faces[area > 1e-14]
    # deterministic order
    rot = np.argmin(faces, axis=1)
    faces = np.array([np.roll(f, -r) for f, r in zip(faces, rot)]) if len(faces) else faces.reshape(0, 3)
    return faces[np.lexsort(faces.T[::-1])] if len(faces) else faces


# ---------------------------------------------------------------- frames

def _use_w(z) -> bool:
    return is_infinity(z) or abs(z) > 1.0


def _edge_chart(pa: np.ndarray, pb: np.ndarray) -> str:
    m = pa + pb
    # |z| <= 1 on the lower hemisphere
    return "z" if m[2] <= 0 else "w"


def _to_chart(Phi: np.ndarray, z, stored: str, want: str, lam: np.ndarray) -> np.ndarray:
    if stored == want:
        return Phi
    h = chart_gauge(z, lam)
    return Phi @ h if want == "w" else Phi @ inv2(h)


def _coord(z, chart: str) -> complex:
    if chart == "z":
        return complex(z)
    return 0j if is_infinity(z) else 1.0 / complex(z)


@dataclass
class FrameField:
    """Raw frames ``Phi`` (chart-tagged) and the Sym data at every grid point."""

    z: np.ndarray
    charts: list
    Phi: np.ndarray  # (V, L, 2, 2), nan where unreachable
    F: np.ndarray  # (V, 3, 2, 2) at e^{-i eps}, 1, e^{i eps}
    points: np.ndarray  # (V, 3)
    ok: np.ndarray
    anti_hermitian: np.ndarray
    truncation: np.ndarray
    eps: float


def transport_frames(spec: PotentialSpec, z: np.ndarray, edges: list, lam: np.ndarray,
                     basepoint: complex = BASEPOINT, tol: float = 1e-10) -> tuple:
    """``Phi`` at every grid point along a spanning tree of ``edges`` (BFS from the basepoint)."""
    V = len(z)
    pts = unstereo(z).reshape(-1, 3)
    charts = ["w" if _use_w(p) else "z" for p in z]
    Phi = np.full((V, lam.size, 2, 2), np.nan, dtype=complex)
    if V == 0:
        return Phi, charts
    zb = upstairs_basepoint(spec, basepoint)
    sing = singular_points(spec)
    root = int(np.argmax(pts @ unstereo(zb)))
    zr = z[root]
    Phi_b = frame_at_base(spec, zb, lam)
    clear = 0.25 * min([abs(q - zb) for q in sing] + [1.0])
    if is_infinity(zr) or abs(zr) > 2.0:
        # reach the unit circle in z, then continue in the chart w = 1/z
        zm = np.exp(1j * (0.0 if is_infinity(zr) else np.angle(zr)))
        zm = zm if min(abs(zm - q) for q in sing) > clear else zm * np.exp(0.1j)
        Phi_m = Phi_b @ transport(xi_coef(spec, "z"), plan_segment(zb, zm, sing, clear), lam, tol)
        at_inf = any(is_infinity(q) for B in spec.branch.orbits for q in B)
        sing_w = [1.0 / q for q in sing if q != 0] + ([0j] if at_inf else [])
        wr = _coord(zr, "w")
        path = plan_segment(1.0 / zm, wr, sing_w, min(clear, 0.5 * min(abs(wr - q) for q in sing_w)))
        Phi_r = _to_chart(Phi_m, zm, "z", "w", lam) @ transport(xi_coef(spec, "w"), path, lam, tol)
        Phi[root] = _to_chart(Phi_r, zr, "w", charts[root], lam)
    else:
        path = plan_segment(zb, complex(zr), sing, min(clear, 0.5 * min(abs(zr - q) for q in sing)))
        Phi_r = Phi_b @ transport(xi_coef(spec, "z"), path, lam, tol)
        Phi[root] = _to_chart(Phi_r, zr, "z", charts[root], lam)
    adj = [[] for _ in range(V)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    coefs = {c: xi_coef(spec, c) for c in ("z", "w")}
    seen = np.zeros(V, dtype=bool)
    seen[root] = True
    queue = deque([root])
    while queue:
        a = queue.popleft()
        for b in sorted(adj[a]):
            if seen[b]:
                continue
            seen[b] = True
            c = _edge_chart(pts[a], pts[b])
            start = _to_chart(Phi[a], z[a], charts[a], c, lam)
            seg = [_coord(z[a], c), _coord(z[b], c)]
            end = start @ transport(coefs[c], seg, lam, tol)
            Phi[b] = _to_chart(end, z[b], c, charts[b], lam)
            queue.append(b)
    return Phi, charts


def dressed_sym(C: np.ndarray, Phi: np.ndarray, grid: LambdaGrid, N: int = 16, tail_tol: float = 1e-8) -> tuple:
    """Unitary factors at the three Sym samples and the truncation tail, for one grid point."""
    X = C @ Phi
    loop = LoopSL2(X[: grid.K], 1.0, grid.phase)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        iw = iwasawa(loop, N, tail_tol=tail_tol)
    tail = loop.tail_energy(N)
    idx = [grid.i_minus, grid.i_one, grid.i_plus]
    F = iw.unitary_factor(X[idx], grid.values[idx])
    return F, tail


def frame_field(spec: PotentialSpec, unitarizer: Unitarizer, z_grid, grid: LambdaGrid | None = None,
                edges: list | None = None, N: int = 16, basepoint: complex = BASEPOINT,
                tol: float = 1e-10) -> FrameField:
    """Dressed, Iwasawa-split frames and Sym points on ``z_grid``.

    ``edges`` (pairs of indices) define the transport graph; by default the
    hull triangulation of the grid is used.  Points whose splitting fails
    are flagged rather than raising.
    """
    grid = grid or unitarizer.grid
    lam = grid.values
    z = np.asarray(z_grid, dtype=complex).ravel()
    V = z.size
    if edges is None:
        faces = triangulate(unstereo(z).reshape(-1, 3), end_vectors(spec))
        edges = faces_to_edges(faces)
    Phi, charts = transport_frames(spec, z, edges, lam, basepoint, tol)
    F = np.full((V, 3, 2, 2), np.nan, dtype=complex)
    ok = np.zeros(V, dtype=bool)
    tails = np.full(V, np.nan)
    for v in range(V):
        if not np.all(np.isfinite(Phi[v])):
            continue
        try:
            F[v], tails[v] = dressed_sym(unitarizer.C, Phi[v], grid, N)
            ok[v] = True
        except (IwasawaError, np.linalg.LinAlgError):
            pass
    f = sym_matrix(F[:, 0], F[:, 1], F[:, 2], grid.eps)
    pts = su2_coords(f)
    ah = anti_hermitian_residual(f)
    bad = ok & (ah > 1e-5 * np.maximum(1.0, np.max(np.abs(f), axis=(1, 2))))
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} Sym values are not anti-Hermitian", UnitarityWarning, stacklevel=2)
    return FrameField(z, charts, Phi, F, pts, ok, ah, tails, grid.eps)


def faces_to_edges(faces: np.ndarray) -> list:
    e = set()
    for a, b, c in np.asarray(faces, dtype=int):
        for p, q in ((a, b), (b, c), (c, a)):
            e.add((min(p, q), max(p, q)))
    return sorted(e)


# ---------------------------------------------------------------- mesh

@dataclass
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray
    domain_map: np.ndarray
    puncture_mask: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=int).reshape(-1, 3)
        self.domain_map = np.asarray(self.domain_map, dtype=complex).ravel()
        if not np.all(np.isfinite(self.vertices)):
            raise SurfaceError("mesh vertices must be finite")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise SurfaceError("face index out of range")

    @property
    def diameter(self) -> float:
        v = self.vertices
        if len(v) < 2:
            return 0.0
        if len(v) > 4:
            try:
                v = v[ConvexHull(v).vertices]
            except Exception:
                pass
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))

    def face_areas(self) -> np.ndarray:
        if not len(self.faces):
            return np.zeros(0)
        a, b, c = (self.vertices[self.faces[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def build_mesh(spec: PotentialSpec, unitarizer: Unitarizer, dgrid: DomainGrid, N: int = 16,
               basepoint: complex = BASEPOINT, tol: float = 1e-10) -> tuple:
    """Frame field on ``dgrid`` and the mesh of the points that factor successfully."""
    faces = triangulate(dgrid.points, dgrid.ends)
    z = dgrid.z
    ff = frame_field(spec, unitarizer, z, unitarizer.grid, faces_to_edges(faces), N, basepoint, tol)
    keep = ff.ok
    index = -np.ones(len(z), dtype=int)
    index[keep] = np.arange(int(keep.sum()))
    faces = faces[np.all(keep[faces], axis=1)] if len(faces) else faces
    mesh = Mesh(ff.points[keep], index[faces] if len(faces) else faces, z[keep],
                {"r_cut": dgrid.r_cut, "r_inner": dgrid.r_inner,
                 "ends": [[float(x) for x in e] for e in dgrid.ends]})
    areas = mesh.face_areas()
    if len(areas):
        mesh.faces = mesh.faces[areas > 1e-14]
    return mesh, ff


def boundary_vertices(faces: np.ndarray, count: int) -> np.ndarray:
    """Mask of vertices on an edge that belongs to only one face."""
    edges = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    uniq, cnt = np.unique(edges, axis=0, return_counts=True)
    mask = np.zeros(count, dtype=bool)
    mask[uniq[cnt == 1].ravel()] = True
    return mask


def mean_curvature(mesh: Mesh) -> dict:
    """Cotangent-Laplacian estimate of ``|H|`` at interior vertices.

    Returns the median and the relative interquartile spread; a CMC mesh
    shows a small spread.
    """
    V, Fc = mesh.vertices, mesh.faces
    if len(Fc) == 0:
        return {"median": float("nan"), "spread": float("nan"), "count": 0}
    lap = np.zeros_like(V)
    area = np.zeros(len(V))
    for k in range(3):
        i, j, l = Fc[:, k], Fc[:, (k + 1) % 3], Fc[:, (k + 2) % 3]
        a, b = V[j] - V[i], V[l] - V[i]
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        cot = np.einsum("ij,ij->i", a, b) / np.maximum(cross, 1e-300)
        # the angle at i weighs the opposite edge j-l
        w = 0.5 * cot[:, None] * (V[l] - V[j])
        np.add.at(lap, j, w)
        np.add.at(lap, l, -w)
        np.add.at(area, i, cross / 6)
    inner = ~boundary_vertices(Fc, len(V)) & (area > 0)
    if not inner.any():
        return {"median": float("nan"), "spread": float("nan"), "count": 0}
    H = np.linalg.norm(lap[inner], axis=1) / (2 * area[inner])
    q1, med, q3 = np.percentile(H, [25, 50, 75])
    return {"median": float(med), "spread": float((q3 - q1) / med) if med else float("nan"),
            "count": int(inner.sum())}


# ---------------------------------------------------------------- closing

def identity_dressing(grid: LambdaGrid) -> Unitarizer:
    """A dressing that does nothing; used as a negative control."""
    L = grid.values.size
    C = np.repeat(np.eye(2, dtype=complex)[None], L, axis=0)
    return Unitarizer(grid, C, C.copy(), np.full(L, np.nan), ("identity",) * L)


def contractible_loop_monodromy(spec: PotentialSpec, lam, basepoint: complex = BASEPOINT,
                                tol: float = 1e-10) -> np.ndarray:
    """Left monodromy of a small loop at the basepoint that encloses no singular point."""
    zb = upstairs_basepoint(spec, basepoint)
    rad = 0.2 * min(abs(q - zb) for q in singular_points(spec))
    t = np.linspace(0, 2 * np.pi, 65)
    c = zb + rad
    loop = np.concatenate([[zb], c - rad * np.exp(1j * t)[1:]])
    Phi_b = frame_at_base(spec, zb, lam)
    return Phi_b @ transport(xi_coef(spec), loop, lam, tol) @ inv2(Phi_b)


def end_loops(spec: PotentialSpec, lam, basepoint: complex = BASEPOINT, per_slot: int = 1,
              tol: float = 1e-10) -> dict:
    """Left monodromies of loops around ``per_slot`` ends of every weighted slot."""
    zb = upstairs_basepoint(spec, basepoint)
    out = {}
    for k in spec.end_slots():
        B = sorted(spec.branch.orbits[k], key=lambda p: math.inf if is_infinity(p) else abs(p - zb))
        for j, p in enumerate(B[:per_slot]):
            out[f"{('0', '1', 'inf')[k]}:{j}"] = end_loop_monodromy(spec, p, zb, lam, tol)
    return out


def closure_check(spec: PotentialSpec, unitarizer: Unitarizer, frames: FrameField, loops: dict,
                  starts: int = 8, N: int = 16, diameter: float | None = None) -> dict:
    """``|f(end) - f(start)|`` after continuing the dressed frame around each loop.

    ``loops`` maps names to left monodromies ``M`` (``Phi -> M Phi``); the
    start points are ``starts`` grid points spread through ``frames``.
    """
    grid = unitarizer.grid
    good = np.flatnonzero(frames.ok)
    if good.size == 0:
        raise SurfaceError("no usable start points")
    pick = good[np.linspace(0, good.size - 1, min(starts, good.size)).astype(int)]
    if diameter is None:
        diameter = Mesh(frames.points[good], np.zeros((0, 3)), frames.z[good]).diameter
    out = {}
    for name, M in loops.items():
        worst = 0.0
        for v in pick:
            # the chart gauge only rotates F by a constant, so either chart works
            Phi = frames.Phi[v]
            F0, _ = dressed_sym(unitarizer.C, Phi, grid, N)
            F1, _ = dressed_sym(unitarizer.C, M @ Phi, grid, N)
            f0 = su2_coords(sym_matrix(F0[0], F0[1], F0[2], grid.eps))
            f1 = su2_coords(sym_matrix(F1[0], F1[1], F1[2], grid.eps))
            worst = max(worst, float(np.linalg.norm(f1 - f0)))
        out[name] = worst
    return {"residuals": out, "max": max(out.values(), default=0.0), "diameter": diameter,
            "relative": (max(out.values(), default=0.0) / diameter) if diameter else math.inf}


# ---------------------------------------------------------------- symmetry

@dataclass
class SymmetryReport:
    labels: list
    rotations: np.ndarray  # (g, 3, 3), orthogonal, det +-1
    translations: np.ndarray  # (g, 3)
    residuals: np.ndarray  # RMS mismatch
    determinants: np.ndarray
    pairs: np.ndarray  # matched points per element
    homomorphism_defect: float
    order: int
    injective: bool
    diameter: float
    expected_order: int | None = None

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if len(self.residuals) else 0.0

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "rotations": self.rotations.tolist(),
            "translations": self.translations.tolist(),
            "residuals": self.residuals.tolist(),
            "determinants": self.determinants.tolist(),
            "pairs": self.pairs.tolist(),
            "homomorphism_defect": self.homomorphism_defect,
            "order": self.order,
            "expected_order": self.expected_order,
            "injective": self.injective,
            "diameter": self.diameter,
            "max_residual": self.max_residual,
        }


def procrustes(X: np.ndarray, Y: np.ndarray, allow_reflection: bool = True) -> tuple:
    """Best ``R, t`` (orthogonal ``R``) with ``R x + t ~ y``; returns ``R, t, rms``."""
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    if len(X) < 3:
        raise SurfaceError("Procrustes needs at least three points")
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    A, B = X - mx, Y - my
    U, s, Vt = np.linalg.svd(A.T @ B)
    if s[0] == 0 or s[-1] < 1e-10 * s[0]:
        raise SurfaceError("point cloud is rank deficient; isometry not determined")
    R = (U @ Vt).T
    if not allow_reflection and np.linalg.det(R) < 0:
        D = np.diag([1.0, 1.0, -1.0])
        R = (U @ D @ Vt).T
    t = my - R @ mx
    rms = float(np.sqrt(np.mean(np.sum((X @ R.T + t - Y) ** 2, axis=1))))
    return R, t, rms


def _element_label(k: int, g: MoebiusElem, n_rot: int) -> str:
    return f"{'c' if g.conjugate else 'r'}{k % n_rot}"


def symmetry_check(mesh: Mesh, G: FiniteMoebiusGroup, include_reflection: bool = True,
                   match_tol: float = 1e-7) -> SymmetryReport:
    """Fit an isometry to ``f(z) -> f(tau z)`` for every element and test the homomorphism."""
    if len(mesh.vertices) < 3:
        raise SurfaceError("mesh is empty")
    elems = G.with_reflection() if include_reflection else list(G.elements)
    sphere = unstereo(mesh.domain_map).reshape(-1, 3)
    tree = cKDTree(sphere)
    diam = mesh.diameter
    Rs, ts, res, dets, npairs = [], [], [], [], []
    for g in elems:
        img = unstereo(g(mesh.domain_map)).reshape(-1, 3)
        d, j = tree.query(img)
        m = d < match_tol
        if m.sum() < 3:
            raise SurfaceError("grid is not invariant under the group")
        R, t, rms = procrustes(mesh.vertices[m], mesh.vertices[j[m]])
        Rs.append(R)
        ts.append(t)
        res.append(rms)
        dets.append(float(np.linalg.det(R)))
        npairs.append(int(m.sum()))
    Rs, ts = np.array(Rs), np.array(ts)
    # homomorphism: rho(g h) = rho(g) rho(h)
    defect = 0.0
    scale = max(diam, 1e-300)
    for a, ga in enumerate(elems):
        for b, gb in enumerate(elems):
            gab = ga * gb
            c = next(i for i, gc in enumerate(elems) if gc.same(gab))
            Rab = Rs[a] @ Rs[b]
            tab = Rs[a] @ ts[b] + ts[a]
            defect = max(defect, float(np.max(np.abs(Rab - Rs[c]))), float(np.max(np.abs(tab - ts[c]))) / scale)
    # distinct isometries
    distinct = []
    for R, t in zip(Rs, ts):
        if not any(np.max(np.abs(R - R2)) < 1e-3 and np.max(np.abs(t - t2)) < 1e-3 * scale for R2, t2 in distinct):
            distinct.append((R, t))
    order = len(distinct)
    expected = EXPECTED_ORDERS[G.label](G.n) if include_reflection else G.order
    labels = [_element_label(k, g, G.order) for k, g in enumerate(elems)]
    return SymmetryReport(labels, Rs, ts, np.array(res), np.array(dets), np.array(npairs), defect,
                          order, order == len(elems), diam, expected)


# ---------------------------------------------------------------- OBJ

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export_obj(mesh: Mesh, path) -> None:
    lines = [f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    if not lines:
        # an empty mesh still yields a recognisable file
        lines = ["# nnoid mesh: 0 vertices, 0 faces"]
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write mesh to {path}: {exc}") from exc


def read_obj(path) -> Mesh:
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    return Mesh(np.array(verts).reshape(-1, 3), np.array(faces, dtype=int).reshape(-1, 3),
                np.zeros(len(verts), dtype=complex))

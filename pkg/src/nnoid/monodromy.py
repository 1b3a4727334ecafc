"""Parallel transport of ``dPhi = Phi A`` along polylines and the resulting monodromy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .complexrat import is_infinity
from .looplab import LoopSL2, circle_grid, det2, inv2
from .moebius import MoebiusElem, rotation_matrix, stereo, su2_from_rotation, unstereo
from .potentials import PotentialSpec, chart_gauge, eta_at, pulled_eta_at, schwartz_gauge, xi_at

BASEPOINT = 0.37 + 0.21j
GENERATORS = ("0", "1", "inf")
I2 = np.eye(2, dtype=complex)


class TransportError(RuntimeError):
    pass


class PathError(ValueError):
    pass


# ---------------------------------------------------------------- integrator

# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _segment(coef, p0: complex, p1: complex, lam: np.ndarray, T: np.ndarray, tol: float,
             h0: float) -> tuple[np.ndarray, float]:
    d = p1 - p0
    if d == 0:
        return T, h0

    def f(t, Y):
        return Y @ (coef(p0 + t * d, lam) * d)

    t, h = 0.0, min(h0, 1.0)
    k1 = f(0.0, T)
    while t < 1.0:
        h = min(h, 1.0 - t)
        ks = [k1]
        for s in range(1, 7):
            Y = T + h * sum(a * k for a, k in zip(_A[s], ks))
            ks.append(f(t + _C[s] * h, Y))
        Y5 = T + h * sum(b * k for b, k in zip(_B5, ks) if b)
        err_vec = h * sum((b5 - b4) * k for b5, b4, k in zip(_B5, _B4, ks) if b5 != b4)
        scale = tol * (1.0 + np.max(np.abs(Y5), axis=(1, 2)))
        err = float(np.max(np.max(np.abs(err_vec), axis=(1, 2)) / scale))
        if err <= 1.0:
            t += h
            T = Y5
            k1 = ks[6]
        fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h *= fac
        if h < 1e-13:
            raise TransportError(f"step size underflow near {p0 + t * d:.6g}")
    return T, h


def transport(coef, points, lam, tol: float = 1e-10, T0=None) -> np.ndarray:
    """Transport matrix ``T`` with ``Phi(end) = Phi(start) T`` along a polyline.

    ``coef(x, lam)`` returns the ``(K, 2, 2)`` coefficient of ``dx`` at the
    point ``x`` for every spectral value in ``lam``.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    pts = np.asarray(points, dtype=complex)
    T = np.repeat(I2[None], lam.size, axis=0) if T0 is None else np.array(T0, dtype=complex)
    h = 0.25
    for p0, p1 in zip(pts[:-1], pts[1:]):
        T, h = _segment(coef, complex(p0), complex(p1), lam, T, tol, max(h, 0.05))
    return T


def transport_along(coef, points, lam, tol: float = 1e-10, T0=None) -> np.ndarray:
    """Transport matrices at every waypoint, shape ``(len(points), K, 2, 2)``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    pts = np.asarray(points, dtype=complex)
    T = np.repeat(I2[None], lam.size, axis=0) if T0 is None else np.array(T0, dtype=complex)
    out = [T]
    h = 0.25
    for p0, p1 in zip(pts[:-1], pts[1:]):
        T, h = _segment(coef, complex(p0), complex(p1), lam, T, tol, max(h, 0.05))
        out.append(T)
    return np.array(out)


# ---------------------------------------------------------------- paths

@dataclass(frozen=True)
class Path:
    """A polyline in one chart, optionally a loop around a puncture."""

    waypoints: np.ndarray
    description: str = "segment"
    puncture: complex | None = None

    def __post_init__(self):
        object.__setattr__(self, "waypoints", np.asarray(self.waypoints, dtype=complex))

    @property
    def closed(self) -> bool:
        w = self.waypoints
        return bool(abs(w[0] - w[-1]) < 1e-14)

    def clearance(self, points) -> float:
        """Smallest distance from the polyline to any of ``points``."""
        pts = np.array([p for p in points if not is_infinity(p)], dtype=complex)
        if pts.size == 0:
            return math.inf
        a, b = self.waypoints[:-1, None], self.waypoints[1:, None]
        d = b - a
        dd = np.where(np.abs(d) == 0, 1.0, np.abs(d) ** 2)
        t = np.clip(((pts[None] - a) * np.conj(d)).real / dd, 0.0, 1.0)
        return float(np.min(np.abs(a + t * d - pts[None])))

    def check(self, punctures, eps: float | None = None):
        pts = [p for p in punctures if not is_infinity(p)]
        if eps is None:
            if len(pts) > 1:
                dist = min(abs(p - q) for i, p in enumerate(pts) for q in pts[i + 1:])
                eps = 1e-3 * dist
            else:
                eps = 1e-3
        c = self.clearance(pts)
        if c < eps:
            raise PathError(f"path passes within {c:.3g} of a puncture")
        return c

    def reversed(self) -> "Path":
        return Path(self.waypoints[::-1], self.description, self.puncture)


def circle_loop(center: complex, base: complex, radius: float, n: int = 64, ccw: bool = True) -> Path:
    """Base -> circle around ``center`` (once) -> back to base along the same tail."""
    direction = (base - center) / abs(base - center)
    phi0 = np.angle(direction)
    s = 1.0 if ccw else -1.0
    ang = phi0 + s * 2 * np.pi * np.arange(n + 1) / n
    circ = center + radius * np.exp(1j * ang)
    circ[-1] = circ[0]
    pts = np.concatenate([[base], circ, [base]])
    return Path(pts, "loop", center)


def plan_segment(a: complex, b: complex, obstacles, clearance: float, tries: int = 8) -> np.ndarray:
    """Polyline from ``a`` to ``b`` keeping ``clearance`` from ``obstacles``."""
    obstacles = [p for p in obstacles if not is_infinity(p)]
    straight = Path([a, b])
    if straight.clearance(obstacles) >= clearance:
        return np.array([a, b])
    mid = 0.5 * (a + b)
    normal = 1j * (b - a) / max(abs(b - a), 1e-300)
    for k in range(1, tries + 1):
        for sgn in (1, -1):
            w = mid + sgn * k * 0.5 * clearance * normal * 2
            cand = Path([a, w, b])
            if cand.clearance(obstacles) >= clearance:
                return np.array([a, w, b])
    raise PathError(f"no clear path from {a:.4g} to {b:.4g}")


# ---------------------------------------------------------------- lambda grid

@dataclass(frozen=True)
class LambdaGrid:
    """Equispaced unit-circle samples (rotated off ``lambda = 1``) plus ``1, e^{+-i eps}``."""

    K: int = 64
    eps: float = 1e-3
    offset: bool = True

    @property
    def phase(self) -> float:
        return math.pi / self.K if self.offset else 0.0

    @property
    def main(self) -> np.ndarray:
        return circle_grid(self.K, 1.0, self.phase)

    @property
    def extra(self) -> np.ndarray:
        return np.array([1.0, np.exp(1j * self.eps), np.exp(-1j * self.eps)], dtype=complex)

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.main, self.extra])

    @property
    def i_one(self) -> int:
        return self.K

    @property
    def i_plus(self) -> int:
        return self.K + 1

    @property
    def i_minus(self) -> int:
        return self.K + 2


@dataclass(frozen=True)
class MonodromyRep:
    """Generator monodromies sampled on a :class:`LambdaGrid`."""

    grid: LambdaGrid
    generators: dict
    basepoint: complex
    order: tuple = GENERATORS

    @property
    def lam(self) -> np.ndarray:
        return self.grid.values

    def loop(self, name: str) -> LoopSL2:
        return LoopSL2(self.generators[name][: self.grid.K], 1.0, self.grid.phase)

    def product(self, order=None) -> np.ndarray:
        order = self.order if order is None else order
        P = np.repeat(I2[None], self.lam.size, axis=0)
        for name in order:
            P = P @ self.generators[name]
        return P

    def relation_residual(self, order=None) -> float:
        """``max_lambda min_sign |prod M -+ I|``."""
        P = self.product(order)
        r = np.minimum(np.max(np.abs(P - I2), axis=(1, 2)), np.max(np.abs(P + I2), axis=(1, 2)))
        return float(np.max(r))

    def det_residual(self) -> float:
        return max(float(np.max(np.abs(det2(M) - 1))) for M in self.generators.values())

    def traces(self, name: str) -> np.ndarray:
        M = self.generators[name]
        return M[:, 0, 0] + M[:, 1, 1]


# ---------------------------------------------------------------- downstairs

def downstairs_loops(basepoint: complex = BASEPOINT, n: int = 64) -> dict:
    """Counterclockwise loops around 0 and 1 (radius 0.25) and a clockwise circle ``|u| = 4``."""
    loops = {
        "0": circle_loop(0.0, basepoint, 0.25, n),
        "1": circle_loop(1.0, basepoint, 0.25, n),
        # |u| = 4 is radius 0.25 in the chart 1/u; clockwise in u is counterclockwise there
        "inf": circle_loop(0.0, basepoint, 4.0, 4 * n, ccw=False),
    }
    loops["inf"] = Path(loops["inf"].waypoints, "loop", complex(np.inf))
    return loops


def eta_coef(spec: PotentialSpec):
    def coef(u, lam):
        return eta_at(spec, u, lam)
    return coef


def monodromies_downstairs(spec: PotentialSpec, grid: LambdaGrid | None = None, basepoint: complex = BASEPOINT,
                           tol: float = 1e-10, relation_tol: float = 1e-7, check: bool = True) -> MonodromyRep:
    """Monodromy of ``dPsi = Psi eta`` around ``0, 1, inf`` with ``Psi(b) = I``."""
    grid = grid or LambdaGrid()
    coef = eta_coef(spec)
    gens = {}
    for name, path in downstairs_loops(basepoint).items():
        path.check([0.0, 1.0])
        gens[name] = transport(coef, path.waypoints, grid.values, tol)
    rep = MonodromyRep(grid, gens, basepoint)
    if check:
        res = rep.relation_residual()
        if res > relation_tol:
            raise TransportError(f"product relation violated by {res:.3g}")
    return rep


def mu_formula(w, lam, n: int):
    """``1/2 - (1/(2n)) sqrt(1 + lambda^{-1} (1 - lambda)^2 w / 4)`` with the principal root."""
    lam = np.asarray(lam, dtype=complex)
    rad = 1 + (1 - lam) ** 2 / lam * np.asarray(w) / 4
    # on the unit circle the radicand is real; drop rounding noise in the imaginary part
    on_circle = np.abs(np.abs(lam) - 1) < 1e-12
    rad = np.where(on_circle, rad.real + 0j, rad)
    out = 0.5 - np.sqrt(rad) / (2 * n)
    return out if out.ndim else complex(out)


def eigen_exponent(M: np.ndarray) -> np.ndarray:
    """``nu`` in ``[0, 1/2]`` with eigenvalues ``exp(+-2 pi i nu)`` (real part only)."""
    tr = (M[..., 0, 0] + M[..., 1, 1]) / 2
    return np.arccos(np.clip(tr.real, -1, 1)) / (2 * np.pi)


def trace_residuals(spec: PotentialSpec, rep: MonodromyRep) -> dict:
    """``|trace M_k - 2 cos(2 pi mu_k)|`` per generator and lambda sample."""
    out = {}
    for k, name in enumerate(GENERATORS):
        mu = mu_formula(spec.weights.as_tuple()[k], rep.lam, spec.branch.mults[k])
        out[name] = np.abs(rep.traces(name) - 2 * np.cos(2 * np.pi * mu))
    return out


def check_closing(M: np.ndarray, grid: LambdaGrid) -> dict:
    """``|M(1) -+ I|`` for the better sign and a central-difference ``|dM/dtheta (1)|``."""
    M1 = M[grid.i_one]
    plus = float(np.max(np.abs(M1 - I2)))
    minus = float(np.max(np.abs(M1 + I2)))
    deriv = (M[grid.i_plus] - M[grid.i_minus]) / (2 * grid.eps)
    return {"sign": 1 if plus <= minus else -1, "value": min(plus, minus),
            "derivative": float(np.max(np.abs(deriv)))}


# ---------------------------------------------------------------- upstairs

def upstairs_basepoint(spec: PotentialSpec, basepoint: complex = BASEPOINT) -> complex:
    """Preimage of smallest modulus with positive imaginary part (ties by argument)."""
    pre = spec.inv.preimages(basepoint)
    upper = [z for z in pre if z.imag > 0] or list(pre)
    return complex(min(upper, key=lambda z: (round(abs(z), 12), np.angle(z))))


def singular_points(spec: PotentialSpec) -> list:
    """All branch points upstairs (finite ones)."""
    pts = []
    for B in spec.branch.orbits:
        pts.extend(p for p in B if not is_infinity(p))
    return pts


def xi_coef(spec: PotentialSpec, chart: str = "z"):
    def coef(x, lam):
        return xi_at(spec, x, lam, chart)
    return coef


def frame_at_base(spec: PotentialSpec, zb: complex, lam) -> np.ndarray:
    """``Phi(z_b) = g(z_b)^{-1}`` so that ``Phi g`` pulls back ``Psi`` with ``Psi(b) = I``."""
    g = schwartz_gauge(spec.inv, zb, np.asarray(lam, dtype=complex))
    return inv2(g)


def end_loop_monodromy(spec: PotentialSpec, p, zb: complex, lam, tol: float = 1e-10,
                       radius_frac: float = 0.25) -> np.ndarray:
    """Left monodromy ``M`` (``Phi -> M Phi``) of the upstairs frame around the end ``p``."""
    lam = np.asarray(lam, dtype=complex)
    Phi_b = frame_at_base(spec, zb, lam)
    sing = singular_points(spec)
    use_w = is_infinity(p) or abs(p) > 1.0
    if use_w:
        c = 0j if is_infinity(p) else 1.0 / p
        base = 1.0 / zb
        others = [1.0 / q for q in sing if q != 0 and not (not is_infinity(p) and abs(q - p) < 1e-12)]
        Phi_b = Phi_b @ chart_gauge(zb, lam)
        coef = xi_coef(spec, "w")
    else:
        c, base = p, zb
        others = [q for q in sing if abs(q - p) > 1e-12]
        coef = xi_coef(spec, "z")
    others = [q for q in others if abs(q - c) > 1e-12]
    rad = radius_frac * min([abs(q - c) for q in others] + [abs(base - c)])
    start = c + rad * (base - c) / abs(base - c)
    tail = plan_segment(base, start, others, 0.5 * rad)
    circ = circle_loop(c, base, rad).waypoints[1:-1]
    pts = np.concatenate([tail, circ[1:], tail[::-1][1:]])
    T = transport(coef, pts, lam, tol)
    return Phi_b @ T @ inv2(Phi_b)


def upstairs_end_monodromies(spec: PotentialSpec, grid: LambdaGrid, basepoint: complex = BASEPOINT,
                             tol: float = 1e-10, per_slot: int = 1) -> dict:
    """Left monodromies around up to ``per_slot`` ends of each weighted slot."""
    zb = upstairs_basepoint(spec, basepoint)
    out = {}
    for k in spec.end_slots():
        B = sorted(spec.branch.orbits[k], key=lambda p: math.inf if is_infinity(p) else abs(p - zb))
        for j, p in enumerate(B[:per_slot]):
            out[f"{GENERATORS[k]}:{j}"] = end_loop_monodromy(spec, p, zb, grid.values, tol)
    return out


# ---------------------------------------------------------------- descent

def _axis_angle(R: np.ndarray) -> tuple[np.ndarray, float]:
    s = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2
    c = (np.trace(R) - 1) / 2
    sn = np.linalg.norm(s)
    if sn < 1e-12:
        # half turn (or identity): axis from the symmetric part
        w, v = np.linalg.eigh((R + R.T) / 2)
        return v[:, np.argmax(w)], math.atan2(0.0, c)
    return s / sn, math.atan2(sn, c)


def _rotation_flow(axis: np.ndarray, angles: np.ndarray, z: complex) -> np.ndarray:
    return np.array([MoebiusElem(su2_from_rotation(rotation_matrix(axis, a)))(z) for a in angles])


def descent_check(spec: PotentialSpec, tau: MoebiusElem, grid: LambdaGrid | None = None,
                  basepoint: complex = BASEPOINT, tol: float = 1e-10, arc_samples: int = 48) -> dict:
    """Compare the upstairs loop around a fixed point of ``tau`` with ``h^m`` downstairs.

    ``h`` is the downstairs monodromy along the image of the path from the
    upstairs basepoint to a point near the fixed point, then along the
    ``tau``-orbit arc, then back along the ``tau``-image of the first piece.
    """
    grid = grid or LambdaGrid(16)
    lam = grid.values
    if tau.is_identity:
        return {"order": 1, "residual": 0.0, "sign": 1, "fixed_point": None}
    m = tau.order()
    zb = upstairs_basepoint(spec, basepoint)
    sing = singular_points(spec)
    # fixed point over 0 or 1 closest to the basepoint
    slot_pts = [p for k in (0, 1) for p in spec.branch.orbits[k] if not is_infinity(p)]
    fixed = [p for p in tau.fixed_points() if not is_infinity(p)]
    cands = [p for p in fixed if min(abs(p - q) for q in slot_pts) < 1e-9]
    if not cands:
        raise PathError("tau has no finite fixed point over 0 or 1")
    p = min(cands, key=lambda q: abs(q - zb))
    others = [q for q in sing if abs(q - p) > 1e-9]
    rad = 0.2 * min([abs(q - p) for q in others] + [abs(zb - p)])
    z1 = p + rad * (zb - p) / abs(zb - p)
    tail = plan_segment(zb, z1, others, 0.5 * rad)
    # densify the tail so that its tau-image (a circular arc) is well sampled
    dense = np.concatenate([np.linspace(a, b, 24, endpoint=False) for a, b in zip(tail[:-1], tail[1:])] + [[tail[-1]]])
    R = tau.rotation()
    axis, theta = _axis_angle(R)
    n = unstereo(p)
    if np.dot(axis, n) < 0:
        axis, theta = -axis, -theta
    k_turns = int(round(m * theta / (2 * np.pi)))
    full = _rotation_flow(axis, np.linspace(0, m * theta, arc_samples * m + 1), z1)
    arc = _rotation_flow(axis, np.linspace(0, theta, arc_samples + 1), z1)
    tau_tail = np.asarray(tau(dense))
    up_path = np.concatenate([dense, full[1:], dense[::-1][1:]])
    down_path = np.concatenate([dense, arc[1:], tau_tail[::-1][1:]])
    for path in (up_path, down_path):
        Path(path).check(sing)
    Phi_b = frame_at_base(spec, zb, lam)
    T_up = transport(xi_coef(spec), up_path, lam, tol)
    M_up = Phi_b @ T_up @ inv2(Phi_b)
    h = transport(lambda z, l: pulled_eta_at(spec, z, l), down_path, lam, tol)
    hm = np.linalg.matrix_power(h, m)
    scale = np.maximum(1.0, np.max(np.abs(hm), axis=(1, 2)))
    rp = np.max(np.abs(M_up - hm), axis=(1, 2)) / scale
    rm = np.max(np.abs(M_up + hm), axis=(1, 2)) / scale
    sign = 1 if np.max(rp) <= np.max(rm) else -1
    res = float(np.max(rp if sign == 1 else rm))
    return {"order": m, "turns": k_turns, "fixed_point": complex(p), "sign": sign, "residual": res,
            "upstairs": M_up, "h": h}

"""Hopf and correction differentials, the n-noid potentials and the Schwartz gauge."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .complexrat import Poly, QuadDiff, RationalMap
from .moebius import BranchData, FiniteMoebiusGroup, OrbitInvariant, nnoid_invariant


class Convention(str, enum.Enum):
    """How end weights translate into quadratic residues of the Hopf differential."""

    UNSCALED_W16 = "unscaled"  # rho_k = w_k / 16
    SCALED_W16N2 = "scaled"  # rho_k = w_k / (16 n_k^2)

    @classmethod
    def parse(cls, value) -> "Convention":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        for c in cls:
            if v in (c.value, c.name.lower()):
                return c
        raise ValueError(f"unknown residue convention {value!r}")


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class WeightTriple:
    w0: float
    w1: float
    winf: float

    def __post_init__(self):
        for w in self.as_tuple():
            if not math.isfinite(w):
                raise ValueError("weights must be finite")

    def as_tuple(self) -> tuple:
        return (float(self.w0), float(self.w1), float(self.winf))

    @property
    def degenerate(self) -> bool:
        return all(w == 0 for w in self.as_tuple())

    @classmethod
    def parse(cls, value) -> "WeightTriple":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            value = [float(x) for x in value.split(",")]
        if len(value) != 3:
            raise ValueError("need exactly three weights")
        return cls(*map(float, value))


def triple_coeffs(q: QuadDiff) -> tuple:
    """``(c0, c1, c2)`` of a differential ``(c0 + c1 u + c2 u^2)/(u^2 (u-1)^2) du^2``."""
    c = q.coeff.num.padded(3)
    return complex(c[0]), complex(c[1]), complex(c[2])


def eval_triple(coeffs: tuple, u, um1):
    """Evaluate a triple differential from ``u`` and an accurate ``u - 1``."""
    c0, c1, c2 = coeffs
    with np.errstate(divide="ignore", invalid="ignore"):
        return (c0 + u * (c1 + c2 * u)) / (u * u * um1 * um1)


def _triple_differential(r0: complex, r1: complex, rinf: complex) -> QuadDiff:
    """``(c0 + c1 u + c2 u^2)/(u^2 (u-1)^2) du^2`` with quadratic residues ``r0, r1, rinf``."""
    c0, c2 = r0, rinf
    c1 = r1 - r0 - rinf
    num = Poly([c0, c1, c2])
    den = Poly([0, 0, 1, -2, 1])
    return QuadDiff(RationalMap(num, den))


def residue_targets(weights: WeightTriple, branch: BranchData, convention=Convention.SCALED_W16N2) -> tuple:
    convention = Convention.parse(convention)
    w = weights.as_tuple()
    if convention is Convention.UNSCALED_W16:
        return tuple(x / 16.0 for x in w)
    return tuple(x / (16.0 * n * n) for x, n in zip(w, branch.mults))


def hopf_downstairs(weights: WeightTriple, branch: BranchData, convention=Convention.SCALED_W16N2) -> QuadDiff:
    """Hopf differential on the quotient sphere with prescribed residues at 0, 1, inf."""
    return _triple_differential(*residue_targets(weights, branch, convention))


def alpha_residues(branch: BranchData) -> tuple:
    return tuple((1.0 / (n * n) - 1.0) / 2.0 for n in branch.mults)


def alpha_downstairs(branch: BranchData, u: OrbitInvariant | None = None, samples: int = 50,
                     tol: float = 1e-9, seed: int = 0) -> QuadDiff:
    """Correction differential whose pullback by ``u`` is the Schwarzian of ``u``.

    When ``u`` is given the identity is checked at random points and a
    :class:`PotentialError` is raised if it fails.
    """
    alpha = _triple_differential(*alpha_residues(branch))
    if u is not None:
        res = alpha_pullback_residual(alpha, u, samples, seed)
        if res > tol:
            raise PotentialError(f"u*alpha differs from S(u) by {res:.3g}")
    return alpha


def alpha_pullback_residual(alpha: QuadDiff, u: OrbitInvariant, samples: int = 50, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=samples) + 1j * rng.normal(size=samples)
    uz, d1, _, _ = u.derivs(z)
    lhs = alpha(uz) * d1 ** 2
    rhs = u.schwarzian(z)
    lhs = eval_triple(triple_coeffs(alpha), uz, u.minus_one(z)) * d1 ** 2
    return float(np.max(np.abs(lhs - rhs) / (1 + np.abs(rhs))))


@dataclass(frozen=True)
class PotentialSpec:
    """Everything needed to evaluate the potentials upstairs and downstairs."""

    group: FiniteMoebiusGroup
    inv: OrbitInvariant
    weights: WeightTriple
    Q: QuadDiff
    alpha: QuadDiff
    convention: Convention

    @cached_property
    def q_coeffs(self) -> tuple:
        return triple_coeffs(self.Q)

    @cached_property
    def alpha_coeffs(self) -> tuple:
        return triple_coeffs(self.alpha)

    @property
    def branch(self) -> BranchData:
        return self.inv.branch

    @property
    def u(self) -> RationalMap:
        return self.inv.rational

    @cached_property
    def inv_w(self) -> OrbitInvariant:
        """The invariant in the chart ``w = 1/z``."""
        return self.inv.inverted()

    def end_slots(self) -> tuple:
        """Slots (0, 1, 2 for 0, 1, inf) carrying a nonzero weight."""
        return tuple(k for k, w in enumerate(self.weights.as_tuple()) if w != 0)

    def ends(self) -> list:
        """Upstairs ends: preimages of the weighted branch values."""
        out = []
        for k in self.end_slots():
            out.extend(self.branch.orbits[k])
        return out


def build_spec(group: FiniteMoebiusGroup, weights, convention=Convention.SCALED_W16N2,
               verify: bool = True) -> PotentialSpec:
    weights = WeightTriple.parse(weights)
    convention = Convention.parse(convention)
    inv = nnoid_invariant(group)
    Q = hopf_downstairs(weights, inv.branch, convention)
    alpha = alpha_downstairs(inv.branch, inv if verify else None)
    return PotentialSpec(group, inv, weights, Q, alpha, convention)


# ---------------------------------------------------------------- evaluation

def _lam(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=complex)
    if np.any(lam == 0):
        raise PotentialError("lambda = 0 is not allowed")
    return lam


def pulled_hopf(spec: PotentialSpec, z, chart: str = "z"):
    """Coefficient of ``u*Q`` in the chart ``z`` or ``w = 1/z``."""
    inv = spec.inv if chart == "z" else spec.inv_w
    z = np.asarray(z, dtype=complex)
    u, d1, _, _ = inv.derivs(z)
    return eval_triple(spec.q_coeffs, u, inv.minus_one(z)) * d1 ** 2


def offdiag(upper, lower) -> np.ndarray:
    """Stack of ``[[0, upper], [lower, 0]]`` broadcast over the inputs."""
    upper, lower = np.broadcast_arrays(np.asarray(upper, dtype=complex), np.asarray(lower, dtype=complex))
    out = np.zeros(upper.shape + (2, 2), dtype=complex)
    out[..., 0, 1] = upper
    out[..., 1, 0] = lower
    return out


def xi_at(spec: PotentialSpec, z, lam, chart: str = "z") -> np.ndarray:
    """Upstairs potential (coefficient of ``dz``); broadcasts over ``z`` and ``lambda``."""
    lam = _lam(lam)
    q = pulled_hopf(spec, z, chart)
    if not np.all(np.isfinite(q)):
        raise PotentialError("z is a pole of u*Q")
    return offdiag(1.0 / lam, (1 - lam) ** 2 * q)


def eta_lower(spec: PotentialSpec, u, lam, um1=None):
    um1 = u - 1 if um1 is None else um1
    return (1 - lam) ** 2 * eval_triple(spec.q_coeffs, u, um1) + 0.5 * lam * eval_triple(spec.alpha_coeffs, u, um1)


def eta_at(spec: PotentialSpec, u, lam) -> np.ndarray:
    """Downstairs potential (coefficient of ``du``)."""
    lam = _lam(lam)
    u = np.asarray(u, dtype=complex)
    if np.any((u == 0) | (u == 1)) or np.any(np.isinf(u)):
        raise PotentialError("eta is singular at u = 0, 1, inf")
    return offdiag(1.0 / lam, eta_lower(spec, u, lam))


def pulled_eta_at(spec: PotentialSpec, z, lam) -> np.ndarray:
    """``u*eta`` as a coefficient of ``dz``."""
    lam = _lam(lam)
    z = np.asarray(z, dtype=complex)
    u, d1, _, _ = spec.inv.derivs(z)
    return offdiag(d1 / lam, eta_lower(spec, u, lam, spec.inv.minus_one(z)) * d1)


# ---------------------------------------------------------------- gauges

def _derivs(u, z):
    if isinstance(u, OrbitInvariant):
        return u.derivs(z)
    z = np.asarray(z, dtype=complex)
    d1 = u.deriv()
    d2 = d1.deriv()
    d3 = d2.deriv()
    return u(z), d1(z), d2(z), d3(z)


def schwartz_gauge(u, z, lam, ref=None, with_derivative: bool = False):
    """``g = [[v, 0], [-lambda v', 1/v]]`` with ``v = (u')^(-1/2)``.

    The principal square root is used unless ``ref`` (a previous value of
    ``v``) is given, in which case the sign closest to ``ref`` is taken.
    With ``with_derivative`` the ``z``-derivative of ``g`` is returned too.
    """
    lam = _lam(lam)
    _, d1, d2, d3 = _derivs(u, z)
    d1 = np.asarray(d1, dtype=complex)
    if np.any(np.abs(d1) < 1e-14):
        raise PotentialError("the Schwartz gauge is singular at branch points")
    v = 1.0 / np.sqrt(d1)
    if ref is not None:
        v = np.where(np.abs(v - ref) <= np.abs(v + ref), v, -v)
    L = d2 / d1
    v1 = -0.5 * L * v
    g = np.zeros(np.broadcast(v, lam).shape + (2, 2), dtype=complex)
    g[..., 0, 0] = v
    g[..., 1, 0] = -lam * v1
    g[..., 1, 1] = 1.0 / v
    if not with_derivative:
        return g
    L1 = d3 / d1 - L * L
    v2 = -0.5 * (L1 * v + L * v1)
    dg = np.zeros_like(g)
    dg[..., 0, 0] = v1
    dg[..., 1, 0] = -lam * v2
    dg[..., 1, 1] = -v1 / v ** 2
    return g, dg


def gauge_apply(xi, g, dg) -> np.ndarray:
    """``g^{-1} xi g + g^{-1} dg`` pointwise."""
    g = np.asarray(g, dtype=complex)
    d = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    if np.any(np.abs(d) < 1e-300):
        raise PotentialError("gauge is singular")
    gi = np.linalg.inv(g)
    return gi @ np.asarray(xi) @ g + gi @ np.asarray(dg)


def chart_gauge(z, lam) -> np.ndarray:
    """Gauge from the ``z`` chart to ``w = 1/z``: ``Phi_w = Phi_z g``."""
    z = np.asarray(z, dtype=complex)
    lam = np.asarray(lam, dtype=complex)
    g = np.zeros(np.broadcast(z, lam).shape + (2, 2), dtype=complex)
    g[..., 0, 0] = 1j * z
    g[..., 1, 0] = -1j * lam
    g[..., 1, 1] = -1j / z
    return g

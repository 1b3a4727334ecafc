"""Complex polynomial and rational-function algebra on the Riemann sphere.

Coefficients are complex floats stored in ascending order.  The point at
infinity is written ``math.inf`` and is always handled through the chart
``v = 1/z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEG_INF = -math.inf
INF = math.inf

# relative tolerance used for gcd truncation and local-order detection
GCD_TOL = 1e-12
ORDER_TOL = 1e-9


class DomainError(ValueError):
    """Raised for operations that are undefined at the requested input."""


def is_infinity(p) -> bool:
    try:
        return bool(np.isinf(p))
    except TypeError:
        return False


def _trim(c: np.ndarray, tol: float = 0.0) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if c.size == 0:
        return np.zeros(0, dtype=complex)
    scale = np.max(np.abs(c))
    if scale == 0:
        return np.zeros(0, dtype=complex)
    nz = np.nonzero(np.abs(c) > tol * scale)[0]
    return c[: nz[-1] + 1].copy()


class Poly:
    """Polynomial with complex coefficients in ascending degree."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs, tol: float = 0.0):
        self.coeffs = _trim(np.atleast_1d(np.asarray(coeffs, dtype=complex)), tol)

    @classmethod
    def from_roots(cls, roots, lead=1.0) -> "Poly":
        c = np.array([lead], dtype=complex)
        for r in roots:
            c = np.convolve(c, [-r, 1.0])
        return cls(c)

    @classmethod
    def monomial(cls, k: int, c=1.0) -> "Poly":
        out = np.zeros(k + 1, dtype=complex)
        out[k] = c
        return cls(out)

    @property
    def degree(self):
        return NEG_INF if self.coeffs.size == 0 else self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    @property
    def lead(self) -> complex:
        return self.coeffs[-1] if self.coeffs.size else 0j

    def norm(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=complex)
        out[: self.coeffs.size] = self.coeffs
        return out

    def __call__(self, z):
        if self.is_zero:
            return np.zeros_like(np.asarray(z, dtype=complex))
        return np.polyval(self.coeffs[::-1], z)

    def __add__(self, other):
        other = _as_poly(other)
        n = max(self.coeffs.size, other.coeffs.size)
        return Poly(self.padded(n) + other.padded(n))

    __radd__ = __add__

    def __neg__(self):
        return Poly(-self.coeffs)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        if self.is_zero or other.is_zero:
            return Poly([])
        return Poly(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly([1.0])
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def deriv(self) -> "Poly":
        if self.coeffs.size <= 1:
            return Poly([])
        return Poly(self.coeffs[1:] * np.arange(1, self.coeffs.size))

    def divmod(self, other: "Poly", tol: float = 0.0):
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        num = self.coeffs.copy()
        den = other.coeffs
        dn = den.size - 1
        if num.size - 1 < dn:
            return Poly([]), Poly(num)
        q = np.zeros(num.size - dn, dtype=complex)
        for k in range(num.size - 1, dn - 1, -1):
            c = num[k] / den[-1]
            q[k - dn] = c
            num[k - dn : k + 1] -= c * den
        return Poly(q), Poly(num[:dn], tol)

    def monic(self) -> "Poly":
        return Poly(self.coeffs / self.lead)

    def taylor(self, p: complex, order: int | None = None) -> np.ndarray:
        """Coefficients of ``t -> self(p + t)`` (ascending)."""
        c = self.coeffs[::-1].astype(complex)  # descending, Horner layout
        n = c.size
        out = np.zeros(n, dtype=complex)
        work = c.copy()
        for k in range(n):
            # synthetic division by (z - p); remainder is the k-th Taylor coeff
            acc = 0j
            nxt = np.empty(work.size - 1, dtype=complex)
            for i, a in enumerate(work):
                acc = acc * p + a
                if i < work.size - 1:
                    nxt[i] = acc
            out[k] = acc
            work = nxt
            if order is not None and k >= order:
                break
        return out if order is None else out[: order + 1]

    def scale_at(self, p: complex) -> float:
        r = max(1.0, abs(p))
        return float(np.sum(np.abs(self.coeffs) * r ** np.arange(self.coeffs.size)))

    def order_at(self, p: complex, tol: float = ORDER_TOL) -> int:
        """Order of vanishing at a finite point (numerical)."""
        if self.is_zero:
            raise DomainError("order of the zero polynomial is undefined")
        t = self.taylor(p)
        # rounding in the k-th coefficient scales with sum |c_i| C(i, k) r^(i-k)
        noise = Poly(np.abs(self.coeffs)).taylor(abs(p)).real
        for k, a in enumerate(t):
            if abs(a) > tol * noise[k]:
                return k
        return int(self.degree)

    def reversed(self, m: int) -> "Poly":
        """``v**m * self(1/v)`` for ``m >= degree``."""
        return Poly(self.padded(m + 1)[::-1])

    def roots(self) -> np.ndarray:
        if self.coeffs.size <= 1:
            return np.zeros(0, dtype=complex)
        return np.roots(self.coeffs[::-1])

    def __repr__(self):
        return f"Poly({np.array2string(self.coeffs, precision=6)})"


def _as_poly(x) -> Poly:
    return x if isinstance(x, Poly) else Poly([x])


def poly_gcd(a: Poly, b: Poly, tol: float = GCD_TOL) -> Poly:
    """Monic gcd by the Euclidean algorithm with relative truncation."""
    if a.is_zero:
        return b.monic() if not b.is_zero else Poly([1.0])
    if b.is_zero:
        return a.monic()
    # leading coefficients at rounding level are cancellation noise
    a = Poly(a.coeffs / a.norm(), tol)
    b = Poly(b.coeffs / b.norm(), tol)
    if a.degree < b.degree:
        a, b = b, a
    while True:
        _, r = a.divmod(b)
        if r.is_zero or r.norm() <= tol:
            return b.monic()
        r = Poly(r.coeffs / r.norm(), tol)
        a, b = b, r


class RationalMap:
    """A rational map ``num/den`` of the Riemann sphere."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=None, reduce: bool = False, tol: float = GCD_TOL):
        num = _as_poly(num) if not isinstance(num, Poly) else num
        den = Poly([1.0]) if den is None else (_as_poly(den) if not isinstance(den, Poly) else den)
        if den.is_zero:
            raise DomainError("denominator is the zero polynomial")
        if reduce and not num.is_zero and den.degree > 0:
            g = poly_gcd(num, den, tol)
            if g.degree > 0:
                qn, rn = num.divmod(g)
                qd, rd = den.divmod(g)
                # keep the reduction only if g really divides both
                if rn.norm() <= 1e-8 * num.norm() and rd.norm() <= 1e-8 * den.norm():
                    num, den = qn, qd
        self.num = num
        self.den = den

    @classmethod
    def mobius(cls, a, b, c, d) -> "RationalMap":
        return cls(Poly([b, a]), Poly([d, c]))

    @classmethod
    def identity(cls) -> "RationalMap":
        return cls(Poly([0.0, 1.0]))

    @classmethod
    def monomial(cls, n: int, c=1.0) -> "RationalMap":
        return cls(Poly.monomial(n, c))

    @property
    def degree(self) -> int:
        if self.num.is_zero:
            return 0
        return int(max(self.num.degree, self.den.degree))

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    def __call__(self, z):
        if np.ndim(z) == 0 and is_infinity(z):
            return self.value_at_infinity()
        return self.num(z) / self.den(z)

    def value_at_infinity(self):
        dn, dd = self.num.degree, self.den.degree
        if self.num.is_zero:
            return 0j
        if dn > dd:
            return INF
        if dn < dd:
            return 0j
        return self.num.lead / self.den.lead

    def value(self, p):
        """Value at a point of the sphere, returning ``INF`` at poles."""
        if is_infinity(p):
            return self.value_at_infinity()
        jn = self.num.order_at(p) if not self.num.is_zero else math.inf
        jd = self.den.order_at(p)
        if jn < jd:
            return INF
        if jn > jd:
            return 0j
        tn = self.num.taylor(p, jn)[jn]
        td = self.den.taylor(p, jd)[jd]
        return tn / td

    def infinity_chart(self) -> "RationalMap":
        """The map ``v -> self(1/v)`` as a rational map in ``v``."""
        m = self.degree if not self.num.is_zero else max(0, int(self.den.degree))
        m = max(m, int(self.den.degree), int(self.num.degree) if not self.num.is_zero else 0)
        num = self.num.reversed(m) if not self.num.is_zero else Poly([])
        return RationalMap(num, self.den.reversed(m))

    def __add__(self, other):
        other = _as_rat(other)
        return RationalMap(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalMap(-self.num, self.den)

    def __sub__(self, other):
        return self + (-_as_rat(other))

    def __rsub__(self, other):
        return _as_rat(other) - self

    def __mul__(self, other):
        other = _as_rat(other)
        return RationalMap(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_rat(other)
        if other.num.is_zero:
            raise ZeroDivisionError("division by the zero rational map")
        return RationalMap(self.num * other.den, self.den * other.num)

    def reduced(self, tol: float = GCD_TOL) -> "RationalMap":
        return RationalMap(self.num, self.den, reduce=True, tol=tol)

    def deriv(self) -> "RationalMap":
        return RationalMap(
            self.num.deriv() * self.den - self.num * self.den.deriv(),
            self.den * self.den,
            reduce=True,
        )

    def taylor(self, p: complex, order: int) -> np.ndarray:
        """Taylor coefficients at a finite regular point."""
        tn = self.num.taylor(p, order) if not self.num.is_zero else np.zeros(order + 1, complex)
        td = self.den.taylor(p, order)
        tn = np.pad(tn, (0, order + 1 - tn.size))
        td = np.pad(td, (0, order + 1 - td.size))
        if td[0] == 0:
            raise DomainError(f"pole at {p}")
        out = np.zeros(order + 1, dtype=complex)
        for k in range(order + 1):
            out[k] = (tn[k] - np.dot(out[:k], td[k:0:-1])) / td[0]
        return out

    def residual(self, other: "RationalMap") -> float:
        """Relative coefficientwise size of ``num*other.den - other.num*den``."""
        lhs = self.num * other.den
        rhs = other.num * self.den
        diff = lhs - rhs
        scale = max(lhs.norm(), rhs.norm(), 1e-300)
        return diff.norm() / scale

    def __repr__(self):
        return f"RationalMap(num={self.num!r}, den={self.den!r})"


def _as_rat(x) -> RationalMap:
    if isinstance(x, RationalMap):
        return x
    if isinstance(x, Poly):
        return RationalMap(x)
    return RationalMap(Poly([x]))


def compose(f: RationalMap, g: RationalMap) -> RationalMap:
    """Return ``f o g`` by homogeneous substitution."""
    m = f.degree
    a, b = g.num, g.den
    apow = [Poly([1.0])]
    bpow = [Poly([1.0])]
    for _ in range(m):
        apow.append(apow[-1] * a)
        bpow.append(bpow[-1] * b)
    pn = f.num.padded(m + 1)
    pd = f.den.padded(m + 1)
    num = Poly([])
    den = Poly([])
    for i in range(m + 1):
        term = apow[i] * bpow[m - i]
        if pn[i] != 0:
            num = num + term * pn[i]
        if pd[i] != 0:
            den = den + term * pd[i]
    scale = max(num.norm(), den.norm(), 1e-300)
    den = Poly(den.coeffs, GCD_TOL) if den.norm() > GCD_TOL * scale else Poly([])
    if den.is_zero:
        raise DomainError("composition sends a constant into a pole")
    return RationalMap(num, den)


def mult_at(f: RationalMap, p) -> int:
    """Local multiplicity of ``f`` at ``p``: ``1 + ord_p f'``."""
    if f.is_constant:
        raise DomainError("multiplicity of a constant map is undefined")
    if is_infinity(p):
        return mult_at(f.infinity_chart(), 0.0)
    if abs(p) > 1.0:
        # better conditioned in the chart at infinity
        return mult_at(f.infinity_chart(), 1.0 / p)
    val = f.value(p)
    jd = f.den.order_at(p)
    if is_infinity(val):
        jn = f.num.order_at(p)
        return jd - jn
    return (f.num - f.den * val).order_at(p) - jd


def ord_at(f: RationalMap, p) -> int:
    """Order of zero (positive) or pole (negative) at a point of the sphere."""
    if f.num.is_zero:
        raise DomainError("order of the zero map is undefined")
    if is_infinity(p):
        return ord_at(f.infinity_chart(), 0.0)
    if abs(p) > 1.0:
        return ord_at(f.infinity_chart(), 1.0 / p)
    return f.num.order_at(p) - f.den.order_at(p)


@dataclass(frozen=True)
class QuadDiff:
    """Quadratic differential ``coeff(z) dz**2``."""

    coeff: RationalMap

    def __call__(self, z):
        return self.coeff(z)

    @property
    def is_zero(self) -> bool:
        return self.coeff.num.is_zero

    def infinity_chart(self) -> "QuadDiff":
        # q(z) dz^2 with z = 1/v:  q(1/v) v^-4 dv^2
        c = self.coeff.infinity_chart()
        return QuadDiff(RationalMap(c.num, c.den * Poly.monomial(4)))

    def pole_order(self, p) -> int:
        if self.is_zero:
            return 0
        if is_infinity(p):
            return self.infinity_chart().pole_order(0.0)
        return max(0, -ord_at(self.coeff, p))

    def quad_residue(self, p) -> complex:
        """Coefficient of ``(z-p)**-2 dz**2``; chart-corrected at infinity."""
        if self.is_zero:
            return 0j
        if is_infinity(p):
            return self.infinity_chart().quad_residue(0.0)
        jn = self.coeff.num.order_at(p)
        jd = self.coeff.den.order_at(p)
        order = jd - jn
        if order > 2:
            raise DomainError(f"pole of order {order} > 2 at {p}")
        if order < 2:
            return 0j
        tn = self.coeff.num.taylor(p, jn)[jn]
        td = self.coeff.den.taylor(p, jd)[jd]
        return complex(tn / td)

    def __add__(self, other: "QuadDiff") -> "QuadDiff":
        return QuadDiff(self.coeff + other.coeff)

    def scaled(self, c) -> "QuadDiff":
        return QuadDiff(self.coeff * c)


def schwarzian_at(f: RationalMap, z) -> complex:
    """Pointwise ``f'''/f' - 3/2 (f''/f')**2`` at a finite regular point."""
    a = f.taylor(z, 3)
    if a[1] == 0:
        raise DomainError(f"critical point at {z}")
    r = a[2] / a[1]
    return 6.0 * a[3] / a[1] - 6.0 * r * r


def schwarzian(f: RationalMap) -> QuadDiff:
    """The Schwarzian derivative of ``f`` as a quadratic differential.

    With ``f = P/Q`` and Wronskian ``W = P'Q - PQ'`` one has ``f' = W/Q**2`` and
    ``S f = (W''WQ - 3/2 W'^2 Q - 2Q''W^2 + 2W'WQ') / (W^2 Q)``, which vanishes
    exactly for Moebius maps (W constant, Q linear).
    """
    if f.is_constant:
        raise DomainError("Schwarzian of a constant map is undefined")
    P, Q = f.num, f.den
    W = P.deriv() * Q - P * Q.deriv()
    W = _clean(W, max((P.deriv() * Q).norm(), (P * Q.deriv()).norm()))
    if W.is_zero:
        raise DomainError("Schwarzian of a constant map is undefined")
    W1, W2, Q1, Q2 = W.deriv(), W.deriv().deriv(), Q.deriv(), Q.deriv().deriv()
    terms = [W2 * W * Q, W1 * W1 * Q * (-1.5), Q2 * W * W * (-2.0), W1 * W * Q1 * 2.0]
    num = Poly([])
    for t in terms:
        num = num + t
    num = _clean(num, max(t.norm() for t in terms))
    if num.is_zero:
        return QuadDiff(RationalMap(num, Poly([1.0])))
    return QuadDiff(RationalMap(num, W * W * Q).reduced())


def _clean(p: Poly, ref: float, rel: float = 1e-11) -> Poly:
    """Zero the coefficients of ``p`` that are cancellation noise relative to ``ref``."""
    if p.is_zero:
        return p
    c = p.coeffs.copy()
    c[np.abs(c) <= rel * ref] = 0
    return Poly(c)


def pullback_quaddiff(u: RationalMap, q: QuadDiff) -> QuadDiff:
    """``u^*(q) = q(u(z)) u'(z)**2 dz**2``."""
    if u.is_constant:
        raise DomainError("pullback by a constant map")
    if q.is_zero:
        return q
    du = u.deriv()
    out = compose(q.coeff, u) * du * du
    return QuadDiff(out.reduced())

"""SL(2,C)-valued loops in the spectral parameter and their r=1 Iwasawa splitting."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

I2 = np.eye(2, dtype=complex)


class IwasawaError(RuntimeError):
    """Raised when the Toeplitz system for the splitting is unusable."""


class TruncationWarning(UserWarning):
    pass


def circle_grid(K: int, r: float = 1.0, phase: float = 0.0) -> np.ndarray:
    """``K`` equispaced points ``r * exp(i(phase + 2 pi j / K))``."""
    return r * np.exp(1j * (phase + 2 * np.pi * np.arange(K) / K))


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def det2(A: np.ndarray) -> np.ndarray:
    return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]


def inv2(A: np.ndarray) -> np.ndarray:
    """Batched inverse of 2x2 matrices."""
    out = np.empty_like(A)
    d = det2(A)
    out[..., 0, 0] = A[..., 1, 1] / d
    out[..., 1, 1] = A[..., 0, 0] / d
    out[..., 0, 1] = -A[..., 0, 1] / d
    out[..., 1, 0] = -A[..., 1, 0] / d
    return out


@dataclass(frozen=True)
class LoopSL2:
    """A loop sampled at ``K`` equispaced points of the circle ``|lambda| = r``.

    The grid may be rotated by ``phase`` so that a chosen point (usually
    ``lambda = 1``) is avoided.  Laurent coefficients are recovered by FFT.
    """

    samples: np.ndarray
    r: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 3 or s.shape[1:] != (2, 2):
            raise ValueError("samples must have shape (K, 2, 2)")
        if not 0 < self.r <= 1:
            raise ValueError("radius must lie in (0, 1]")
        object.__setattr__(self, "samples", s)

    # ------------------------------------------------------------ builders
    @classmethod
    def from_function(cls, f, K: int, r: float = 1.0, phase: float = 0.0) -> "LoopSL2":
        lam = circle_grid(K, r, phase)
        return cls(np.array([f(l) for l in lam]), r, phase)

    @classmethod
    def from_laurent(cls, coeffs: dict, K: int, r: float = 1.0, phase: float = 0.0) -> "LoopSL2":
        lam = circle_grid(K, r, phase)
        s = np.zeros((K, 2, 2), dtype=complex)
        for k, A in coeffs.items():
            s += np.asarray(A, dtype=complex)[None] * (lam ** int(k))[:, None, None]
        return cls(s, r, phase)

    @classmethod
    def constant(cls, A, K: int, r: float = 1.0, phase: float = 0.0) -> "LoopSL2":
        return cls(np.repeat(np.asarray(A, dtype=complex)[None], K, axis=0), r, phase)

    # ------------------------------------------------------------ basics
    @property
    def K(self) -> int:
        return self.samples.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return circle_grid(self.K, self.r, self.phase)

    def _like(self, samples) -> "LoopSL2":
        return LoopSL2(samples, self.r, self.phase)

    def _check_grid(self, other: "LoopSL2"):
        if other.K != self.K or other.r != self.r or other.phase != self.phase:
            raise ValueError("loops live on different grids")

    def __mul__(self, other):
        if isinstance(other, LoopSL2):
            self._check_grid(other)
            return self._like(self.samples @ other.samples)
        return self._like(self.samples @ np.asarray(other, dtype=complex))

    def __rmul__(self, other):
        return self._like(np.asarray(other, dtype=complex) @ self.samples)

    def inverse(self) -> "LoopSL2":
        return self._like(inv2(self.samples))

    def det(self) -> np.ndarray:
        return det2(self.samples)

    def det_residual(self) -> float:
        return float(np.max(np.abs(self.det() - 1.0)))

    # ------------------------------------------------------------ Fourier
    def laurent(self) -> dict:
        """Laurent coefficients ``{k: A_k}`` for ``-K/2 < k <= K/2``."""
        K = self.K
        c = np.fft.fft(self.samples, axis=0) / K
        ks = np.fft.fftfreq(K, 1.0 / K).astype(int)
        return {int(k): c[j] / (self.r ** k * np.exp(1j * k * self.phase)) for j, k in enumerate(ks)}

    def tail_energy(self, N: int) -> float:
        """Relative energy of Laurent coefficients with ``|k| > N`` on the sample circle."""
        c = np.fft.fft(self.samples, axis=0) / self.K
        ks = np.abs(np.fft.fftfreq(self.K, 1.0 / self.K))
        e = np.sum(np.abs(c) ** 2, axis=(1, 2))
        total = float(np.sum(e))
        return float(np.sum(e[ks > N]) / total) if total > 0 else 0.0

    def __call__(self, lam):
        """Trigonometric interpolation of the samples at arbitrary ``lambda``."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        out = np.zeros((lam.size, 2, 2), dtype=complex)
        for k, A in self.laurent().items():
            out += A[None] * (lam ** k)[:, None, None]
        return out

    def star(self) -> "LoopSL2":
        """``X*(lambda) = X(1/conj lambda)^dagger``, sampled on the same circle."""
        if self.r == 1.0:
            # 1/conj(lambda) = lambda on the unit circle
            return self._like(dagger(self.samples))
        coeffs = {-k: dagger(A) for k, A in self.laurent().items()}
        return LoopSL2.from_laurent(coeffs, self.K, self.r, self.phase)

    def theta_derivative(self) -> "LoopSL2":
        """Derivative in ``theta`` where ``lambda = r e^{i theta}``: ``A_k -> i k A_k``."""
        coeffs = {k: 1j * k * A for k, A in self.laurent().items()}
        # the Nyquist term is ambiguous; drop it
        if self.K % 2 == 0:
            coeffs.pop(self.K // 2, None)
        return LoopSL2.from_laurent(coeffs, self.K, self.r, self.phase)

    def negative_part(self) -> float:
        """Largest norm among coefficients with ``k < 0``."""
        return max((float(np.max(np.abs(A))) for k, A in self.laurent().items() if k < 0), default=0.0)

    # ------------------------------------------------------------ JSON
    def to_json(self, N: int | None = None) -> dict:
        coeffs = self.laurent()
        if N is not None:
            coeffs = {k: A for k, A in coeffs.items() if abs(k) <= N}
        return {str(k): [[[float(z.real), float(z.imag)] for z in row] for row in A] for k, A in sorted(coeffs.items())}

    @classmethod
    def from_json(cls, data: dict, K: int, r: float = 1.0, phase: float = 0.0) -> "LoopSL2":
        coeffs = {int(k): np.array([[complex(*z) for z in row] for row in A]) for k, A in data.items()}
        return cls.from_laurent(coeffs, K, r, phase)


def star(X: LoopSL2) -> LoopSL2:
    return X.star()


def theta_derivative(X: LoopSL2) -> LoopSL2:
    return X.theta_derivative()


def is_r_unitary(X: LoopSL2, tol: float = 1e-10) -> tuple[bool, float]:
    """Whether ``X* X = I`` on the grid, with the max residual."""
    res = float(np.max(np.abs(X.star().samples @ X.samples - I2)))
    return res < tol, res


def upper_cholesky(K: np.ndarray) -> np.ndarray:
    """Upper-triangular ``S`` with positive diagonal and ``K = S^dagger S``."""
    L = np.linalg.cholesky(K)
    return dagger(L)


@dataclass(frozen=True)
class Iwasawa:
    """Result of ``X = F B`` with ``F`` unitary and ``B`` in the positive loop group.

    ``P`` holds the polynomial coefficients of ``B^{-1} S`` so that ``F`` can
    be evaluated off the grid from a value of ``X``.
    """

    F: LoopSL2
    B: LoopSL2
    P: np.ndarray  # (N+1, 2, 2), ascending powers of lambda
    S: np.ndarray
    condition: float

    def P_at(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        powers = lam[:, None] ** np.arange(self.P.shape[0])[None]
        return np.einsum("lk,kij->lij", powers, self.P)

    def unitary_factor(self, X_values: np.ndarray, lam) -> np.ndarray:
        """``F(lambda) = X(lambda) P(lambda) S^{-1}`` at off-grid points."""
        return np.asarray(X_values) @ self.P_at(lam) @ np.linalg.inv(self.S)

    def positive_factor(self, lam) -> np.ndarray:
        return self.S @ inv2(self.P_at(lam))


def _toeplitz_solve(Hc: dict, N: int) -> tuple[np.ndarray, float]:
    """Solve ``sum_{k=1..N} H_{m-k} P_k = -H_m`` for ``m = 1..N``."""
    Z = np.zeros((2, 2), dtype=complex)
    A = np.zeros((2 * N, 2 * N), dtype=complex)
    rhs = np.zeros((2 * N, 2), dtype=complex)
    for m in range(1, N + 1):
        rhs[2 * (m - 1):2 * m] = -Hc.get(m, Z)
        for k in range(1, N + 1):
            A[2 * (m - 1):2 * m, 2 * (k - 1):2 * k] = Hc.get(m - k, Z)
    cond = float(np.linalg.cond(A))
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return sol.reshape(N, 2, 2), cond


def iwasawa(X: LoopSL2, N: int = 16, max_condition: float = 1e12, tail_tol: float = 1e-8) -> Iwasawa:
    """Unit-circle Iwasawa splitting ``X = F B`` by a block-Toeplitz solve.

    ``H = X^dagger X = B^dagger B`` on the circle.  With ``P = B^{-1} B(0)``
    the product ``H P`` has no positive powers, which is a linear system for
    the coefficients of ``P``.  ``B(0)`` is then the upper Cholesky factor of
    the constant ``P^dagger H P``.
    """
    if X.r != 1.0:
        raise ValueError("the splitting is implemented for r = 1 only")
    if 2 * N + 1 > X.K:
        raise ValueError("grid too coarse for the requested truncation")
    if X.tail_energy(N) > tail_tol:
        warnings.warn(f"loop spectrum not resolved by N={N}", TruncationWarning, stacklevel=2)
    H = LoopSL2(dagger(X.samples) @ X.samples, X.r, X.phase)
    Hc = H.laurent()
    Pk, cond = _toeplitz_solve(Hc, N)
    if not np.isfinite(cond) or cond > max_condition:
        raise IwasawaError(f"Toeplitz system ill-conditioned (cond {cond:.3g})")
    P = np.concatenate([I2[None], Pk], axis=0)
    lam = X.grid
    Pv = np.einsum("lk,kij->lij", lam[:, None] ** np.arange(N + 1)[None], P)
    Kc = dagger(Pv) @ H.samples @ Pv
    Km = np.mean(Kc, axis=0)
    Km = 0.5 * (Km + dagger(Km))
    S = upper_cholesky(Km)
    S = S / np.sqrt(np.real(det2(S)))
    Sinv = np.linalg.inv(S)
    F = X.samples @ Pv @ Sinv
    B = S[None] @ inv2(Pv)
    return Iwasawa(LoopSL2(F, X.r, X.phase), LoopSL2(B, X.r, X.phase), P, S, cond)


def random_su2_loop(rng: np.random.Generator, K: int, degree: int = 3, scale: float = 0.4,
                    phase: float = 0.0) -> LoopSL2:
    """``exp(A(lambda))`` with ``A`` a random su(2)-valued Laurent polynomial."""
    from scipy.linalg import expm

    coeffs = {}
    for k in range(0, degree + 1):
        M = scale * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / (1 + k)
        M -= np.trace(M) / 2 * I2
        if k == 0:
            M = 0.5 * (M - dagger(M))
            coeffs[0] = M
        else:
            coeffs[k] = M
            coeffs[-k] = -dagger(M)
    lam = circle_grid(K, 1.0, phase)
    A = sum(c[None] * (lam ** k)[:, None, None] for k, c in coeffs.items())
    return LoopSL2(np.array([expm(a) for a in A]), 1.0, phase)


def random_positive_loop(rng: np.random.Generator, K: int, degree: int = 3, scale: float = 0.4,
                         phase: float = 0.0) -> LoopSL2:
    """A polynomial loop in ``lambda`` with polynomial inverse and ``B(0)`` upper, positive diagonal."""
    lam = circle_grid(K, 1.0, phase)
    s = float(np.exp(scale * rng.normal()))
    B0 = np.array([[s, scale * complex(*rng.normal(size=2))], [0, 1 / s]])
    out = np.repeat(B0[None], K, axis=0)
    for _ in range(2):
        p = scale * (rng.normal(size=degree) + 1j * rng.normal(size=degree))
        q = scale * (rng.normal(size=degree) + 1j * rng.normal(size=degree))
        pv = sum(p[j] * lam ** (j + 1) for j in range(degree))
        qv = sum(q[j] * lam ** (j + 1) for j in range(degree))
        U = np.zeros((K, 2, 2), dtype=complex)
        U[:, 0, 0] = U[:, 1, 1] = 1
        U[:, 0, 1] = pv
        L = np.zeros((K, 2, 2), dtype=complex)
        L[:, 0, 0] = L[:, 1, 1] = 1
        L[:, 1, 0] = qv
        out = out @ U @ L
    return LoopSL2(out, 1.0, phase)

"""Spherical triangle tests, weight scans and pointwise unitarization of monodromy."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .looplab import dagger, det2, inv2, upper_cholesky
from .monodromy import GENERATORS, LambdaGrid, MonodromyRep, mu_formula
from .moebius import BranchData

BOUNDARY_TOL = 1e-12
GAP_THRESHOLD = 1e6


class Verdict(str, enum.Enum):
    STRICT = "strict"
    BOUNDARY = "boundary"
    FAIL = "fail"


@dataclass(frozen=True)
class TriangleVerdict:
    status: Verdict
    margins: tuple  # (1 - sum, nu2 + nu3 - nu1, nu1 + nu3 - nu2, nu1 + nu2 - nu3)

    @property
    def ok(self) -> bool:
        return self.status is not Verdict.FAIL


class UnitarizeError(RuntimeError):
    """Base class; ``code`` is ``REDUCIBLE`` or ``NOT_UNITARIZABLE``."""

    code = "UNITARIZE"

    def __init__(self, msg: str, samples=()):
        super().__init__(msg)
        self.samples = list(samples)


class ReducibleError(UnitarizeError):
    code = "REDUCIBLE"


class NotUnitarizableError(UnitarizeError):
    code = "NOT_UNITARIZABLE"


def reduce_exponent(mu):
    """Map ``mu`` to ``nu`` in ``[-1/2, 1/2]`` with the same ``exp(+-2 pi i mu)``; complex gives nan."""
    mu = np.asarray(mu, dtype=complex)
    real = np.abs(mu.imag) < 1e-14
    nu = (mu.real + 0.5) % 1.0 - 0.5
    return np.where(real, nu, np.nan)


def triangle_inequalities(nu1, nu2, nu3) -> TriangleVerdict:
    """Verdict on the four slacks ``1 - sum|nu|`` and ``|nu_i| + |nu_j| - |nu_k|``.

    Complex or nan exponents (a radicand below zero) give FAIL.
    """
    a = []
    for x in (nu1, nu2, nu3):
        x = complex(x)
        if not np.isfinite(x.real) or abs(x.imag) > 1e-14:
            return TriangleVerdict(Verdict.FAIL, (np.nan,) * 4)
        a.append(abs(x.real))
    a1, a2, a3 = a
    margins = (1 - a1 - a2 - a3, a2 + a3 - a1, a1 + a3 - a2, a1 + a2 - a3)
    if all(m > BOUNDARY_TOL for m in margins):
        status = Verdict.STRICT
    elif all(m >= -BOUNDARY_TOL for m in margins):
        status = Verdict.BOUNDARY
    else:
        status = Verdict.FAIL
    return TriangleVerdict(status, tuple(float(m) for m in margins))


def verdicts_for(weights, branch: BranchData, lam) -> list:
    """Triangle verdicts of the exponents ``mu_k(w_k, lambda)`` along ``lam``."""
    nus = [reduce_exponent(mu_formula(w, lam, n)) for w, n in zip(weights, branch.mults)]
    return [triangle_inequalities(*(nu[j] for nu in nus)) for j in range(np.size(lam))]


@dataclass(frozen=True)
class ScanEntry:
    weights: tuple
    admissible: bool
    failing: tuple  # indices of offending lambda samples
    min_margin: float


def weight_region_scan(branch: BranchData, weight_grid, K: int = 64) -> list:
    """Admissibility of each weight triple on a ``K``-point grid through ``lambda = 1``.

    Admissible means STRICT at every sample other than 1 and at least
    BOUNDARY at 1.
    """
    lam = np.exp(2j * np.pi * np.arange(K) / K)
    out = []
    for w in weight_grid:
        w = tuple(float(x) for x in w)
        vs = verdicts_for(w, branch, lam)
        # sample 0 is lambda = 1, where BOUNDARY is allowed
        failing = tuple(j for j, v in enumerate(vs)
                        if v.status is Verdict.FAIL or (j > 0 and v.status is not Verdict.STRICT))
        margins = [min(v.margins) for j, v in enumerate(vs) if j]
        out.append(ScanEntry(w, not failing, failing, float(np.nanmin(margins)) if margins else np.nan))
    return out


def box_grid(lo: float = -1.0, hi: float = 1.0, step: float = 0.1) -> list:
    vals = np.round(np.arange(lo, hi + step / 2, step), 12)
    return [tuple(w) for w in itertools.product(vals, repeat=3)]


def cyclic_line(values=(0.1, 0.4, 0.8, 2.0)) -> list:
    return [(0.0, 0.0, float(v)) for v in values]


# ---------------------------------------------------------------- invariant forms

_HERM_BASIS = np.array([
    [[1, 0], [0, 0]],
    [[0, 0], [0, 1]],
    [[0, 1], [1, 0]],
    [[0, 1j], [-1j, 0]],
], dtype=complex)


def invariant_form_system(mats) -> np.ndarray:
    """Real matrix of ``H -> (M_k^dagger H M_k - H)_k`` on the 4-dim Hermitian space."""
    rows = []
    for M in mats:
        cols = [(dagger(M) @ E @ M - E).ravel() for E in _HERM_BASIS]
        A = np.array(cols).T
        rows.append(np.vstack([A.real, A.imag]))
    return np.vstack(rows)


def invariant_form(mats, gap_threshold: float = GAP_THRESHOLD) -> tuple[np.ndarray, float]:
    """The det-1 positive Hermitian ``H`` with ``M^dagger H M = H`` for all ``M``."""
    A = invariant_form_system(mats)
    _, s, vt = np.linalg.svd(A)
    gap = s[-2] / max(s[-1], 1e-300)
    if gap < gap_threshold:
        raise ReducibleError(f"invariant Hermitian forms are not a single ray (gap {gap:.3g})")
    x = vt[-1]
    H = np.tensordot(x, _HERM_BASIS, axes=1)
    if np.trace(H).real < 0:
        H = -H
    ev = np.linalg.eigvalsh(H)
    if ev[0] <= 0:
        raise NotUnitarizableError("the invariant Hermitian form is indefinite")
    H = H / np.sqrt(np.prod(ev))
    return 0.5 * (H + dagger(H)), float(gap)


@dataclass(frozen=True)
class Unitarizer:
    """Per-sample dressing ``C`` with ``C M_k C^{-1}`` unitary and ``H = C^dagger C``."""

    grid: LambdaGrid
    C: np.ndarray  # (L, 2, 2), nan where unavailable
    H: np.ndarray
    gaps: np.ndarray
    source: tuple  # per sample: "solve", "interp" or "excluded"

    @property
    def lam(self) -> np.ndarray:
        return self.grid.values

    def conjugated(self, M: np.ndarray) -> np.ndarray:
        return self.C @ M @ inv2(self.C)

    def unitarity_residual(self, rep: MonodromyRep, skip_one: bool = True) -> float:
        worst = 0.0
        for M in rep.generators.values():
            N = self.conjugated(M)
            r = np.max(np.abs(dagger(N) @ N - np.eye(2)), axis=(1, 2))
            mask = np.isfinite(r)
            if skip_one:
                mask &= np.abs(self.lam - 1) > 1e-14
            worst = max(worst, float(np.max(r[mask])))
        return worst

    def continuity(self) -> dict:
        """Jumps of ``H`` along the main grid versus the typical local increment."""
        H = self.H[: self.grid.K]
        d = np.max(np.abs(np.roll(H, -1, axis=0) - H), axis=(1, 2))
        med = float(np.median(d))
        return {"max_jump": float(np.max(d)), "median_step": med,
                "ratio": float(np.max(d) / med) if med > 0 else 0.0}

    def fourier_tail(self, N: int = 8) -> float:
        """Relative size of the ``k < -N`` coefficients of ``C`` on the main grid."""
        c = np.fft.fft(self.C[: self.grid.K], axis=0)
        ks = np.fft.fftfreq(self.grid.K, 1.0 / self.grid.K)
        e = np.sum(np.abs(c) ** 2, axis=(1, 2))
        return float(np.sqrt(np.sum(e[ks < -N]) / np.sum(e)))


def _interp_hermitian(H: np.ndarray, phase: float, lam_out: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation of samples on ``exp(i(phase + 2 pi j/K))``."""
    K = H.shape[0]
    c = np.fft.fft(H, axis=0) / K
    ks = np.fft.fftfreq(K, 1.0 / K).astype(int)
    out = np.zeros((lam_out.size, 2, 2), dtype=complex)
    theta = np.angle(lam_out) - phase
    for j, k in enumerate(ks):
        if K % 2 == 0 and k == -K // 2:
            # split the Nyquist term symmetrically so the result stays Hermitian
            out += 0.5 * c[j][None] * (np.exp(1j * k * theta)[:, None, None] + np.exp(-1j * k * theta)[:, None, None])
            continue
        out += c[j][None] * np.exp(1j * k * theta)[:, None, None]
    return 0.5 * (out + dagger(out))


def pointwise_unitarizer(rep: MonodromyRep, gap_threshold: float = GAP_THRESHOLD, aux: str = "auto") -> Unitarizer:
    """Solve ``M_k^dagger H M_k = H`` per sample and take ``C`` with ``H = C^dagger C``.

    ``lambda = 1`` is excluded.  The auxiliary samples ``e^{+-i eps}`` are
    solved directly when the system is well separated there and otherwise
    filled by trigonometric interpolation of ``H`` from the main grid
    (``aux`` = "solve", "interp" or "auto").
    """
    grid = rep.grid
    L = grid.values.size
    H = np.full((L, 2, 2), np.nan, dtype=complex)
    gaps = np.full(L, np.nan)
    source = ["excluded"] * L
    failures = {}
    for j in range(grid.K):
        mats = [rep.generators[name][j] for name in rep.order]
        try:
            H[j], gaps[j] = invariant_form(mats, gap_threshold)
            source[j] = "solve"
        except (ReducibleError, NotUnitarizableError) as exc:
            failures[j] = exc
    if failures:
        kinds = {type(e) for e in failures.values()}
        cls = NotUnitarizableError if NotUnitarizableError in kinds else ReducibleError
        raise cls(f"{cls.code} at {len(failures)} of {grid.K} samples", sorted(failures))
    interp = _interp_hermitian(H[: grid.K], grid.phase, grid.values[grid.K:])
    for i, j in enumerate(range(grid.K, L)):
        if j == grid.i_one:
            # lambda = 1 itself is never solved; the interpolant is kept as the smooth extension
            H[j] = interp[i] / np.sqrt(np.real(np.linalg.det(interp[i])))
            source[j] = "interp"
            continue
        done = False
        if aux in ("auto", "solve"):
            mats = [rep.generators[name][j] for name in rep.order]
            try:
                Hj, gj = invariant_form(mats, gap_threshold)
                if aux == "solve" or gj > 1e3 * gap_threshold:
                    H[j], gaps[j], source[j], done = Hj, gj, "solve", True
            except (ReducibleError, NotUnitarizableError):
                if aux == "solve":
                    raise
        if not done:
            H[j] = interp[i] / np.sqrt(np.real(np.linalg.det(interp[i])))
            source[j] = "interp"
    C = np.array([upper_cholesky(h) for h in H])
    C = C / np.sqrt(det2(C))[:, None, None]
    return Unitarizer(grid, C, H, gaps, tuple(source))


def irreducibility_check(rep: MonodromyRep, tol: float = 1e-8) -> dict:
    """Commutator norms and a common-eigenline test per sample."""
    names = list(rep.order)
    comm = np.zeros(rep.lam.size)
    line = np.zeros(rep.lam.size)
    for a, b in itertools.combinations(names, 2):
        A, B = rep.generators[a], rep.generators[b]
        comm = np.maximum(comm, np.max(np.abs(A @ B - B @ A), axis=(1, 2)))
    for j in range(rep.lam.size):
        # smallest angle between an eigenline of one generator and any eigenline of the others
        best = np.inf
        _, v0 = np.linalg.eig(rep.generators[names[0]][j])
        for c in range(2):
            e = v0[:, c] / np.linalg.norm(v0[:, c])
            worst = 0.0
            for name in names[1:]:
                M = rep.generators[name][j]
                Me = M @ e
                # distance of M e from the line through e
                worst = max(worst, float(np.linalg.norm(Me - (np.vdot(e, Me)) * e) / max(np.linalg.norm(Me), 1e-300)))
            best = min(best, worst)
        line[j] = best
    reducible = (comm < tol) | (line < tol)
    return {"commutator": comm, "eigenline": line, "reducible": reducible}

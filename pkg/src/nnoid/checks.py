"""The property suite behind ``nnoid check``; each check returns its worst value and limit."""

from __future__ import annotations

import time
import warnings

import numpy as np

from .complexrat import Poly, RationalMap, compose, schwarzian_at
from .looplab import TruncationWarning, iwasawa, random_positive_loop, random_su2_loop
from .moebius import (branch_data, build_group, invariant_map, reflection_residual,
                      verify_invariance)
from .monodromy import (LambdaGrid, check_closing, descent_check, monodromies_downstairs, trace_residuals,
                        upstairs_end_monodromies)
from .potentials import build_spec, gauge_apply, pulled_eta_at, schwartz_gauge, xi_at
from .unitarize import ReducibleError, cyclic_line, invariant_form, pointwise_unitarizer, weight_region_scan

TABLE_GROUPS = [("cyclic", n) for n in range(2, 9)] + [("dihedral", n) for n in range(2, 9)] + [
    ("tetrahedral", None), ("octahedral", None), ("icosahedral", None)]
TRACE_RUNS = [("dihedral", 3, (0.3, 0.3, 0.3)), ("cyclic", 3, (0.0, 0.0, 0.4))]


def _result(name: str, value: float, limit: float, passed: bool | None = None, **extra) -> dict:
    ok = bool(value < limit) if passed is None else bool(passed)
    return {"name": name, "value": float(value), "limit": float(limit), "passed": ok, **extra}


def _group(label, n):
    return build_group(label, n) if n else build_group(label)


def expected_mults(label: str, n: int | None) -> tuple:
    if label == "cyclic":
        return (n, n)
    if label == "dihedral":
        return (2, 2, n)
    return {"tetrahedral": (3, 3, 2), "octahedral": (4, 3, 2), "icosahedral": (5, 3, 2)}[label]


def check_multiplicities() -> list:
    t0 = time.perf_counter()
    bad, hurwitz_bad = [], []
    for label, n in TABLE_GROUPS:
        G = _group(label, n)
        u = invariant_map(G)
        bd = branch_data(G, u)
        got = tuple(m for m in bd.mults if m > 1)
        want = expected_mults(label, n)
        if sorted(got) != sorted(want):
            bad.append(G.name)
        if bd.hurwitz_sum() != 2 * u.degree - 2:
            hurwitz_bad.append(G.name)
    dt = time.perf_counter() - t0
    return [_result("multiplicity table", len(bad), 1, detail=bad, seconds=dt),
            _result("multiplicity runtime [s]", dt, 10.0),
            _result("Riemann-Hurwitz", len(hurwitz_bad), 1, detail=hurwitz_bad)]


def check_invariance() -> list:
    worst_inv = worst_ref = 0.0
    for label, n in TABLE_GROUPS:
        G = _group(label, n)
        u = invariant_map(G)
        worst_inv = max(worst_inv, verify_invariance(u, G))
        worst_ref = max(worst_ref, reflection_residual(u))
    return [_result("invariance", worst_inv, 1e-8), _result("conj symmetry", worst_ref, 1e-8)]


def random_rational(rng: np.random.Generator, max_degree: int = 4) -> RationalMap:
    dn, dd = rng.integers(0, max_degree + 1, size=2)
    if dn == 0 and dd == 0:
        dn = 1
    num = Poly(rng.normal(size=dn + 1) + 1j * rng.normal(size=dn + 1))
    den = Poly(rng.normal(size=dd + 1) + 1j * rng.normal(size=dd + 1))
    return RationalMap(num, den)


def chain_rule_residual(f: RationalMap, g: RationalMap, z: complex) -> float:
    """``|S(f o g) - (S f o g) g'^2 - S g|`` relative to the terms."""
    fg = compose(f, g)
    gz = g(z)
    g1 = g.deriv()(z)
    lhs = schwarzian_at(fg, z)
    a = schwarzian_at(f, gz) * g1 ** 2
    b = schwarzian_at(g, z)
    return abs(lhs - a - b) / (1 + abs(a) + abs(b))


def check_chain_rule(seed: int = 0, pairs: int = 100) -> list:
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < pairs:
        f, g = random_rational(rng), random_rational(rng)
        z = complex(rng.normal(), rng.normal())
        try:
            gz = g(z)
            if not np.isfinite(gz) or f.is_constant or g.is_constant:
                continue
            if abs(g.deriv()(z)) < 1e-3 or abs(f.deriv()(gz)) < 1e-3:
                continue
            r = chain_rule_residual(f, g, z)
        except (ValueError, ZeroDivisionError):
            continue
        if np.isfinite(r):
            worst = max(worst, r)
            done += 1
    return [_result("Schwarzian chain rule", worst, 1e-10)]


def gauge_residual(spec, samples: int = 100, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=samples) + 1j * rng.normal(size=samples)
    lam = np.exp(2j * np.pi * rng.random(samples))
    g, dg = schwartz_gauge(spec.inv, z, lam, with_derivative=True)
    lhs = gauge_apply(xi_at(spec, z, lam), g, dg)
    rhs = pulled_eta_at(spec, z, lam)
    return float(np.max(np.max(np.abs(lhs - rhs), axis=(1, 2)) / (1 + np.max(np.abs(rhs), axis=(1, 2)))))


def check_gauge(seed: int = 0) -> list:
    out = []
    for label, n, w in [("tetrahedral", None, (0.2, 0.1, 0.3)), ("dihedral", 3, (0.3, 0.3, 0.3))]:
        spec = build_spec(_group(label, n), w)
        out.append(_result(f"gauge identity {spec.group.name}", gauge_residual(spec, 100, seed), 1e-9))
    return out


def check_traces_and_closing() -> list:
    out = []
    t0 = time.perf_counter()
    for label, n, w in TRACE_RUNS:
        spec = build_spec(_group(label, n), w)
        grid = LambdaGrid(16)
        rep = monodromies_downstairs(spec, grid)
        tr = max(float(np.max(r)) for r in trace_residuals(spec, rep).values())
        out.append(_result(f"trace formula {spec.group.name}", tr, 1e-5))
        # closing is a property of the upstairs loops around the ends
        ups = upstairs_end_monodromies(spec, grid, per_slot=2)
        cl = [check_closing(M, grid) for M in ups.values()]
        out.append(_result(f"closing M(1) {spec.group.name}", max(c["value"] for c in cl), 1e-5))
        out.append(_result(f"closing M'(1) {spec.group.name}", max(c["derivative"] for c in cl), 1e-4))
    out.append(_result("trace runtime [s]", time.perf_counter() - t0, 120.0))
    return out


def check_cyclic_anchor() -> list:
    bd = build_spec(build_group("cyclic", 3), (0, 0, 0.4)).branch
    entries = weight_region_scan(bd, cyclic_line(), 64)
    verdict = {e.weights[2]: e.admissible for e in entries}
    ok = verdict == {0.1: True, 0.4: True, 0.8: True, 2.0: False}
    return [_result("cyclic admissibility anchor", 0.0 if ok else 1.0, 0.5, detail=verdict)]


def commuting_triple() -> list:
    d = np.diag([np.exp(0.3j), np.exp(-0.3j)])
    return [d, d @ d, np.linalg.inv(d @ d @ d)]


def check_unitarization() -> list:
    spec = build_spec(build_group("dihedral", 3), (0.3, 0.3, 0.3))
    rep = monodromies_downstairs(spec, LambdaGrid(64))
    U = pointwise_unitarizer(rep)
    try:
        invariant_form(commuting_triple())
        raised = False
    except ReducibleError:
        raised = True
    return [_result("unitarity D3", U.unitarity_residual(rep), 1e-7),
            _result("REDUCIBLE on commuting triple", 0.0 if raised else 1.0, 0.5)]


def check_descent() -> list:
    out = []
    for label, n, w in [("tetrahedral", None, (0.2, 0.1, 0.3)), ("cyclic", 3, (0.3, 0.0, 0.4))]:
        G = _group(label, n)
        spec = build_spec(G, w)
        m = 3
        tau = next(g for g in G.elements if not g.is_identity and g.order() == m)
        d = descent_check(spec, tau, LambdaGrid(16))
        out.append(_result(f"descent {G.name} (order {d['order']})", d["residual"], 1e-6))
    return out


def check_iwasawa(seed: int = 0, loops: int = 50) -> list:
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    rec = uniq = 0.0
    for _ in range(loops):
        F0 = random_su2_loop(rng, 128)
        B0 = random_positive_loop(rng, 128)
        X = F0 * B0
        with warnings.catch_warnings():
            # exponentials of Laurent polynomials have a small infinite tail
            warnings.simplefilter("ignore", TruncationWarning)
            iw = iwasawa(X, 16)
        rec = max(rec, float(np.max(np.abs((iw.F * iw.B).samples - X.samples))))
        uniq = max(uniq, float(np.max(np.abs(iw.F.samples - F0.samples))),
                   float(np.max(np.abs(iw.B.samples - B0.samples))))
    dt = time.perf_counter() - t0
    return [_result("Iwasawa reconstruction", rec, 1e-8), _result("Iwasawa uniqueness", uniq, 1e-8),
            _result("Iwasawa runtime [s]", dt, 5.0)]


def check_surface(radial: int = 3, angular: int = 24) -> list:
    from . import surface as S

    out = []
    for label, n, w in [("cyclic", 3, (0.0, 0.0, 0.4)), ("dihedral", 3, (0.3, 0.3, 0.3))]:
        G = build_group(label, n)
        spec = build_spec(G, w)
        grid = LambdaGrid(64)
        U = pointwise_unitarizer(monodromies_downstairs(spec, grid))
        dg = S.domain_grid(spec, sphere_points=12 * angular, radial=radial, angular=angular)
        mesh, ff = S.build_mesh(spec, U, dg)
        diam = mesh.diameter
        if label == "cyclic":
            loops = S.end_loops(spec, grid.values)
            cl = S.closure_check(spec, U, ff, loops, diameter=diam)
            neg = S.closure_check(spec, S.identity_dressing(grid), ff, loops, diameter=diam)
            out.append(_result("closure / diameter", cl["relative"], 1e-4))
            out.append(_result("identity dressing closure / diameter", neg["relative"], 1e-2,
                               passed=neg["relative"] > 1e-2))
        rep = S.symmetry_check(mesh, G)
        out.append(_result(f"symmetry order {G.name}", rep.order, rep.expected_order,
                           passed=rep.order == rep.expected_order and rep.injective))
        out.append(_result(f"symmetry RMS / diameter {G.name}", rep.max_residual / diam, 1e-3))
        out.append(_result(f"homomorphism defect {G.name}", rep.homomorphism_defect, 1e-6))
    return out


def run_checks(seed: int = 0, surface: bool = False) -> list:
    results = []
    for fn in (check_multiplicities, check_invariance, lambda: check_chain_rule(seed), lambda: check_gauge(seed),
               check_traces_and_closing, check_cyclic_anchor, check_unitarization, check_descent,
               lambda: check_iwasawa(seed)):
        results.extend(fn())
    if surface:
        results.extend(check_surface())
    return results

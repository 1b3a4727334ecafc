"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

import functools
import time

import pytest

from nnoid import checks
from nnoid import surface as S
from nnoid.moebius import build_group
from nnoid.monodromy import LambdaGrid, monodromies_downstairs
from nnoid.potentials import build_spec
from nnoid.unitarize import pointwise_unitarizer


def pick(results, *prefixes):
    return [r for r in results if r["name"].startswith(prefixes)]


@functools.lru_cache(maxsize=None)
def traces_and_closing():
    return tuple(checks.check_traces_and_closing())


@functools.lru_cache(maxsize=None)
def surface_results():
    return tuple(checks.check_surface())


@functools.lru_cache(maxsize=None)
def multiplicities():
    return tuple(checks.check_multiplicities())


CRITERIA = {
    1: ("multiplicity table", lambda: pick(multiplicities(), "multiplicity")),
    2: ("Riemann-Hurwitz", lambda: pick(multiplicities(), "Riemann")),
    3: ("invariance and reflection", checks.check_invariance),
    4: ("Schwarzian chain rule", lambda: checks.check_chain_rule(0)),
    5: ("gauge identity", lambda: checks.check_gauge(0)),
    6: ("trace formula", lambda: pick(traces_and_closing(), "trace")),
    7: ("cyclic admissibility anchor", checks.check_cyclic_anchor),
    8: ("pointwise unitarization", checks.check_unitarization),
    9: ("closing conditions", lambda: pick(traces_and_closing(), "closing")),
    10: ("descent", checks.check_descent),
    11: ("surface closure", lambda: pick(surface_results(), "closure", "identity dressing")),
    12: ("mesh symmetry", lambda: pick(surface_results(), "symmetry", "homomorphism")),
    13: ("Iwasawa factorization", lambda: checks.check_iwasawa(0)),
}

# platonic meshes, with weights inside the admissible region
STRETCH = [("tetrahedral", (0.0, 0.0, 0.3), 24), ("octahedral", (0.1, 0.0, 0.0), 48),
           ("icosahedral", (0.1, 0.0, 0.0), 120)]


def format_line(tag, passed, name, results):
    parts = [f"{r['name']}={r['value']:.3g} (limit {r['limit']:.3g})" for r in results]
    return f"{'PASS' if passed else 'FAIL'} {tag}: {name}: " + "; ".join(parts)


def evaluate(k):
    name, fn = CRITERIA[k]
    results = list(fn())
    passed = bool(results) and all(r["passed"] for r in results)
    return passed, format_line(f"criterion {k:2d}", passed, name, results)


def stretch_results(label, weights, order, radial=3, angular=24):
    t0 = time.perf_counter()
    G = build_group(label)
    spec = build_spec(G, weights)
    U = pointwise_unitarizer(monodromies_downstairs(spec, LambdaGrid(64)))
    dg = S.domain_grid(spec, sphere_points=12 * angular, radial=radial, angular=angular)
    mesh, _ = S.build_mesh(spec, U, dg)
    rep = S.symmetry_check(mesh, G)
    dt = time.perf_counter() - t0
    diam = mesh.diameter
    return [
        {"name": "order", "value": rep.order, "limit": order,
         "passed": rep.order == order and rep.injective},
        {"name": "RMS / diameter", "value": rep.max_residual / diam, "limit": 1e-3,
         "passed": rep.max_residual / diam < 1e-3},
        {"name": "homomorphism defect", "value": rep.homomorphism_defect, "limit": 1e-6,
         "passed": rep.homomorphism_defect < 1e-6},
        {"name": "runtime [s]", "value": dt, "limit": 1800.0, "passed": dt < 1800.0},
    ]


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    passed, line = evaluate(k)
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


@pytest.mark.parametrize("label,weights,order", STRETCH, ids=[s[0] for s in STRETCH])
def test_stretch_symmetry(label, weights, order, capsys):
    results = stretch_results(label, weights, order)
    passed = all(r["passed"] for r in results)
    line = format_line("stretch 12", passed, f"symmetry {label} {weights}", results)
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


if __name__ == "__main__":
    for k in sorted(CRITERIA):
        print(evaluate(k)[1], flush=True)
    for label, weights, order in STRETCH:
        res = stretch_results(label, weights, order)
        print(format_line("stretch 12", all(r["passed"] for r in res), f"symmetry {label} {weights}", res),
              flush=True)

"""Command line entry point and the end-to-end pipeline."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .complexrat import RationalMap
from .looplab import IwasawaError
from .moebius import (LABELS, GroupError, build_group, branch_data, invariant_map, nnoid_invariant,
                      reflection_residual, verify_invariance)
from .monodromy import (GENERATORS, LambdaGrid, PathError, TransportError, check_closing, descent_check,
                        eigen_exponent, monodromies_downstairs, mu_formula, trace_residuals,
                        upstairs_end_monodromies)
from .potentials import (Convention, PotentialError, WeightTriple, alpha_pullback_residual, build_spec,
                         gauge_apply, pulled_eta_at, schwartz_gauge, xi_at)
from .unitarize import (NotUnitarizableError, ReducibleError, UnitarizeError, box_grid, cyclic_line,
                        irreducibility_check, pointwise_unitarizer, weight_region_scan)

log = logging.getLogger("nnoid")

EXIT_OK, EXIT_INADMISSIBLE, EXIT_NUMERICAL, EXIT_CONFIG = 0, 2, 3, 4
BEGIN, END = "-----BEGIN NNOID REPORT-----", "-----END NNOID REPORT-----"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- JSON

def jsonable(obj):
    """Plain JSON types: complex as ``[re, im]``, arrays as lists, non-finite as null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(float(obj.real)), jsonable(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj) -> str:
    # repr of a float is the shortest string that round-trips, never more than 17 digits
    return json.dumps(jsonable(obj), indent=1, sort_keys=False)


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class GridConfig:
    radial: int = 4
    angular: int = 48
    r_cut: float = 0.35


@dataclass(frozen=True)
class OutConfig:
    mesh: str = "mesh.obj"
    report: str = "report.json"


@dataclass(frozen=True)
class RunConfig:
    group: str = "cyclic"
    n: int = 3
    weights: tuple = (0.0, 0.0, 0.4)
    convention: str = "scaled"
    lambda_samples: int = 64
    ode_tol: float = 1e-10
    iwasawa_N: int = 16
    grid: GridConfig = field(default_factory=GridConfig)
    epsilon_theta: float = 1e-3
    out: OutConfig = field(default_factory=OutConfig)
    seed: int = 0

    KEYS = ("group", "n", "weights", "convention", "lambda_samples", "ode_tol", "iwasawa_N", "grid",
            "epsilon_theta", "out", "seed")

    def validate(self) -> "RunConfig":
        label = self.group.lower()
        if label not in LABELS:
            try:
                label = build_group(label, max(self.n, 2)).label
            except GroupError as exc:
                raise ConfigError(str(exc)) from exc
        if label in ("cyclic", "dihedral") and self.n < 2:
            raise ConfigError("n must be at least 2 for cyclic and dihedral groups")
        if len(self.weights) != 3 or not all(math.isfinite(w) for w in self.weights):
            raise ConfigError("weights must be three finite numbers")
        try:
            Convention.parse(self.convention)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for name in ("ode_tol", "epsilon_theta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.grid.r_cut < math.pi / 2:
            raise ConfigError("grid.r_cut must lie in (0, pi/2)")
        if self.lambda_samples < 3 or self.grid.angular < 3 or self.grid.radial < 1:
            raise ConfigError("grid sizes are too small")
        if self.iwasawa_N < 1 or 2 * self.iwasawa_N + 1 > self.lambda_samples:
            raise ConfigError("need 1 <= iwasawa_N and 2 iwasawa_N + 1 <= lambda_samples")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = list(self.weights)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - set(cls.KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            grid = GridConfig(**d.get("grid", {}))
            out = OutConfig(**d.get("out", {}))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        kw = {k: d[k] for k in cls.KEYS if k in d and k not in ("grid", "out")}
        try:
            if "weights" in kw:
                kw["weights"] = tuple(float(w) for w in kw["weights"])
            for k in ("n", "lambda_samples", "iwasawa_N", "seed"):
                if k in kw:
                    if isinstance(kw[k], bool) or int(kw[k]) != kw[k]:
                        raise ConfigError(f"{k} must be an integer")
                    kw[k] = int(kw[k])
            for k in ("ode_tol", "epsilon_theta"):
                if k in kw:
                    kw[k] = float(kw[k])
            grid = GridConfig(int(grid.radial), int(grid.angular), float(grid.r_cut))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(grid=grid, out=out, **kw).validate()

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    def lambda_grid(self) -> LambdaGrid:
        return LambdaGrid(self.lambda_samples, self.epsilon_theta)


def _group(label: str, n: int | None):
    label = label.lower()
    if label in ("cyclic", "dihedral", "z", "d"):
        return build_group(label, n)
    return build_group(label)


def rational_json(u: RationalMap) -> dict:
    return {"num": jsonable(np.asarray(u.num.coeffs, dtype=complex)),
            "den": jsonable(np.asarray(u.den.coeffs, dtype=complex))}


# ---------------------------------------------------------------- stages

def stage_groups(ns=range(2, 9)) -> list:
    rows = []
    for label in LABELS:
        for n in (ns if label in ("cyclic", "dihedral") else [None]):
            G = _group(label, n)
            u = invariant_map(G)
            bd = branch_data(G, u)
            rows.append({"group": G.name, "order": G.order, "multiplicities": list(bd.mults),
                         "orbit_sizes": list(bd.orbit_sizes()), "degree": u.degree,
                         "hurwitz": bd.hurwitz_sum(), "hurwitz_ok": bd.hurwitz_sum() == 2 * u.degree - 2})
    return rows


def stage_invariant(G, seed: int = 0) -> dict:
    u = invariant_map(G)
    bd = branch_data(G, u)
    nn = nnoid_invariant(G)
    return {"group": G.name, "order": G.order, "u": rational_json(u), "degree": u.degree,
            "multiplicities": list(bd.mults), "orbit_sizes": list(bd.orbit_sizes()),
            "hurwitz_ok": bd.hurwitz_sum() == 2 * u.degree - 2,
            "invariance_residual": verify_invariance(u, G, seed=seed),
            "reflection_residual": reflection_residual(u, seed=seed + 1),
            "end_map": {"multiplicities": list(nn.branch.mults), "u": rational_json(nn.rational),
                        "invariance_residual": verify_invariance(nn, G, seed=seed)}}


def gauge_identity_residual(spec, samples: int = 100, seed: int = 0) -> float:
    """``|xi.g - u*eta|`` at random ``(z, lambda)`` with ``|lambda| = 1``."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=samples) + 1j * rng.normal(size=samples)
    lam = np.exp(2j * np.pi * rng.random(samples))
    g, dg = schwartz_gauge(spec.inv, z, lam, with_derivative=True)
    lhs = gauge_apply(xi_at(spec, z, lam), g, dg)
    rhs = pulled_eta_at(spec, z, lam)
    scale = 1 + np.max(np.abs(rhs), axis=(1, 2))
    return float(np.max(np.max(np.abs(lhs - rhs), axis=(1, 2)) / scale))


def stage_potential(spec, seed: int = 0) -> dict:
    return {"weights": spec.weights.as_tuple(), "convention": spec.convention.value,
            "multiplicities": list(spec.branch.mults),
            "Q": {"coeffs": spec.q_coeffs, "denominator": "u^2 (u-1)^2"},
            "alpha": {"coeffs": spec.alpha_coeffs, "denominator": "u^2 (u-1)^2"},
            "alpha_pullback_residual": alpha_pullback_residual(spec.alpha, spec.inv, 50, seed),
            "gauge_identity_residual": gauge_identity_residual(spec, 100, seed),
            "ends": len(spec.ends()), "degenerate": spec.weights.degenerate}


def stage_admissibility(spec, K: int) -> dict:
    entry = weight_region_scan(spec.branch, [spec.weights.as_tuple()], K)[0]
    lam = np.exp(2j * np.pi * np.arange(K) / K)
    return {"admissible": entry.admissible, "min_margin": entry.min_margin,
            "failing_samples": [int(j) for j in entry.failing],
            "failing_lambda": [lam[j] for j in entry.failing]}


def stage_monodromy(spec, grid: LambdaGrid, tol: float, with_upstairs: bool = True) -> tuple:
    rep = monodromies_downstairs(spec, grid, tol=tol)
    res = trace_residuals(spec, rep)
    theta = np.angle(grid.values)
    out = {"lambda_samples": grid.K, "relation_residual": rep.relation_residual(),
           "det_residual": rep.det_residual(), "generators": {}}
    for k, name in enumerate(GENERATORS):
        mu = mu_formula(spec.weights.as_tuple()[k], grid.values, spec.branch.mults[k])
        out["generators"][name] = {
            "trace": rep.traces(name)[: grid.K],
            "exponent": eigen_exponent(rep.generators[name])[: grid.K],
            "predicted_trace": 2 * np.cos(2 * np.pi * mu[: grid.K]),
            "trace_residual": float(np.max(res[name])),
            "closing": check_closing(rep.generators[name], grid),
        }
    out["theta"] = theta[: grid.K]
    if with_upstairs:
        ups = upstairs_end_monodromies(spec, grid, tol=tol)
        out["upstairs_closing"] = {k: check_closing(M, grid) for k, M in ups.items()}
    return rep, out


def stage_descent(spec, tol: float) -> dict:
    """Descent test for the highest-order element with a fixed point over 0 or 1."""
    elems = sorted((g for g in spec.group.elements if not g.is_identity), key=lambda g: -g.order())
    for tau in elems:
        try:
            d = descent_check(spec, tau, LambdaGrid(16), tol=tol)
        except PathError:
            continue
        return {"order": d["order"], "residual": d["residual"], "sign": d["sign"],
                "fixed_point": d["fixed_point"]}
    return {"order": 1, "residual": 0.0, "sign": 1, "fixed_point": None}


def stage_unitarize(rep) -> tuple:
    U = pointwise_unitarizer(rep)
    irr = irreducibility_check(rep)
    K = rep.grid.K
    per_lambda = []
    for name in rep.order:
        N = U.conjugated(rep.generators[name])
        per_lambda.append(np.max(np.abs(np.conj(np.swapaxes(N, -1, -2)) @ N - np.eye(2)), axis=(1, 2)))
    return U, {"unitarity_residual": U.unitarity_residual(rep),
               "per_lambda_residual": np.max(per_lambda, axis=0)[:K],
               "continuity": U.continuity(), "fourier_tail": U.fourier_tail(),
               "sources": {s: U.source.count(s) for s in sorted(set(U.source))},
               "reducible_samples": [int(j) for j in np.flatnonzero(irr["reducible"][:K])],
               "C": U.C}


def stage_surface(spec, U, cfg: RunConfig, figures_prefix: Path | None = None) -> tuple:
    from . import surface as S

    dg = S.domain_grid(spec, sphere_points=12 * cfg.grid.angular, radial=cfg.grid.radial,
                       angular=cfg.grid.angular, r_cut=cfg.grid.r_cut)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mesh, ff = S.build_mesh(spec, U, dg, N=cfg.iwasawa_N, tol=cfg.ode_tol)
    grid = U.grid
    loops = S.end_loops(spec, grid.values, tol=cfg.ode_tol)
    loops["contractible"] = S.contractible_loop_monodromy(spec, grid.values, tol=cfg.ode_tol)
    diam = mesh.diameter
    closure = S.closure_check(spec, U, ff, loops, N=cfg.iwasawa_N, diameter=diam)
    control = S.closure_check(spec, S.identity_dressing(grid), ff, loops, N=cfg.iwasawa_N, diameter=diam)
    sym = S.symmetry_check(mesh, spec.group, include_reflection=True)
    out = {"vertices": len(mesh.vertices), "faces": len(mesh.faces), "dropped_points": int((~ff.ok).sum()),
           "diameter": diam, "r_cut": dg.r_cut, "r_inner": dg.r_inner,
           "anti_hermitian_max": float(np.nanmax(ff.anti_hermitian)) if ff.ok.any() else None,
           "truncation_tail_max": float(np.nanmax(ff.truncation)) if ff.ok.any() else None,
           "warnings": sorted({str(w.message) for w in caught}),
           "closure": closure, "closure_identity_dressing": control,
           "symmetry": sym.to_json(), "mean_curvature": S.mean_curvature(mesh)}
    return mesh, out


# ---------------------------------------------------------------- run

def _figures(prefix: Path, mon: dict | None, unit: dict | None, U, mesh, residuals: dict) -> dict:
    from . import plotting

    figs = {}
    if mon is not None:
        theta = np.asarray(mon["theta"])
        traces = {k: np.asarray(v["trace"]) for k, v in mon["generators"].items()}
        pred = {k: np.asarray(v["predicted_trace"]) for k, v in mon["generators"].items()}
        figs["traces"] = plotting.plot_traces(theta, traces, pred, f"{prefix}_traces.png")
    if U is not None:
        figs["dressing"] = plotting.plot_dressing(np.angle(U.grid.main), U.H[: U.grid.K], f"{prefix}_dressing.png")
    if mesh is not None:
        figs["mesh"] = plotting.plot_mesh(mesh, f"{prefix}_mesh.png")
    if residuals:
        figs["residuals"] = plotting.plot_residuals(residuals, f"{prefix}_residuals.png", "residuals")
    return figs


def run(cfg: RunConfig, figures: bool = True) -> tuple[int, dict]:
    """Execute the pipeline; returns the exit status and the report (also written to disk)."""
    from .surface import export_obj

    report = {"version": __version__, "config": cfg.to_dict(), "status": "ok", "stages": {}}
    st = report["stages"]
    residuals = {}
    mon = unit = U = mesh = None
    code = EXIT_OK
    stage = "groups"
    try:
        G = _group(cfg.group, cfg.n)
        st["groups"] = {"group": G.name, "order": G.order, "expected_order": G.expected_order()}
        stage = "invariant"
        st["invariant"] = stage_invariant(G, cfg.seed)
        residuals["invariance"] = st["invariant"]["invariance_residual"]
        stage = "potential"
        spec = build_spec(G, cfg.weights, cfg.convention)
        st["potential"] = stage_potential(spec, cfg.seed)
        residuals["gauge identity"] = st["potential"]["gauge_identity_residual"]
        if spec.weights.degenerate:
            report["status"] = "degenerate"
            report["note"] = "all weights vanish: the surface is a round sphere and no mesh is built"
        else:
            stage = "admissibility"
            st["admissibility"] = stage_admissibility(spec, cfg.lambda_samples)
            if not st["admissibility"]["admissible"]:
                raise NotUnitarizableError("weights fail the triangle inequalities",
                                           st["admissibility"]["failing_samples"])
            stage = "monodromy"
            grid = cfg.lambda_grid()
            rep, mon = stage_monodromy(spec, grid, cfg.ode_tol)
            mon["descent"] = stage_descent(spec, cfg.ode_tol)
            st["monodromy"] = mon
            residuals["trace"] = max(v["trace_residual"] for v in mon["generators"].values())
            residuals["relation"] = mon["relation_residual"]
            residuals["descent"] = mon["descent"]["residual"]
            stage = "unitarize"
            U, unit = stage_unitarize(rep)
            st["unitarize"] = unit
            residuals["unitarity"] = unit["unitarity_residual"]
            stage = "surface"
            mesh, surf = stage_surface(spec, U, cfg)
            st["surface"] = surf
            residuals["closure / diameter"] = surf["closure"]["relative"]
            residuals["symmetry / diameter"] = surf["symmetry"]["max_residual"] / max(surf["diameter"], 1e-300)
            Path(cfg.out.mesh).parent.mkdir(parents=True, exist_ok=True)
            export_obj(mesh, cfg.out.mesh)
            surf["mesh_path"] = cfg.out.mesh
    except (NotUnitarizableError, ReducibleError) as exc:
        code = EXIT_INADMISSIBLE if isinstance(exc, NotUnitarizableError) else EXIT_NUMERICAL
        report["status"] = exc.code
        report["error"] = {"stage": stage, "message": str(exc), "failing_samples": list(exc.samples)}
    except (TransportError, PathError, IwasawaError, PotentialError, UnitarizeError, GroupError,
            np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        code = EXIT_NUMERICAL
        report["status"] = "NUMERICAL_FAILURE"
        report["error"] = {"stage": stage, "message": f"{type(exc).__name__}: {exc}"}
    report["tolerances"] = {"ode_tol": cfg.ode_tol, "iwasawa_N": cfg.iwasawa_N, "epsilon_theta": cfg.epsilon_theta,
                            "anti_hermitian": 1e-5, "closure_relative": 1e-4, "symmetry_relative": 1e-3,
                            "homomorphism_defect": 1e-6, "gap_threshold": 1e6}
    report["residuals"] = residuals
    if figures:
        prefix = Path(cfg.out.report).with_suffix("")
        report["figures"] = _figures(prefix, mon, unit, U, mesh, residuals)
    Path(cfg.out.report).parent.mkdir(parents=True, exist_ok=True)
    Path(cfg.out.report).write_text(dumps(report) + "\n")
    return code, report


# ---------------------------------------------------------------- argparse

def _weights(text: str) -> tuple:
    try:
        return WeightTriple.parse(text).as_tuple()
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_group(p, weights: bool = False):
    p.add_argument("--group", required=True, help="cyclic, dihedral, tetrahedral, octahedral, icosahedral")
    p.add_argument("--n", type=int, default=3, help="order parameter for cyclic and dihedral groups")
    if weights:
        p.add_argument("--weights", type=_weights, required=True, help="w0,w1,winf")
        p.add_argument("--convention", default="scaled", choices=["scaled", "unscaled"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nnoid", description="Symmetric CMC n-noids from loop-group potentials.")
    ap.add_argument("--version", action="version", version=f"nnoid {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sub.add_parser("groups", help="order and multiplicity table")
    p = sub.add_parser("invariant", help="invariant rational map as JSON")
    _add_group(p)
    p = sub.add_parser("potential", help="Hopf and correction differentials with residuals")
    _add_group(p, weights=True)
    p = sub.add_parser("weights", help="admissible weights on a scan")
    _add_group(p)
    p.add_argument("--scan", choices=["box", "cyclic-line"], default="cyclic-line")
    p.add_argument("--step", type=float, default=0.1, help="box spacing")
    p.add_argument("--lambda-samples", type=int, default=64)
    for name in ("monodromy", "unitarize"):
        p = sub.add_parser(name, help=f"{name} report as JSON")
        _add_group(p, weights=True)
        p.add_argument("--lambda-samples", type=int, default=64)
        p.add_argument("--ode-tol", type=float, default=1e-10)
    p = sub.add_parser("surface", help="full run from flags; writes mesh, report and figures")
    _add_group(p, weights=True)
    p.add_argument("--grid-radial", type=int, default=4)
    p.add_argument("--grid-angular", type=int, default=48)
    p.add_argument("--r-cut", type=float, default=0.35)
    p.add_argument("--epsilon-theta", type=float, default=1e-3)
    p.add_argument("--lambda-samples", type=int, default=64)
    p.add_argument("--iwasawa-N", type=int, default=16)
    p.add_argument("--ode-tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="mesh.obj")
    p.add_argument("--report", default="report.json")
    p.add_argument("--no-figures", action="store_true")
    p = sub.add_parser("run", help="full run from a JSON config")
    p.add_argument("config", nargs="?", help="path to the config file")
    p.add_argument("--template", action="store_true", help="print a default config and exit")
    p.add_argument("--no-figures", action="store_true")
    p = sub.add_parser("check", help="run the invariant and property suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--surface", action="store_true", help="include the Cyclic(3) surface checks")
    return ap


def _print(obj) -> None:
    print(dumps(obj))


def _print_report(report: dict) -> None:
    print(BEGIN)
    print(dumps(report))
    print(END)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        # unwritable output paths are a configuration problem
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GroupError as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotUnitarizableError as exc:
        _print({"status": exc.code, "message": str(exc), "failing_samples": list(exc.samples)})
        return EXIT_INADMISSIBLE
    except (TransportError, PathError, IwasawaError, UnitarizeError, PotentialError) as exc:
        _print({"status": "NUMERICAL_FAILURE", "message": f"{type(exc).__name__}: {exc}"})
        return EXIT_NUMERICAL


def _dispatch(args) -> int:
    if args.cmd == "groups":
        _print(stage_groups())
        return EXIT_OK
    if args.cmd == "check":
        from .checks import run_checks

        results = run_checks(seed=args.seed, surface=args.surface)
        for r in results:
            print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}: {r['value']:.3g} (limit {r['limit']:.3g})")
        return EXIT_OK if all(r["passed"] for r in results) else EXIT_NUMERICAL
    if args.cmd == "run":
        if args.template:
            print(RunConfig().to_json())
            return EXIT_OK
        if not args.config:
            raise ConfigError("a config path is required")
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from exc
        code, report = run(RunConfig.from_json(text), figures=not args.no_figures)
        _print_report(report)
        return code
    G = _group(args.group, args.n)
    if args.cmd == "invariant":
        _print(stage_invariant(G))
        return EXIT_OK
    if args.cmd == "weights":
        bd = nnoid_invariant(G).branch
        grid = box_grid(step=args.step) if args.scan == "box" else cyclic_line()
        entries = weight_region_scan(bd, grid, args.lambda_samples)
        _print({"group": G.name, "scan": args.scan, "multiplicities": list(bd.mults),
                "admissible": [e.weights for e in entries if e.admissible],
                "inadmissible": [{"weights": e.weights, "failing_samples": list(e.failing)}
                                 for e in entries if not e.admissible]})
        return EXIT_OK
    if args.cmd == "surface":
        cfg = RunConfig(G.label, args.n, args.weights, args.convention, args.lambda_samples, args.ode_tol,
                        args.iwasawa_N, GridConfig(args.grid_radial, args.grid_angular, args.r_cut),
                        args.epsilon_theta, OutConfig(args.out, args.report), args.seed).validate()
        code, report = run(cfg, figures=not args.no_figures)
        _print_report(report)
        return code
    spec = build_spec(G, args.weights, args.convention)
    if args.cmd == "potential":
        _print(stage_potential(spec))
        return EXIT_OK
    if args.lambda_samples < 3:
        raise ConfigError("lambda-samples must be at least 3")
    grid = LambdaGrid(args.lambda_samples)
    rep, mon = stage_monodromy(spec, grid, args.ode_tol)
    if args.cmd == "monodromy":
        _print(mon)
        return EXIT_OK
    _, unit = stage_unitarize(rep)
    _print(unit)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

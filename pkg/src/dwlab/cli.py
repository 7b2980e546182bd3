"""Batch experiment driver.

Subcommands: validate-potential, radial, radial-sweep, solve, multiplicity,
spectrum, morse-check.  Options come from an INI config file overridden by
command-line flags; every run writes its artifacts (delimited tables, JSON
sidecars, rendered figures) plus a manifest hashing all of them into the
output directory.  Reruns of an identical configuration reproduce the
manifest byte for byte.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import domain as dom_mod
from . import io as io_mod
from . import multiplicity as mult_mod
from . import plots
from . import radial as rad_mod
from . import spectral as spec_mod
from .errors import ConfigError, DwlabError
from .fieldsolver import FlowOptions, gradient_flow, newton_refine, uniform_field
from .potential import Potential, certify, from_table, quartic, tilt

EXPERIMENTS = ("validate-potential", "radial", "radial-sweep", "solve",
               "multiplicity", "spectrum", "morse-check")


# ----------------------------------------------------------------------
# configuration plumbing
# ----------------------------------------------------------------------

def _parse_kv(text: str) -> dict:
    """'family=annulus r_in=0.5 r_out=1' -> dict of parsed scalars."""
    out = {}
    for token in text.split():
        if "=" not in token:
            raise ConfigError(f"expected key=value, got {token!r}")
        key, val = token.split("=", 1)
        out[key] = _coerce(val)
    return out


def _coerce(val: str):
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    if val.lower() in ("true", "false"):
        return val.lower() == "true"
    return val


def load_config(path) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found")
    return {section: {k: _coerce(v) for k, v in parser[section].items()}
            for section in parser.sections()}


def _require(cfg: dict, section: str, key: str):
    try:
        return cfg[section][key]
    except KeyError:
        raise ConfigError(f"missing required field [{section}] {key}") from None


def build_potential(spec: dict) -> Potential:
    kind = spec.get("kind")
    if kind is None:
        raise ConfigError("potential spec needs kind=quartic or kind=table")
    if kind == "quartic":
        try:
            p = quartic(float(_require({"potential": spec}, "potential", "a1")),
                        float(_require({"potential": spec}, "potential", "a2")))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif kind == "table":
        csv_path = spec.get("csv")
        if not csv_path or not Path(csv_path).exists():
            raise ConfigError(f"potential table csv {csv_path!r} does not exist")
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        p = from_table(data[:, 0], data[:, 1])
    else:
        raise ConfigError(f"unknown potential kind {kind!r}")
    if spec.get("tilt"):
        p = tilt(p, float(spec["tilt"]))
    return p


def build_domain(spec: dict) -> dom_mod.GridDomain:
    spec = dict(spec)
    family = spec.pop("family", None)
    if family is None:
        raise ConfigError("domain spec needs family=...")
    h = spec.pop("h", None)
    if h is None:
        raise ConfigError("domain spec needs h=...")
    r_deform = spec.pop("r_deform", None)
    try:
        if family == "interval":
            return dom_mod.make_interval(float(spec["length"]), float(h))
        return dom_mod.make_domain(family, spec, float(h),
                                   r_deform=None if r_deform is None
                                   else float(r_deform))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid domain spec: {exc}") from None


def _floats(text) -> list:
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(tok) for tok in str(text).replace(",", " ").split()]


# ----------------------------------------------------------------------
# experiment bodies
# ----------------------------------------------------------------------

def _radial_grid_for(cert, dim, gamma, h_target):
    bounds = rad_mod.radius_bounds(cert, dim)
    r_max = max(2.0 * bounds.upper(gamma), 40.0 * h_target)
    return rad_mod.RadialGrid(dim, r_max, max(64, int(np.ceil(r_max / h_target))))


def run_validate_potential(cfg, out, render):
    p = build_potential(cfg.get("potential", {}))
    cert = certify(p)
    payload = {
        "kind": p.kind, "params": p.params,
        "s0": cert.s0, "m": cert.m, "s1crit": cert.s1crit,
        "a_plateau": cert.a_plateau, "w_minus": cert.w_minus,
        "axioms": {k: {"passed": v.passed, "detail": v.detail}
                   for k, v in cert.axiom_flags.items()},
    }
    io_mod.dump_json(payload, out / "certificate.json")
    s = np.linspace(p.sample_range[0], p.sample_range[1], 2001)
    io_mod.write_csv(out / "potential.csv", ["s", "W", "dW", "d2W"],
                     zip(s.tolist(), np.asarray(p.eval(s)).tolist(),
                         np.asarray(p.deriv(s)).tolist(),
                         np.asarray(p.deriv2(s)).tolist()))
    if render:
        plots.potential_figure(p, cert, out / "potential.png")
    return 0


def _solver_opts(cfg):
    solver = cfg.get("solver", {})
    opts = rad_mod.RadialOptions()
    if "tol" in solver:
        opts.tol = float(solver["tol"])
    if "max_iter" in solver:
        opts.max_iter = int(solver["max_iter"])
    if "mass_mode" in solver:
        opts.mass_mode = str(solver["mass_mode"])
    return opts


def run_radial(cfg, out, render):
    p = build_potential(cfg.get("potential", {}))
    cert = certify(p)
    section = cfg.get("radial", {})
    gamma = float(_require(cfg, "radial", "gamma"))
    dim = int(section.get("dim", 2))
    h_target = float(section.get("h", 0.03))
    grid = _radial_grid_for(cert, dim, gamma, h_target)
    prof = rad_mod.minimize_radial(p, cert, gamma, grid, _solver_opts(cfg))
    io_mod.save_radial_profile(prof, out / "profile.csv")
    rep = rad_mod.pohozaev_residual(prof, p)
    bounds = rad_mod.radius_bounds(cert, dim)
    io_mod.dump_json({
        "dilation_identity": {
            "lhs": rep.lhs, "rhs": rep.rhs, "residual": rep.residual,
            "scale": rep.scale, "sign_ok": rep.dilation_sign_ok,
            "potential_negative": rep.potential_negative},
        "radius_bounds": {"lower": bounds.lower(gamma),
                          "upper": bounds.upper(gamma)},
    }, out / "checks.json")
    if render:
        plots.radial_profile_figure(prof, out / "profile.png")
    return 0


def run_radial_sweep(cfg, out, render, workers):
    p = build_potential(cfg.get("potential", {}))
    cert = certify(p)
    section = cfg.get("radial", {})
    gammas = _floats(section.get("gammas", "50 100 200 400 800"))
    dim = int(section.get("dim", 2))
    h_target = float(section.get("h", 0.03))
    bounds = rad_mod.radius_bounds(cert, dim)
    opts = _solver_opts(cfg)

    def solve_one(gamma):
        grid = _radial_grid_for(cert, dim, gamma, h_target)
        prof = rad_mod.minimize_radial(p, cert, gamma, grid, opts)
        rep = rad_mod.pohozaev_residual(prof, p)
        return prof, rep

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_one, gammas))
    else:
        results = [solve_one(g) for g in gammas]

    rows = []
    for gamma, (prof, rep) in zip(gammas, results):
        rows.append([gamma, prof.energy, prof.lam, prof.support_radius,
                     bounds.lower(gamma), bounds.upper(gamma),
                     rep.residual, rep.scale])
    io_mod.write_csv(out / "sweep.csv",
                     ["gamma", "energy", "lambda", "support_radius",
                      "lower_bound", "upper_bound", "pohozaev_residual",
                      "pohozaev_scale"], rows)
    if render:
        plots.sweep_figure(gammas, [r[3] for r in rows], [r[4] for r in rows],
                           [r[5] for r in rows], [r[1] for r in rows],
                           out / "sweep.png")
    return 0


def _initial_field(cfg, domain, p, cert, V, eps, init_spec):
    if init_spec == "plateau":
        return uniform_field(domain, V)
    if init_spec.startswith("photography:"):
        coords = _floats(init_spec.split(":", 1)[1])
        gamma = V / eps ** domain.dim
        h_target = float(cfg.get("radial", {}).get("h", 0.03))
        grid = _radial_grid_for(cert, domain.dim, gamma, h_target)
        prof = rad_mod.minimize_radial(p, cert, gamma, grid)
        return mult_mod.photography(domain, prof, coords, eps)
    if init_spec.startswith("file:"):
        rec = io_mod.load_record(init_spec.split(":", 1)[1])
        return rec.field
    raise ConfigError(f"unknown init {init_spec!r} "
                      "(expected photography:x,y | plateau | file:path)")


def run_solve(cfg, out, render):
    p = build_potential(cfg.get("potential", {}))
    cert = certify(p)
    domain = build_domain(cfg.get("domain", {}))
    section = cfg.get("solve", {})
    V = float(_require(cfg, "solve", "v"))
    eps = float(_require(cfg, "solve", "eps"))
    init = _initial_field(cfg, domain, p, cert, V, eps,
                          str(section.get("init", "plateau")))
    opts = FlowOptions()
    if "tol" in section:
        opts.tol_factor = float(section["tol"])
    if "max_iter" in section:
        opts.max_iter = int(section["max_iter"])
    if V > cert.s0 * domain.area:
        # constraint volume beyond the well-bottom plateau capacity: solves
        # are allowed but the regime is outside the small-volume theory
        import warnings
        warnings.warn(f"volume {V:g} exceeds s0*|domain| = "
                      f"{cert.s0 * domain.area:g}; oversized-volume regime")
    rec = gradient_flow(init, p, V, eps, opts)
    if section.get("newton", True):
        rec = newton_refine(rec, p, eps)
    io_mod.save_record(rec, out / "solution.csv")
    io_mod.save_mask_csv(domain, out / "mask.csv")
    if render:
        plots.field_figure(rec, out / "solution.png")
        if domain.dim == 2:
            plots.domain_figure(domain, out / "domain.png")
    return 0


def run_multiplicity(cfg, out, render, workers):
    p = build_potential(cfg.get("potential", {}))
    cert = certify(p)
    domain = build_domain(cfg.get("domain", {}))
    if domain.dim != 2:
        raise ConfigError("multiplicity experiments need a 2-D domain")
    section = cfg.get("multiplicity", {})
    V = float(_require(cfg, "multiplicity", "v"))
    eps = float(_require(cfg, "multiplicity", "eps"))
    h_target = float(section.get("radial_h", 0.02))
    if "gamma_threshold" in section:
        gamma_tilde = float(section["gamma_threshold"])
    else:
        ladder = _floats(section.get("gamma_ladder",
                                     "1 2 4 8 16 32 64 128 256 512 1024"))
        sweep = rad_mod.gamma_threshold(
            p, cert, 2, gammas=ladder,
            h_target=float(section.get("ladder_h", 0.05)))
        gamma_tilde = sweep.gamma_tilde
    gamma = V / eps ** 2
    grid = _radial_grid_for(cert, 2, gamma, h_target)
    prof = rad_mod.minimize_radial(p, cert, gamma, grid)
    ref = mult_mod.RadialReference(gamma_threshold=gamma_tilde,
                                   profiles=[prof])
    pitch = section.get("seed_pitch")
    params = mult_mod.admissible(domain, cert, ref, V, eps)
    seeds = mult_mod.default_seed_lattice(
        domain, params, None if pitch in (None, "") else float(pitch))
    catalog = mult_mod.enumerate_solutions(
        domain, p, cert, V, eps, ref, seed_spec=seeds,
        use_newton=bool(section.get("newton", True)), workers=workers)

    topo = dom_mod.topology(domain)
    verdict = None
    if section.get("spectra", True):
        k = int(section.get("k_eigs", 6))
        for rec in catalog.records:
            report = spec_mod.linearized_spectrum(rec, p, eps, k=k)
            rec.morse_index = report.morse_index
            rec.nondegenerate = not report.degenerate_flag
        nondeg = [r for r in catalog.records if r.nondegenerate]
        verdict = spec_mod.morse_relation_check(
            [r.morse_index for r in nondeg], topo,
            n_below_c=sum(1 for r in nondeg if r.energy <= catalog.c_level),
            n_above_c=sum(1 for r in nondeg if r.energy > catalog.c_level))
        catalog.notes["morse_relation"] = {
            "consistent": verdict.consistent, "detail": verdict.detail,
            "q": verdict.q_coeffs,
            "n_nondegenerate": len(nondeg),
            "missing_saddles_flag": not verdict.consistent,
        }
        catalog.notes["index_range"] = spec_mod.index_range_check(
            catalog.records, topo).ok

    io_mod.save_catalog(catalog, out)
    io_mod.save_mask_csv(domain, out / "mask.csv")
    indices = sorted(r.morse_index for r in catalog.records
                     if r.morse_index is not None)
    io_mod.write_csv(out / "summary.csv",
                     ["family", "cat", "p1", "distinct_below_c",
                      "distinct_total", "morse_indices", "gamma_threshold",
                      "c_level", "failures"],
                     [[domain.family, topo.cat, topo.p1,
                       catalog.distinct_below_c, catalog.distinct_total,
                       " ".join(map(str, indices)), gamma_tilde,
                       catalog.c_level, len(catalog.failures)]])
    if render:
        plots.catalog_figure(domain, catalog, out / "catalog.png")
        plots.domain_figure(domain, out / "domain.png")
    return 0


def run_spectrum(cfg, out, render):
    section = cfg.get("spectrum", {})
    solution = section.get("solution")
    if solution and str(solution).endswith(".json"):
        solution = str(Path(solution).with_suffix(".csv"))
    if not solution or not Path(solution).exists():
        raise ConfigError(f"spectrum needs solution=<record csv or its json "
                          f"sidecar>, got {solution!r}")
    rec = io_mod.load_record(solution)
    p = build_potential(cfg.get("potential", {}))
    k = int(section.get("k", 10))
    report = spec_mod.linearized_spectrum(rec, p, rec.eps, k=k)
    payload = {
        "eigenvalues": report.eigenvalues.tolist(),
        "morse_index": report.morse_index,
        "degenerate": report.degenerate_flag,
        "tol_eig": report.tol_eig,
        "residual_max": float(report.residuals.max()),
        "method": report.method,
        "solution": str(solution),
    }
    io_mod.dump_json(payload, out / "spectrum.json")
    # append to the solution sidecar as well
    sidecar = Path(solution).with_suffix(".json")
    import json
    meta = json.loads(sidecar.read_text())
    meta["spectrum"] = payload
    io_mod.dump_json(meta, sidecar)
    if render:
        plots.spectrum_figure(report, out / "spectrum.png")
    return 0


def run_morse_check(cfg, out, render):
    section = cfg.get("morse-check", {})
    indices = [int(x) for x in _floats(_require(cfg, "morse-check", "indices"))]
    if "betti" in section:
        betti = tuple(int(x) for x in _floats(section["betti"]))
        topo = dom_mod.TopologyInfo(cat=int(section.get("cat", 2)), betti=betti,
                                    p1=sum(betti), morse_lower=2 * sum(betti) - 1)
    elif "family" in section:
        fake = {"disk": ("disk", {"radius": 1.0}),
                "annulus": ("annulus", {"r_in": 0.5, "r_out": 1.0}),
                "perturbed_annulus": ("perturbed_annulus",
                                      {"r_in": 0.5, "r_out": 1.0, "offset_x": 0.1})}
        fam = str(section["family"])
        if fam not in fake:
            raise ConfigError(f"morse-check family must be one of {list(fake)}")
        topo = dom_mod.topology(dom_mod.make_domain(*fake[fam], 0.05))
    else:
        raise ConfigError("morse-check needs betti=... or family=...")
    below = section.get("below")
    above = section.get("above")
    verdict = spec_mod.morse_relation_check(
        indices, topo,
        n_below_c=None if below is None else int(below),
        n_above_c=None if above is None else int(above))
    io_mod.dump_json({
        "indices": indices, "betti": list(topo.betti),
        "consistent": verdict.consistent, "q": verdict.q_coeffs,
        "detail": verdict.detail, "below_count_ok": verdict.below_count_ok,
        "above_count_ok": verdict.above_count_ok,
    }, out / "morse.json")
    return 0


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def _build_parser():
    ap = argparse.ArgumentParser(
        prog="dwlab",
        description="volume-constrained double-well experiments")
    ap.add_argument("kind", choices=EXPERIMENTS)
    ap.add_argument("--config", help="INI config file; flags override it")
    ap.add_argument("--out", help="output directory (default: out/<kind>)")
    ap.add_argument("--potential", help="'kind=quartic a1=1 a2=2' or 'kind=table csv=...'")
    ap.add_argument("--domain", help="'family=annulus r_in=0.5 r_out=1.0 h=0.02'")
    ap.add_argument("--V", type=float, help="constraint volume")
    ap.add_argument("--eps", type=float, help="interface scale")
    ap.add_argument("--gamma", type=float, help="radial mass parameter")
    ap.add_argument("--gammas", help="sweep list, e.g. '50 100 200 400 800'")
    ap.add_argument("--init", help="solve initialization: photography:x,y | plateau | file:path")
    ap.add_argument("--seed-pitch", type=float, help="multiplicity seed lattice pitch")
    ap.add_argument("--solution", help="record csv for the spectrum command")
    ap.add_argument("-k", type=int, help="number of eigenvalues")
    ap.add_argument("--indices", help="morse-check index multiset, e.g. '0 1 2'")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized seeding")
    ap.add_argument("--workers", type=int,
                    default=int(os.environ.get("DWLAB_WORKERS", "1")))
    ap.add_argument("--no-plots", action="store_true",
                    help="skip figure rendering")
    ap.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                    help="override a config entry")
    return ap


def _apply_overrides(cfg: dict, args) -> dict:
    if args.potential:
        cfg.setdefault("potential", {}).update(_parse_kv(args.potential))
    if args.domain:
        cfg.setdefault("domain", {}).update(_parse_kv(args.domain))
    direct = {
        ("solve", "v"): args.V, ("solve", "eps"): args.eps,
        ("multiplicity", "v"): args.V, ("multiplicity", "eps"): args.eps,
        ("radial", "gamma"): args.gamma, ("radial", "gammas"): args.gammas,
        ("solve", "init"): args.init,
        ("multiplicity", "seed_pitch"): args.seed_pitch,
        ("spectrum", "solution"): args.solution, ("spectrum", "k"): args.k,
        ("morse-check", "indices"): args.indices,
    }
    for (section, key), val in direct.items():
        if val is not None:
            cfg.setdefault(section, {})[key] = val
    for item in args.set:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        loc, val = item.split("=", 1)
        section, key = loc.split(".", 1)
        cfg.setdefault(section, {})[key] = _coerce(val)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        cfg = _apply_overrides(cfg, args)
        out = Path(args.out or cfg.get("experiment", {}).get("out",
                                                             f"out/{args.kind}"))
        out.mkdir(parents=True, exist_ok=True)
        render = not args.no_plots
        if args.kind == "validate-potential":
            status = run_validate_potential(cfg, out, render)
        elif args.kind == "radial":
            status = run_radial(cfg, out, render)
        elif args.kind == "radial-sweep":
            status = run_radial_sweep(cfg, out, render, args.workers)
        elif args.kind == "solve":
            status = run_solve(cfg, out, render)
        elif args.kind == "multiplicity":
            status = run_multiplicity(cfg, out, render, args.workers)
        elif args.kind == "spectrum":
            status = run_spectrum(cfg, out, render)
        else:
            status = run_morse_check(cfg, out, render)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except DwlabError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    echo = {"kind": args.kind, "config": cfg, "seed": args.seed,
            "plots": render}
    io_mod.write_manifest(out, config_echo=echo)
    return status


if __name__ == "__main__":
    sys.exit(main())

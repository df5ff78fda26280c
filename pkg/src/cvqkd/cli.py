"""Command-line front end.

Subcommands: rate, region, sweep, optimize, simulate, estimate, figure.
Tabular output is CSV with a '#'-prefixed JSON metadata line first; scalar
results are JSON objects embedding the same metadata.  Every header carries
the tool version, the fully resolved parameters and the seed, enough to
re-run the command exactly.

Exit codes: 0 success, 2 parameter/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__, estimate, presets, region, scenario
from .errors import CVQKDError
from .protocol import key_rate
from .scenario import Scenario, apply_overrides, load_scenario
from .simulate import (LOSS_EMULATIONS, config_metadata, read_records,
                       simulate, write_records)

OUT_DIR_ENV = "CVQKD_OUT_DIR"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        args.func(args)
        return 0
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CVQKDError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvqkd",
        description="Single-quadrature CVQKD key rates, channel maps, "
                    "simulation and estimation.")
    parser.add_argument("--version", action="version", version=f"cvqkd {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("rate", help="key rate at one channel point (worst-case T_Q)")
    _scenario_args(p)
    p.add_argument("--tq", type=float, help="fix T_Q instead of the worst-case search")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("region", help="(T_P, T_Q) security-region map as CSV")
    _scenario_args(p)
    p.add_argument("--grid-points", type=int, default=201)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("sweep", help="worst-case rate versus channel loss as CSV")
    _scenario_args(p)
    p.add_argument("--loss-grid", help="start:stop:step in dB (overrides preset grid)")
    p.add_argument("--optimize-mu", action="store_true",
                   help="re-optimise the modulation variance at every loss")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="1-D search over mu or kappa_p")
    _scenario_args(p)
    p.add_argument("--variable", choices=("mu", "kappa_p"), default="mu")
    p.add_argument("--bounds", help="lo:hi search bounds")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="generate prepare-and-measure samples")
    _scenario_args(p)
    p.add_argument("--tq", type=float, help="simulated T_Q (default: symmetric, = T_P)")
    p.add_argument("--format", choices=("csv", "ndjson"), default="csv")
    p.add_argument("--loss-emulation", choices=LOSS_EMULATIONS, default="channel")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="channel parameters from recorded samples")
    _scenario_args(p)
    p.add_argument("--data", required=True, help="transmission-run record file")
    p.add_argument("--calibration", required=True, help="unit-transmission record file")
    p.add_argument("--vacuum", required=True, help="vacuum record file")
    p.add_argument("--rate", action="store_true",
                   help="also evaluate the worst-case key rate from the estimates")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("figure", help="emit the CSV data bundle for a figure preset")
    p.add_argument("name", choices=("fig2a", "fig2b", "fig3a", "fig3b", "fig4a",
                                    "fig4b", "fig5", "fig6a", "fig6b"))
    p.add_argument("--grid-points", type=int, default=201, help="region grid (fig2)")
    p.add_argument("--out", help="output directory (default $CVQKD_OUT_DIR or .)")
    p.set_defaults(func=cmd_figure)
    return parser


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(presets.PRESETS))
    p.add_argument("--scenario", help="INI scenario file")
    p.add_argument("--loss-db", type=float)
    p.add_argument("--distance-km", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--kappa-p", type=float)
    p.add_argument("--kappa-q", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--wp", type=float)
    p.add_argument("--wq", type=float)
    p.add_argument("--detection", choices=("homodyne", "heterodyne"))
    p.add_argument("--reconciliation", choices=("direct", "reverse"))
    p.add_argument("--modulation", choices=("single", "dual"))
    p.add_argument("--switch-prob-p", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--out", help="output file (default: stdout)")


def _resolve(args) -> Scenario:
    if args.scenario:
        base = load_scenario(args.scenario)
    elif args.preset:
        base = presets.get_preset(args.preset)
    elif args.mu is not None:
        base = Scenario(name="custom", source=_default_source(args),
                        config=_default_config())
    else:
        raise ValueError("provide --preset, --scenario or at least --mu")
    loss_db = args.loss_db
    if loss_db is None and args.distance_km is not None:
        loss_db = args.distance_km * presets.DB_PER_KM
    return apply_overrides(
        base, mu=args.mu, kappa_p=args.kappa_p, kappa_q=args.kappa_q, eta=args.eta,
        beta=args.beta, detection=args.detection, reconciliation=args.reconciliation,
        modulation=args.modulation, switch_prob_p=args.switch_prob_p,
        w_p=args.wp, w_q=args.wq, loss_db=loss_db)


def _default_source(args):
    from .protocol import SourceParams
    return SourceParams(mu=args.mu)


def _default_config():
    from .protocol import ProtocolConfig
    return ProtocolConfig()


def _meta(args, sc: Scenario, command: str, extra: dict | None = None) -> dict:
    meta = {
        "tool": "cvqkd",
        "version": __version__,
        "command": command,
        "scenario": sc.name,
        "source": dataclasses.asdict(sc.source),
        "config": dataclasses.asdict(sc.config),
        "w_p": sc.w_p,
        "w_q": sc.w_q,
    }
    if sc.t_p is not None:
        meta["t_p"] = sc.t_p
    if getattr(args, "seed", None) is not None:
        meta["seed"] = args.seed
    meta.update(extra or {})
    return meta


def _open_out(args):
    if getattr(args, "out", None):
        return open(args.out, "w"), True
    return sys.stdout, False


def _emit_json(args, obj: dict) -> None:
    fh, close = _open_out(args)
    try:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    finally:
        if close:
            fh.close()


def _emit_csv(args, meta: dict, columns, rows) -> None:
    fh, close = _open_out(args)
    try:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    finally:
        if close:
            fh.close()


def _cell(v) -> str:
    if isinstance(v, float):
        return "%.12g" % v
    return str(v)


def _require_t_p(sc: Scenario) -> float:
    if sc.t_p is None:
        raise ValueError("a channel point is needed: pass --loss-db or --distance-km")
    return sc.t_p


# -- commands ----------------------------------------------------------------

def cmd_rate(args) -> None:
    sc = _resolve(args)
    t_p = _require_t_p(sc)
    t_q = args.tq if args.tq is not None else sc.t_q
    extra = {}
    if sc.config.modulation == "dual":
        t_q_used = t_p if t_q is None else t_q
    elif t_q is None:
        wc = region.worst_case_rate(sc.source, t_p, sc.w_p, sc.w_q, sc.config)
        t_q_used = wc.t_q_star
        extra = {"t_q_star": wc.t_q_star, "boundary_hit": wc.boundary_hit}
    else:
        t_q_used = t_q
    result = key_rate(sc.source, sc.channel_at(t_p, t_q_used), sc.config)
    _emit_json(args, {
        "meta": _meta(args, sc, "rate", {"t_p": t_p, "t_q": t_q_used, **extra}),
        "rate_bits_per_symbol": result.rate,
        "mutual_info_bits": result.mutual_info,
        "holevo_bits": result.holevo,
        "positive": result.rate > 0.0,
        "loss_db": region.transmission_to_loss_db(t_p),
        "distance_km": region.transmission_to_loss_db(t_p) / presets.DB_PER_KM,
    })


def cmd_region(args) -> None:
    sc = _resolve(args)
    n = args.grid_points
    rm = region.map_region(sc.source, sc.w_p, sc.w_q, sc.config, n=n)
    rows = []
    for i, t_p in enumerate(rm.grid_t_p):
        for j, t_q in enumerate(rm.grid_t_q):
            rows.append((float(t_p), float(t_q), int(rm.physical[i, j]),
                         float(rm.rate[i, j])))
    _emit_csv(args, _meta(args, sc, "region", {"grid_points": n}),
              ("t_p", "t_q", "physical", "rate"), rows)


def _loss_grid(args, sc: Scenario):
    if getattr(args, "loss_grid", None):
        return scenario.parse_grid(args.loss_grid)
    if sc.loss_grid_db:
        return sc.loss_grid_db
    if sc.t_p is not None:
        return (region.transmission_to_loss_db(sc.t_p),)
    raise ValueError("no loss grid: pass --loss-grid or use a preset with one")


def cmd_sweep(args) -> None:
    sc = _resolve(args)
    grid = _loss_grid(args, sc)
    points = region.sweep_loss(grid, sc.source, sc.w_p, sc.w_q, sc.config,
                               db_per_km=presets.DB_PER_KM,
                               optimize_modulation=args.optimize_mu)
    rows = [(p.loss_db, p.distance_km, p.mu, p.rate) for p in points]
    meta = _meta(args, sc, "sweep", {"optimize_mu": bool(args.optimize_mu),
                                     "db_per_km": presets.DB_PER_KM})
    _emit_csv(args, meta, ("loss_db", "distance_km", "mu", "rate"), rows)


def cmd_optimize(args) -> None:
    sc = _resolve(args)
    t_p = _require_t_p(sc)
    loss_db = region.transmission_to_loss_db(t_p)
    bounds = None
    if args.bounds:
        lo, hi = (float(x) for x in args.bounds.split(":"))
        bounds = (lo, hi)
    if args.variable == "mu":
        opt = region.optimize_mu(loss_db, sc.w_p, sc.w_q, sc.config, sc.source,
                                 bounds=bounds or (1.0001, 10000.0))
    else:
        opt = region.optimize_kappa_p(loss_db, sc.w_p, sc.w_q, sc.config, sc.source,
                                      bounds=bounds or (0.0, 50.0))
    _emit_json(args, {
        "meta": _meta(args, sc, "optimize", {"variable": args.variable,
                                             "loss_db": loss_db}),
        "argmax": opt.argmax,
        "rate_bits_per_symbol": opt.rate,
        "boundary_hit": opt.boundary_hit,
        "unimodal": opt.unimodal,
    })


def cmd_simulate(args) -> None:
    sc = _resolve(args)
    t_p = _require_t_p(sc)
    cfg = sc.sim_config(t_p, n_samples=args.samples, seed=args.seed, t_q=args.tq,
                        loss_emulation=args.loss_emulation)
    records = simulate(cfg)
    meta = config_metadata(cfg)
    meta.update({"tool": "cvqkd", "version": __version__, "scenario": sc.name})
    fh, close = _open_out(args)
    try:
        write_records(fh, records, meta=meta, fmt=args.format)
    finally:
        if close:
            fh.close()


def cmd_estimate(args) -> None:
    sc = _resolve(args) if (args.preset or args.scenario or args.mu is not None) else None
    data, _ = read_records(args.data)
    cal, _ = read_records(args.calibration)
    vac, _ = read_records(args.vacuum)
    out = {"meta": {"tool": "cvqkd", "version": __version__, "command": "estimate",
                    "data": args.data, "calibration": args.calibration,
                    "vacuum": args.vacuum}}
    if args.rate:
        config = sc.config if sc else _default_config()
        res = estimate.end_to_end_rate_from_data(data, cal, vac, config)
        est = res.estimate
        out["rate"] = {
            "rate_bits_per_symbol": res.rate_result.rate,
            "mutual_info_bits": res.rate_result.mutual_info,
            "holevo_bits": res.rate_result.holevo,
            "t_q_star": res.worst_case.t_q_star,
        }
    else:
        est = estimate.estimate_channel(data, cal, vac)
    out["estimate"] = {
        "t_p_hat": est.t_p_hat, "w_p_hat": est.w_p_hat, "w_q_hat": est.w_q_hat,
        "kappa_p_hat": est.kappa_p_hat, "kappa_q_hat": est.kappa_q_hat,
        "i_hat": est.i_hat, "mu_hat": est.mu_hat, "n_used": est.n_used,
        "w_p_clamped": est.w_p_clamped, "w_q_clamped": est.w_q_clamped,
        "standard_errors": est.standard_errors,
    }
    _emit_json(args, out)


# -- figure bundles ----------------------------------------------------------

def cmd_figure(args) -> None:
    out_dir = args.out or os.environ.get(OUT_DIR_ENV, ".")
    os.makedirs(out_dir, exist_ok=True)
    name = args.name
    paths = FIGURES[name](name, out_dir, args)
    for p in paths:
        print(p)


def _figure_csv(path, meta, columns, rows) -> None:
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _fig_meta(sc: Scenario, name: str, extra=None) -> dict:
    meta = {"tool": "cvqkd", "version": __version__, "command": f"figure {name}",
            "scenario": sc.name, "source": dataclasses.asdict(sc.source),
            "config": dataclasses.asdict(sc.config), "w_p": sc.w_p, "w_q": sc.w_q,
            "db_per_km": presets.DB_PER_KM}
    meta.update(extra or {})
    return meta


def _figure_region(name, out_dir, args):
    sc = presets.get_preset(name)
    rm = region.map_region(sc.source, sc.w_p, sc.w_q, sc.config, n=args.grid_points)
    rows = [(float(tp), float(tq), int(rm.physical[i, j]), float(rm.rate[i, j]))
            for i, tp in enumerate(rm.grid_t_p) for j, tq in enumerate(rm.grid_t_q)]
    path = os.path.join(out_dir, f"{name}_region.csv")
    _figure_csv(path, _fig_meta(sc, name, {"grid_points": args.grid_points}),
                ("t_p", "t_q", "physical", "rate"), rows)
    return [path]


def _figure_optimized_sweep(name, out_dir, args):
    sc = presets.get_preset(name)
    rows = []
    for modulation in ("single", "dual"):
        for detection in ("homodyne", "heterodyne"):
            config = dataclasses.replace(sc.config, modulation=modulation,
                                         detection=detection)
            pts = region.sweep_loss(sc.loss_grid_db, sc.source, sc.w_p, sc.w_q,
                                    config, db_per_km=presets.DB_PER_KM,
                                    optimize_modulation=True)
            rows += [(modulation, detection, p.loss_db, p.distance_km, p.mu, p.rate)
                     for p in pts]
    path = os.path.join(out_dir, f"{name}_rate_vs_loss.csv")
    _figure_csv(path, _fig_meta(sc, name, {"optimize_mu": True}),
                ("modulation", "detection", "loss_db", "distance_km", "mu_opt", "rate"),
                rows)
    return [path]


def _figure_kappa_robustness(name, out_dir, args):
    sc = presets.get_preset(name)
    rows = []
    for loss_db in presets.FIG4_LOSS_DB_GRID:
        t_p = region.loss_db_to_transmission(loss_db)
        for kappa_p in presets.FIG4_KAPPA_P_GRID:
            source = dataclasses.replace(sc.source, kappa_p=kappa_p)
            try:
                wc = region.worst_case_rate(source, t_p, sc.w_p, sc.w_q, sc.config)
                rate = wc.rate_at_star
            except CVQKDError:
                rate = float("nan")
            rows.append((loss_db, loss_db / presets.DB_PER_KM, kappa_p, rate))
    path = os.path.join(out_dir, f"{name}_rate_vs_kappa_p.csv")
    _figure_csv(path, _fig_meta(sc, name),
                ("loss_db", "distance_km", "kappa_p", "rate"), rows)
    return [path]


def _figure_experiment_heterodyne(name, out_dir, args):
    sc = presets.get_preset(name)
    rows = []
    for beta in presets.FIG5_BETAS:
        for modulation in ("single", "dual"):
            config = dataclasses.replace(sc.config, beta=beta, modulation=modulation)
            pts = region.sweep_loss(sc.loss_grid_db, sc.source, sc.w_p, sc.w_q,
                                    config, db_per_km=presets.DB_PER_KM)
            rows += [(beta, modulation, p.loss_db, p.distance_km, p.rate) for p in pts]
    path = os.path.join(out_dir, f"{name}_rate_vs_distance.csv")
    _figure_csv(path, _fig_meta(sc, name, {"betas": list(presets.FIG5_BETAS)}),
                ("beta", "modulation", "loss_db", "distance_km", "rate"), rows)
    return [path]


def _figure_experiment_homodyne(name, out_dir, args):
    sc = presets.get_preset(name)
    rows = []
    for kappa_p in presets.FIG6_KAPPA_P_LEVELS:
        w_p = presets.fig6_w_p(kappa_p)
        source = dataclasses.replace(sc.source, kappa_p=kappa_p)
        pts = region.sweep_loss(sc.loss_grid_db, source, w_p, sc.w_q, sc.config,
                                db_per_km=presets.DB_PER_KM)
        rows += [(kappa_p, w_p, p.loss_db, p.distance_km, p.rate) for p in pts]
    path = os.path.join(out_dir, f"{name}_rate_vs_distance.csv")
    _figure_csv(path, _fig_meta(sc, name,
                                {"kappa_p_levels": list(presets.FIG6_KAPPA_P_LEVELS)}),
                ("kappa_p", "w_p", "loss_db", "distance_km", "rate"), rows)
    return [path]


FIGURES = {
    "fig2a": _figure_region,
    "fig2b": _figure_region,
    "fig3a": _figure_optimized_sweep,
    "fig3b": _figure_optimized_sweep,
    "fig4a": _figure_kappa_robustness,
    "fig4b": _figure_kappa_robustness,
    "fig5": _figure_experiment_heterodyne,
    "fig6a": _figure_experiment_homodyne,
    "fig6b": _figure_experiment_homodyne,
}


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``python -m onsetfbp <subcommand> --config FILE``.

Exit codes: 0 success, 1 solver failure, 2 usage error or missing config,
3 invalid config.
"""
import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io, parallel
from .config import ConfigError, load_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# subcommands; each returns (files written, manifest extras)
# ---------------------------------------------------------------------------

def _field_path(out, name, cfg):
    return out / (name + (".csv" if cfg.format == "csv" else ".bin"))


def cmd_solve(cfg, out):
    from .coupling import contraction_summary, decomposition_report, solve_fbp
    from .verify import residual_transformed_system

    xg, yg, tg = cfg.grids()
    g = cfg.g_field(xg)
    state = solve_fbp(g, xg, yg, tg, eps=cfg.eps, tol=cfg.tol, max_outer=cfg.max_outer,
                      scheme=cfg.scheme, elliptic_method=cfg.elliptic,
                      guard_radius=cfg.guard_radius, max_retries=cfg.max_retries)
    times = np.asarray(state.u.times)
    head = io.grid_header(xg, yg, tg, times=times, eps=cfg.eps, T_used=state.T)
    files = []
    for name, arr in (("u", state.u.values), ("s", state.s.values), ("sdot", state.s.dot_values),
                      ("R_D_g", state.wD), ("R_N_H", state.wN), ("v", state.v)):
        files.append(io.write_field(_field_path(out, name, cfg), arr, dict(head, quantity=name), cfg.format))
    with io.JsonLinesLog(out / "iterations.jsonl") as log:
        for rec in state.log:
            log.write(rec)
    files.append(out / "iterations.jsonl")
    try:
        slopes = decomposition_report(state)
    except ValueError as exc:
        slopes = {"error": str(exc)}
    sd = np.asarray(state.s.dot_values)
    k = min(4, len(times))
    sdot0 = np.polyfit(times[:k], sd[:k].reshape(k, -1), min(2, k - 1))[-1]
    report = {
        "converged": state.converged,
        "T": state.T,
        "retries": state.retries,
        "outer_ratios": state.outer_ratios,
        "inner_ratios": state.inner_ratios,
        "contraction": contraction_summary(state),
        "decomposition_slopes": slopes,
        "residuals": residual_transformed_system(state),
        "sdot_t0_extrapolated_error": float(np.max(np.abs(sdot0 - g.ravel()))),
    }
    files.append(io.write_json(out / "report.json", report))
    files.append(io.write_tidy_csv(out / "plot_data.csv", times, xg,
                                   {"s": state.s.values, "sdot": sd, "trace": state.u.trace(1)}))
    extra = {"tolerances": {"outer": cfg.tol, "inner": 0.1 * cfg.tol},
             "iterations": {"outer": len(state.outer_diffs),
                            "inner": [len(r) + 1 for r in state.inner_ratios]},
             "contraction_ratios": {"outer": state.outer_ratios,
                                    "inner_max": report["contraction"]["inner_max"]},
             "converged": state.converged}
    return files, extra


def cmd_solve_elliptic(cfg, out):
    from .elliptic import EllipticProblem, solve, solve_variable
    from .verify import MAX_X_POINTS, MAX_Y_POINTS, dense_oracle_elliptic

    xg, yg, _ = cfg.grids()
    x1 = xg.coords[0]
    c = cfg.c0 + cfg.c_amp * np.sin(x1)
    g = cfg.dirichlet * (1 + np.cos(x1)) / 2
    h = cfg.neumann * np.cos(x1)
    y = yg.nodes
    f = cfg.source * np.sin(x1)[..., None] * (y * (1 - y))
    pr = EllipticProblem(xg, yg, cfg.t, c, f=f, g=g, h=h)
    report = {"method": cfg.elliptic, "t": cfg.t}
    if cfg.elliptic == "localized":
        u, loc = solve_variable(pr)
        report["localization"] = {"sweeps": loc.sweeps, "residuals": loc.residuals,
                                  "contraction": loc.contraction, "patches": loc.patches,
                                  "converged": loc.converged}
    else:
        u = solve(pr, cfg.elliptic)
    report["residual_sup"] = float(np.max(np.abs(pr.residual(u))))
    if np.prod(xg.shape) <= MAX_X_POINTS and yg.m <= MAX_Y_POINTS and cfg.elliptic != "oracle":
        ref = dense_oracle_elliptic(pr)
        report["oracle_rel_error"] = float(np.max(np.abs(u - ref)) / max(np.max(np.abs(ref)), 1e-300))
    head = io.grid_header(xg, yg, None, t=cfg.t, quantity="u")
    files = [io.write_field(_field_path(out, "u", cfg), u, head, cfg.format),
             io.write_json(out / "report.json", report)]
    rows = {"u_bottom": u[..., 0][None], "u_mid": u[..., yg.size // 2][None], "u_top": u[..., -1][None]}
    files.append(io.write_tidy_csv(out / "plot_data.csv", [cfg.t], xg, rows))
    return files, {"residual_sup": report["residual_sup"]}


def _velocity(cfg, xg):
    from .hamilton_jacobi import ClosedFormVelocity, SampledVelocity
    if cfg.velocity == "constant":
        return ClosedFormVelocity.constant(1.0)
    if cfg.velocity == "sine":
        return ClosedFormVelocity.stationary_sine(cfg.v_amp, 1.0)
    values, head = io.read_field(cfg._resolve(cfg.velocity))
    if "times" not in head:
        raise ConfigError(f"{cfg.where('velocity')} velocity: field file has no time levels")
    return SampledVelocity(xg, head["times"], values.reshape((len(head["times"]),) + xg.shape))


def cmd_hj_solve(cfg, out):
    from .hamilton_jacobi import hj_residual, hj_solve

    xg, _, tg = cfg.grids()
    v = _velocity(cfg, xg)
    times = np.asarray(tg.levels)
    res = hj_solve(v, xg, times, substeps=cfg.substeps)
    head = io.grid_header(xg, None, tg, times=times)
    files = [io.write_field(_field_path(out, "s", cfg), res.surface.values, dict(head, quantity="s"), cfg.format),
             io.write_field(_field_path(out, "sdot", cfg), res.surface.dot_values,
                            dict(head, quantity="sdot"), cfg.format)]
    report = {"jacobian_defect_max": float(np.max(res.flow.jacobian_defect)),
              "residual_sup": hj_residual(res, v),
              "s_min": float(np.min(res.surface.values)), "s_max": float(np.max(res.surface.values))}
    files.append(io.write_json(out / "report.json", report))
    files.append(io.write_tidy_csv(out / "plot_data.csv", times, xg,
                                   {"s": res.surface.values, "sdot": res.surface.dot_values}))
    return files, report


def cmd_verify_symbols(cfg, out):
    from .grids import YGrid
    from .symbols import decay_exponents, eval_symbol_a, symbol_relation_errors

    yg = YGrid(cfg.m)
    rel = {float(x): symbol_relation_errors(x, yg) for x in cfg.xi}
    decay = decay_exponents(YGrid(max(cfg.m, 255)))
    report = {"m": cfg.m, "h": yg.h, "relation_errors": rel,
              "sup_a": {float(x): float(np.max(eval_symbol_a(x, yg.nodes))) for x in cfg.xi},
              "a_at_0": {float(x): float(eval_symbol_a(x, 0.0)) for x in cfg.xi},
              "decay": decay}
    files = [io.write_json(out / "symbols.json", report)]
    path = out / "symbol_data.csv"
    with open(path, "w") as fh:
        fh.write("xi,quantity,value\n")
        for x, errs in rel.items():
            for k, v in errs.items():
                fh.write(f"{x!r},{k},{v!r}\n")
        for x, r, d in zip(decay["xi"], decay["resolvent_norms"], decay["dxi_a_sup"]):
            fh.write(f"{x!r},resolvent_norm,{r!r}\n{x!r},dxi_a_sup,{d!r}\n")
    files.append(path)
    return files, {"resolvent_slope": decay["resolvent_slope"], "dxi_a_slope": decay["dxi_a_slope"]}


def cmd_verify_operators(cfg, out):
    from .parabolic import GeneratorFamily, derivative_formula_check, verify_maxreg_hypotheses

    xg, yg, _ = cfg.grids()
    x1 = xg.coords[0]
    c = cfg.c0 + cfg.c_amp * np.sin(x1)
    fam = GeneratorFamily(xg, yg, c=c)
    hyp = verify_maxreg_hypotheses(fam, cfg.t_samples, n_triples=cfg.n_triples, seed=cfg.seed)
    deriv = derivative_formula_check(fam, cfg.t, 1 + 0.5 * np.cos(x1), np.sin(x1))
    report = {"maxreg": hyp, "boundary_derivatives": deriv}
    files = [io.write_json(out / "operators.json", report)]
    return files, {"inverse_slope": hyp["inverse_slope"], "triple_ratio_max": hyp["triple_ratio_max"],
                   "derivative_rel_errors": deriv}


COMMANDS = {
    "solve": cmd_solve,
    "solve-elliptic": cmd_solve_elliptic,
    "hj-solve": cmd_hj_solve,
    "verify-symbols": cmd_verify_symbols,
    "verify-operators": cmd_verify_operators,
}


def cmd_norms(args):
    from .sh_spaces import HolderParams, singular_holder_norm

    values, head = io.read_field(args.field)
    if "times" not in head:
        print(f"error: {args.field} has no time levels in its header", file=sys.stderr)
        return EXIT_FAIL
    params = HolderParams(args.beta, args.beta if args.weighted else 0.0)
    rep = singular_holder_norm(values, head["times"], params)
    record = rep.to_json(head.get("quantity", Path(args.field).stem))
    text = json.dumps(io._plain(record), sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="onsetfbp", description="Free-boundary onset solver and verification tools")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="key = value configuration file")
        sp.add_argument("--out", default=None, help="output directory (default out/<command>)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for level-parallel work")
        sp.add_argument("--format", choices=("binary", "csv"), default=None, help="override field format")
    sp = sub.add_parser("norms")
    sp.add_argument("--field", required=True, help="time-indexed field file")
    sp.add_argument("--beta", type=float, default=0.5)
    sp.add_argument("--weighted", action="store_true", help="use the singular norm sup|u| + [t^beta u]_beta")
    sp.add_argument("--out", default=None, help="also write the JSON record here")
    sp.add_argument("--threads", type=int, default=1)
    return p


def run_cli(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    parallel.set_threads(args.threads)
    if args.command == "norms":
        if not Path(args.field).is_file():
            print(f"error: field file not found: {args.field}", file=sys.stderr)
            return EXIT_USAGE
        try:
            return cmd_norms(args)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAIL
    if not Path(args.config).is_file():
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        if args.format:
            cfg.format = args.format
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or Path("out") / args.command)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        files, extra = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"error: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    wall = time.perf_counter() - start
    io.write_manifest(out, files, cfg, wall, args.command, dict(extra, threads=args.threads))
    print(f"{args.command}: wrote {len(files) + 1} files to {out} in {wall:.2f} s")
    return EXIT_OK


def main():
    sys.exit(run_cli())

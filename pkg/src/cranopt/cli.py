"""Command line entry point ``cranopt``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import benchmarks, harness, multi, quantizer
from . import single_link as sl
from .model import QuantModel, Scenario, ScenarioError, SolveReport

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        if "-" in part.strip()[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part.strip():
            out.append(int(part))
    return out


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    g.add_argument("--eps", type=float, default=sl.DEFAULT_EPS,
                   help="relative convergence tolerance (default 1e-6)")
    g.add_argument("--max-iter", type=int, default=sl.DEFAULT_MAX_ITER,
                   help="iteration cap (default 500)")
    g.add_argument("--out", default="-", help="output path, '-' for stdout")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    return p


def _scenario_args(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="scenario JSON file")
    src.add_argument("--preset", choices=sorted(harness.PRESETS), help="built-in scenario")
    p.add_argument("--fronthaul-mbps", type=float,
                   help="override every RRH's fronthaul capacity")


def _load(args) -> Scenario:
    if args.scenario:
        scn = harness.load_scenario(args.scenario)
    else:
        scn = harness.generate_scenario(harness.preset(args.preset), args.seed)
    cap = getattr(args, "per_rrh_capacity", None)
    if cap is not None:
        caps = _floats(cap)
        if len(caps) not in (1, scn.num_rrhs):
            raise ScenarioError(f"--per-rrh-capacity needs 1 or {scn.num_rrhs} values")
        scn = scn.with_fronthaul(np.asarray(caps) * 1e6)
    elif args.fronthaul_mbps is not None:
        scn = scn.with_fronthaul(args.fronthaul_mbps * 1e6)
    return scn


def _allocation_rows(scn: Scenario, rep: SolveReport) -> list[dict]:
    rows = []
    p_sc = rep.power.per_subcarrier()
    for m in range(scn.num_rrhs):
        for n in range(scn.num_subcarriers):
            row = {"rrh": m + 1, "subcarrier": n + 1, "user": int(scn.sc_owner[n]) + 1,
                   "power_w": p_sc[n], "fronthaul_bps": rep.fronthaul.t[m, n]}
            if rep.fronthaul.integer_bits:
                row["bits"] = int(rep.fronthaul.bits[m, n])
            rows.append(row)
    return rows


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _emit(args, text: str):
    if args.out == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(args.out, "w") as fh:
            fh.write(text)


def _emit_report(args, scn: Scenario, rep: SolveReport):
    if args.format == "csv":
        _emit(args, _csv(_allocation_rows(scn, rep)))
    else:
        doc = rep.to_dict()
        doc["spectral_efficiency"] = rep.spectral_efficiency(scn)
        if scn.is_single_link:
            doc["cutset_bound_bps_per_hz"] = sl.cutset_bound(scn)
        _emit(args, json.dumps(doc, indent=1))


def _integer(args) -> bool:
    return args.fronthaul_model == "integer"


def cmd_solve_p1_single(args):
    scn = _load(args)
    _emit_report(args, scn, sl.algorithm_one(scn, args.eps, args.max_iter))


def cmd_solve_p2_single(args):
    scn = _load(args)
    rep = sl.solve_p2_single(scn, args.eps, args.max_iter, integer=_integer(args))
    _emit_report(args, scn, rep)


def cmd_solve_p1(args):
    scn = _load(args)
    _emit_report(args, scn, multi.algorithm_three(scn, args.eps, args.max_iter))


def cmd_solve_p2(args):
    scn = _load(args)
    rep = multi.solve_p2_multi(scn, args.eps, args.max_iter, integer=_integer(args))
    _emit_report(args, scn, rep)


def cmd_benchmark(args):
    scn = _load(args)
    model = QuantModel(args.model)
    schemes = list(benchmarks.BenchmarkScheme) if args.scheme == "all" else \
        [benchmarks.BenchmarkScheme(args.scheme)]
    grid = _floats(args.grid) if args.grid else [float(c) / 1e6 for c in scn.fronthaul_cap[:1]]
    rows, reports = [], {}
    for cap in grid:
        s = scn.with_fronthaul(cap * 1e6) if args.grid else scn
        for scheme in schemes:
            rep = benchmarks.run_benchmark(scheme, s, model, args.eps, args.max_iter,
                                           association=args.association)
            rows.append({"scheme": scheme.value, "model": model.value, "fronthaul_mbps": cap,
                         "objective_bps": rep.objective_bps,
                         "spectral_efficiency": rep.spectral_efficiency(s)})
            reports[f"{scheme.value}|{cap:g}"] = rep.to_dict()
    if args.format == "csv":
        _emit(args, _csv(rows))
    else:
        _emit(args, json.dumps({"rows": rows, "reports": reports}, indent=1))


def cmd_sweep(args):
    template = harness.preset(args.preset)
    seeds = _ints(args.seeds) if args.seeds else [args.seed]
    result = harness.run_sweep(template, args.solvers.split(","), _floats(args.grid), seeds,
                               args.eps, args.max_iter, keep_reports=args.format == "json")
    if args.average:
        rows = result.averaged()
        text = _csv(rows) if args.format == "csv" else json.dumps({"rows": rows}, indent=1)
    else:
        text = result.to_csv() if args.format == "csv" else result.to_json()
    _emit(args, text)
    failed = [r for r in result.rows if r["error"]]
    for r in failed:
        print(f"cell {r['cell']} failed: {r['error']}", file=sys.stderr)


def cmd_quantizer_validate(args):
    rows = []
    for d in _ints(args.bits):
        for s in _floats(args.power):
            est = quantizer.monte_carlo_noise_power(s, d, args.samples, args.seed)
            rows.append({"D": d, "S": s, "analytic_q": quantizer.analytic_noise_power(s, d),
                         "empirical_q": est.empirical_q, "total_q": est.total_q,
                         "overflow_rate": est.overflow_rate, "seed": args.seed})
    _emit(args, _csv(rows) if args.format == "csv" else json.dumps(rows, indent=1))


def cmd_gen_scenario(args):
    scn = harness.generate_scenario(harness.preset(args.preset), args.seed)
    if args.fronthaul_mbps is not None:
        scn = scn.with_fronthaul(args.fronthaul_mbps * 1e6)
    _emit(args, json.dumps(harness.scenario_to_dict(scn), indent=1))


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="cranopt", parents=[common],
        description="Joint power and fronthaul allocation for uplink OFDMA C-RAN.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, scenario=True):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        if scenario:
            _scenario_args(p)
        p.set_defaults(func=func)
        return p

    add("solve-p1-single", cmd_solve_p1_single,
        "Gaussian test channel, one user and one RRH (alternating closed forms)")
    for name, func, help_ in (
            ("solve-p2-single", cmd_solve_p2_single, "uniform quantizer, one user and one RRH"),
            ("solve-p2", cmd_solve_p2, "uniform quantizer, K users and M RRHs")):
        p = add(name, func, help_)
        p.add_argument("--fronthaul-model", choices=("continuous", "integer"), default="integer",
                       help="integer: bits per sample are integers (default); "
                            "continuous: relaxed rates")
        if name == "solve-p2":
            p.add_argument("--per-rrh-capacity", help="comma-separated Mbps, one or M values")
    p = add("solve-p1", cmd_solve_p1, "Gaussian test channel, K users and M RRHs")
    p.add_argument("--per-rrh-capacity", help="comma-separated Mbps, one or M values")

    p = add("benchmark", cmd_benchmark, "run the comparison schemes")
    p.add_argument("--scheme", default="all",
                   choices=["all"] + [s.value for s in benchmarks.BenchmarkScheme])
    p.add_argument("--model", default="gaussian", choices=[m.value for m in QuantModel])
    p.add_argument("--grid", help="comma-separated fronthaul capacities in Mbps")
    p.add_argument("--association", default="gain", choices=("gain", "distance"),
                   help="serving-RRH rule for conventional OFDMA")

    p = add("sweep", cmd_sweep, "sweep solvers over fronthaul capacity", scenario=False)
    p.add_argument("--preset", required=True, choices=sorted(harness.PRESETS))
    p.add_argument("--solvers", default="p1,p2",
                   help="comma-separated ids: " + ", ".join(sorted(harness.SOLVERS)))
    p.add_argument("--grid", required=True, help="comma-separated capacities in Mbps")
    p.add_argument("--seeds", help="seed list, e.g. 0-9 or 1,4,7 (default: --seed)")
    p.add_argument("--average", action="store_true", help="average over seeds")

    p = add("quantizer-validate", cmd_quantizer_validate,
            "Monte Carlo check of the quantizer noise model", scenario=False)
    p.add_argument("--bits", default="4-10", help="bit depths, e.g. 4-10 or 1,2,8")
    p.add_argument("--power", default="0.1,1,10", help="signal powers in W")
    p.add_argument("--samples", type=int, default=10**6)

    p = add("gen-scenario", cmd_gen_scenario, "write a preset scenario as JSON", scenario=False)
    p.add_argument("--preset", required=True, choices=sorted(harness.PRESETS))
    p.add_argument("--fronthaul-mbps", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ScenarioError, FileNotFoundError) as exc:
        print(f"cranopt: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # anything else is a bug or numerical failure
        print(f"cranopt: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

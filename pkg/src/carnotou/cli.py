"""Command-line front end.

Five subcommands: constants (curvature and rate constants as JSON),
check (run a scenario's inequality checks), decay (variance or entropy
curve against its bound as CSV), distance (point distances and moment
estimates), simulate (sample an ensemble to CSV).  Structured output is
JSON, curves and summaries are RFC-4180 CSV, and report paths render
companion PNG figures next to the delimited files when --out is given.

Exit codes: 0 success, 1 at least one violated check, 2 validation
error (bad spec, bad scenario, unsorted times, missing seed), 130 when
interrupted with partial results flushed.  Validation errors print a
machine-readable {"error": {"code", "message"}} object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .checks import (
    check_entropy_decay,
    check_l2_decay,
    check_variance_decay_integral,
    run_checks,
)
from .constants import (
    carnot_ou_constants,
    harnack_coefficient,
    lambda_eps,
    optimal_eps_for_time,
    prefactor_C,
)
from .distance import (
    HeavyTailWarning,
    distance,
    estimate_D2_interval,
    estimate_exp_integrability,
)
from .errors import CarnotouError
from .group import Point, heisenberg, load_group_spec
from .plots import save_decay_figure, save_ensemble_figure, save_slack_figure
from .reports import CSV_HEADER, VIOLATED, report_csv_row, report_to_dict
from .simulate import SimConfig, sample_heat, sample_invariant

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_INVALID = 2
EXIT_INTERRUPTED = 130


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _resolve_spec(value, base: Path | None = None):
    if value is None or value == "heisenberg":
        return heisenberg()
    if isinstance(value, dict):
        return load_group_spec(value)
    p = Path(value)
    if base is not None and not p.is_absolute() and not p.exists():
        rel = base / p
        if rel.exists():
            p = rel
    return load_group_spec(p)


def _floats(text: str) -> np.ndarray:
    return np.asarray([float(v) for v in text.split(",") if v.strip() != ""])


def _require_seed(args) -> int:
    if args.seed is None:
        raise CarnotouError("a seed is required; pass --seed")
    return int(args.seed)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _estimate_dict(e) -> dict:
    return {"mean": e.mean, "half_width": e.half_width, "n": e.n}


def cmd_constants(args) -> int:
    spec = _resolve_spec(args.spec)
    consts = carnot_ou_constants(spec, args.s)
    out = {
        "name": spec.name,
        "s": args.s,
        "kappa": consts.kappa,
        "rho1": consts.rho1,
        "rho2": consts.rho2,
        "rho3": consts.rho3,
        "harnack_coefficient": harnack_coefficient(consts),
    }
    if args.eps is not None:
        out["eps"] = args.eps
        out["lambda"] = lambda_eps(consts, args.eps)
        out["C"] = prefactor_C(consts, args.eps)
    if args.opt_time is not None:
        out["rate_plan"] = dataclasses.asdict(
            optimal_eps_for_time(consts, args.opt_time)
        )
    text = _dump_json(out)
    sys.stdout.write(text)
    if args.out:
        _write(Path(args.out), text)
    return EXIT_OK


def cmd_check(args) -> int:
    scenario_path = Path(args.scenario)
    with open(scenario_path) as fh:
        scenario = json.load(fh)
    if not isinstance(scenario, dict):
        raise CarnotouError("scenario must be a JSON object")
    spec_src = args.spec if args.spec is not None else scenario.get("spec")
    spec = _resolve_spec(spec_src, base=scenario_path.parent)
    if args.seed is not None:
        scenario = {**scenario, "seed": int(args.seed)}
    reports, interrupted = run_checks(spec, scenario, threads=args.threads)

    for r in reports:
        t = r.parameters.get("t")
        tpart = "" if t is None else f" t={t:g}"
        sys.stdout.write(
            f"{r.name}{tpart}: {r.verdict} "
            f"(slack={r.slack:.6g}, ci={r.half_width:.6g})\n"
        )
    n_bad = sum(1 for r in reports if r.verdict == VIOLATED)
    sys.stdout.write(
        f"{len(reports)} checks, {n_bad} violated"
        + (", interrupted" if interrupted else "")
        + "\n"
    )
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write(outdir / "reports.json", _dump_json([report_to_dict(r) for r in reports]))
        _write(
            outdir / "reports.csv",
            _csv_text(CSV_HEADER, [report_csv_row(r) for r in reports]),
        )
        if reports:
            save_slack_figure(reports, outdir / "checks.png")
    if interrupted:
        return EXIT_INTERRUPTED
    return EXIT_VIOLATED if n_bad else EXIT_OK


_DECAY_KINDS = {
    "variance": check_variance_decay_integral,
    "entropy": check_entropy_decay,
    "l2": check_l2_decay,
}


def cmd_decay(args) -> int:
    spec = _resolve_spec(args.spec)
    seed = _require_seed(args)
    times = [float(v) for v in _floats(args.times)]
    if not times:
        raise CarnotouError("need at least one time")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise CarnotouError(f"times must be strictly increasing, got {times}")
    cfg = SimConfig(
        seed=seed, paths=args.paths, steps_per_unit_time=args.steps, s=args.s
    )
    consts = carnot_ou_constants(spec, args.s)
    runner = _DECAY_KINDS[args.kind]
    reports = runner(spec, args.s, args.f, times, args.eps, consts, cfg, inner=args.inner)
    rows = [
        [
            repr(float(r.parameters["t"])),
            repr(float(r.lhs.mean)),
            repr(float(r.lhs.half_width)),
            repr(float(r.rhs.mean)),
            repr(float(r.slack)),
        ]
        for r in reports
    ]
    text = _csv_text(["t", "value", "ci", "bound", "slack"], rows)
    sys.stdout.write(text)
    if args.out:
        outdir = Path(args.out)
        _write(outdir / "decay.csv", text)
        save_decay_figure(reports, outdir / "decay.png")
    n_bad = sum(1 for r in reports if r.verdict == VIOLATED)
    return EXIT_VIOLATED if n_bad else EXIT_OK


def cmd_distance(args) -> int:
    spec = _resolve_spec(args.spec)
    out: dict = {"name": spec.name}
    if args.x is not None:
        x = _floats(args.x)
        z = _floats(args.z) if args.z else np.zeros(spec.m)
        y = _floats(args.y) if args.y else np.zeros(spec.n)
        yz = _floats(args.yz) if args.yz else np.zeros(spec.m)
        res = distance(spec, Point(x, z), Point(y, yz))
        out["distance"] = {
            "lower": res.lower,
            "upper": res.upper,
            "method": res.method,
            "exact": res.exact,
        }
    caught: list[str] = []
    if args.d2 or args.exp_int is not None:
        seed = _require_seed(args)
        cfg = SimConfig(
            seed=seed, paths=args.paths, steps_per_unit_time=args.steps, s=args.s
        )
        with warnings.catch_warnings(record=True) as wlist:
            warnings.simplefilter("always", HeavyTailWarning)
            if args.d2:
                lo, hi = estimate_D2_interval(spec, args.s, cfg)
                out["d2"] = {
                    "lower": _estimate_dict(lo),
                    "upper": _estimate_dict(hi),
                }
            if args.exp_int is not None:
                est = estimate_exp_integrability(spec, args.s, args.exp_int, cfg)
                out["exp_integrability"] = {
                    "c0": args.exp_int,
                    **_estimate_dict(est),
                }
        caught = [str(w.message) for w in wlist]
    if len(out) == 1:
        raise CarnotouError("nothing to do: pass --x, --d2, or --exp-int")
    if caught:
        out["warnings"] = caught
    text = _dump_json(out)
    sys.stdout.write(text)
    if args.out:
        _write(Path(args.out), text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _resolve_spec(args.spec)
    seed = _require_seed(args)
    cfg = SimConfig(
        seed=seed, paths=args.paths, steps_per_unit_time=args.steps, s=args.s
    )
    if args.invariant:
        ens = sample_invariant(spec, args.s, cfg)
    else:
        if args.t is None:
            raise CarnotouError("pass --t for a heat ensemble or --invariant")
        ens = sample_heat(spec, args.t, cfg)
    header = [f"x{i + 1}" for i in range(spec.n)] + [f"z{k + 1}" for k in range(spec.m)]
    samples = np.concatenate([ens.xs, ens.zs], axis=1)
    rows = [[repr(float(v)) for v in row] for row in samples]
    summary = {
        "name": spec.name,
        "t": ens.t,
        "paths": len(ens),
        "mean": [float(v) for v in samples.mean(axis=0)],
        "variance": [float(v) for v in samples.var(axis=0, ddof=1)],
    }
    sys.stdout.write(_dump_json(summary))
    if args.out:
        outdir = Path(args.out)
        _write(outdir / "samples.csv", _csv_text(header, rows))
        save_ensemble_figure(ens.xs, ens.zs, ens.t, outdir / "ensemble.png")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="group spec JSON path or 'heisenberg'")
    common.add_argument("--seed", type=int, help="base seed for all streams")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--s", type=float, default=1.0, help="drift strength")
    common.add_argument("--paths", type=int, default=10000)
    common.add_argument("--steps", type=int, default=256, help="steps per unit time")

    parser = argparse.ArgumentParser(
        prog="carnotou",
        description="curvature constants, functional-inequality checks and "
        "diffusion estimates on step-2 Carnot groups",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", parents=[common], help="curvature and rate constants")
    p.add_argument("--eps", type=float, help="report lambda and C at this epsilon")
    p.add_argument("--opt-time", type=float, help="optimize epsilon for this horizon")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("check", parents=[common], help="run a scenario of checks")
    p.add_argument("scenario", help="scenario JSON path")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("decay", parents=[common], help="decay curve against its bound")
    p.add_argument("--f", required=True, help="test function expression")
    p.add_argument("--times", required=True, help="comma-separated, strictly increasing")
    p.add_argument("--kind", choices=sorted(_DECAY_KINDS), default="variance")
    p.add_argument("--eps", type=float, default=2.0)
    p.add_argument("--inner", type=int, default=1000, help="inner samples per point")
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("distance", parents=[common], help="distances and moments")
    p.add_argument("--x", help="first point, horizontal coordinates")
    p.add_argument("--z", help="first point, vertical coordinates")
    p.add_argument("--y", help="second point, horizontal (default origin)")
    p.add_argument("--yz", help="second point, vertical")
    p.add_argument("--d2", action="store_true", help="mean squared distance under mu x mu")
    p.add_argument("--exp-int", type=float, help="exp(c0 d^2) moment at this c0")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("simulate", parents=[common], help="sample an ensemble to CSV")
    p.add_argument("--t", type=float, help="heat ensemble time")
    p.add_argument("--invariant", action="store_true", help="sample the invariant measure")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CarnotouError, FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing parameter {exc}"
        sys.stderr.write(
            _dump_json({"error": {"code": type(exc).__name__, "message": msg}})
        )
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Every successful invocation writes exactly one JSON envelope to stdout
(or CSV rows with --format csv); diagnostics go to stderr. Exit codes:
0 no violation, 1 usage error, 2 precondition or validation failure,
3 inequality violation detected.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, common_cause, search, simulate, singlet
from .inequalities import (
    SettingProbs,
    correction_terms,
    epsilon_thresholds,
    evaluate_weak_ch,
    tsirelson_check,
    weak_ch_bounds,
)
from .spaces import WeakChError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_VIOLATION = 3

FORMAT_ENV = "WEAKCH_FORMAT"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _dump_json(obj) -> str:
    # All floats rendered with 17 significant digits for exact round trips.
    def render(x, parts):
        if x is None:
            parts.append("null")
        elif x is True:
            parts.append("true")
        elif x is False:
            parts.append("false")
        elif isinstance(x, float):
            parts.append("null" if not math.isfinite(x) else format(x, ".17g"))
        elif isinstance(x, int):
            parts.append(str(x))
        elif isinstance(x, str):
            parts.append(json.dumps(x))
        elif isinstance(x, dict):
            parts.append("{")
            for i, (k, v) in enumerate(x.items()):
                if i:
                    parts.append(", ")
                parts.append(json.dumps(str(k)) + ": ")
                render(v, parts)
            parts.append("}")
        elif isinstance(x, (list, tuple)):
            parts.append("[")
            for i, v in enumerate(x):
                if i:
                    parts.append(", ")
                render(v, parts)
            parts.append("]")
        else:
            raise TypeError(f"cannot serialize {type(x).__name__}")
        return parts

    return "".join(render(obj, []))


def _flatten(prefix: str, obj, rows: list):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        if isinstance(obj, float):
            obj = format(obj, ".17g") if math.isfinite(obj) else ""
        rows.append((prefix, obj))


def _emit(envelope: dict, fmt: str, csv_rows: list | None = None, csv_header: list | None = None):
    if fmt == "json":
        print(_dump_json(envelope))
        return
    buf = io.StringIO()
    writer = csv.writer(buf)
    if csv_rows is not None:
        writer.writerow(csv_header)
        writer.writerows(csv_rows)
    else:
        rows = []
        _flatten("", envelope, rows)
        writer.writerow(["key", "value"])
        writer.writerows(rows)
    sys.stdout.write(buf.getvalue())


def _envelope(command: str, inputs: dict, result) -> dict:
    return {
        "command": command,
        "inputs": _jsonable(inputs),
        "result": _jsonable(result),
        "version": __version__,
    }


def _parse_floats(text: str, count: int | None, what: str) -> list[float]:
    try:
        vals = [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise _UsageError(f"cannot parse {what}: {exc}") from exc
    if count is not None and len(vals) != count:
        raise _UsageError(f"{what} needs exactly {count} comma-separated values")
    return vals


def _maybe_radians(values: list[float], degrees: bool) -> list[float]:
    if degrees:
        return [math.radians(v) for v in values]
    return values


def _build_parser() -> _Parser:
    parser = _Parser(prog="weakch", description=__doc__)
    parser.add_argument(
        "--format",
        choices=("json", "csv"),
        default=os.environ.get(FORMAT_ENV, "json"),
        help="output format (env WEAKCH_FORMAT sets the default)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="singlet predictions")
    p.add_argument("--angles", help="four directions t1,t2,t3,t4")
    p.add_argument("--phi", type=float, help="single inter-direction angle")
    p.add_argument("--outcomes", help="outcome pair for --phi, e.g. ++ or +-")
    p.add_argument("--degrees", action="store_true")

    p = sub.add_parser("bounds", help="correction terms and corrected interval")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--pa", type=float, default=0.5)
    p.add_argument("--pb", type=float, default=0.5)
    p.add_argument("--pab", type=float, default=0.25)

    sub.add_parser("thresholds", help="largest deficits still violated by quantum values")

    p = sub.add_parser("check", help="check one combination value against the interval")
    p.add_argument("--value", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--pa", type=float, default=0.5)
    p.add_argument("--pb", type=float, default=0.5)
    p.add_argument("--pab", type=float, default=0.25)

    p = sub.add_parser("check-model", help="validate a model file")
    p.add_argument("--file", required=True)

    p = sub.add_parser("oracle", help="CH value of an explicit 16-atom distribution")
    p.add_argument("--atoms", help="16 comma-separated probabilities")
    p.add_argument("--file", help="JSON file holding a list of 16 probabilities")

    p = sub.add_parser("optimize-angles", help="extremal directions for the combination")
    p.add_argument("--mode", choices=("min", "max"), default="min")
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--refine", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("search", help="search for a strict-only violation model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--eps-band", default="1e-6,1e-3")
    p.add_argument("--cards", default="2,2,2,2")
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--decay", type=float, default=0.99)
    p.add_argument("--penalty-weight", type=float, default=1e4)

    p = sub.add_parser("simulate", help="Monte Carlo record with inequality test")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--angles", default="0,0,0,0")
    p.add_argument("--degrees", action="store_true")
    p.add_argument("--model", help="model file used as the outcome source")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--k-sigma", type=float, default=3.0)
    p.add_argument("--setting-probs", help="four pair probabilities p13,p14,p23,p24")

    return parser


def _cmd_predict(args, fmt: str) -> int:
    if args.angles is not None:
        theta = _maybe_radians(_parse_floats(args.angles, 4, "--angles"), args.degrees)
        terms = singlet.ch_terms(theta)
        value = (
            terms["p13"] + terms["p14"] + terms["p24"]
            - terms["p23"] - terms["p1_plus"] - terms["p4_plus"]
        )
        result = {"ch_value": value, "terms": terms, "tsirelson_ok": tsirelson_check(value)}
        inputs = {"angles": list(theta), "degrees": bool(args.degrees)}
    elif args.phi is not None:
        if not args.outcomes or len(args.outcomes) != 2 or any(c not in "+-" for c in args.outcomes):
            raise _UsageError("--phi needs --outcomes from {++, +-, -+, --}")
        phi = _maybe_radians([args.phi], args.degrees)[0]
        result = {"joint_prob": singlet.joint_prob(phi, args.outcomes[0], args.outcomes[1])}
        inputs = {"phi": phi, "outcomes": args.outcomes, "degrees": bool(args.degrees)}
    else:
        raise _UsageError("predict needs --angles or --phi with --outcomes")
    _emit(_envelope("predict", inputs, result), fmt)
    return EXIT_OK


def _cmd_bounds(args, fmt: str) -> int:
    sp = SettingProbs(args.pa, args.pb, args.pab)
    ct = correction_terms(args.epsilon, sp)
    lower, upper = weak_ch_bounds(ct, ct, ct, ct)
    result = {
        "correction_terms": ct,
        "lower": lower,
        "upper": upper,
    }
    inputs = {"epsilon": args.epsilon, "pa": args.pa, "pb": args.pb, "pab": args.pab}
    _emit(_envelope("bounds", inputs, result), fmt)
    return EXIT_OK


def _cmd_thresholds(args, fmt: str) -> int:
    lo, hi = epsilon_thresholds()
    result = {"eps_lower_max": lo, "eps_upper_max": hi}
    _emit(_envelope("thresholds", {}, result), fmt)
    return EXIT_OK


def _cmd_check(args, fmt: str) -> int:
    sp = SettingProbs(args.pa, args.pb, args.pab)
    ct = correction_terms(args.epsilon, sp)
    report = evaluate_weak_ch(args.value, weak_ch_bounds(ct, ct, ct, ct), args.epsilon)
    inputs = {
        "value": args.value,
        "epsilon": args.epsilon,
        "pa": args.pa,
        "pb": args.pb,
        "pab": args.pab,
    }
    _emit(_envelope("check", inputs, report.as_dict()), fmt)
    return EXIT_VIOLATION if report.violated else EXIT_OK


def _residual_summary(report) -> dict:
    worst = report.worst()
    return {
        "count": len(report.residuals),
        "max_abs": report.max_abs,
        "worst": None if worst is None else {"label": worst[0], "residual": worst[1]},
        "skipped": list(report.skipped),
    }


def _cmd_check_model(args, fmt: str) -> int:
    try:
        data = json.loads(Path(args.file).read_text())
    except (OSError, ValueError) as exc:
        raise WeakChError(f"cannot read {args.file}: {exc}") from exc
    model = common_cause.model_from_dict(data)
    inputs = {"file": str(args.file), "type": data.get("type")}
    tol = common_cause.PRECONDITION_TOL

    if isinstance(model, common_cause.EprbModel):
        prof = model.profile()
        loc = common_cause.validate_loc(model)
        nc = common_cause.validate_no_conspiracy(model)
        scr = common_cause.validate_screening(model, prof)
        result = {
            "cause_cards": list(model.cause_cards),
            "validators": {
                "locality": _residual_summary(loc),
                "no_conspiracy": _residual_summary(nc),
                "screening": _residual_summary(scr),
            },
            "epsilon_profile": prof.as_dict(),
        }
        if max(loc.max_abs, nc.max_abs, scr.max_abs) > tol:
            result["status"] = "precondition_failed"
            _emit(_envelope("check-model", inputs, result), fmt)
            return EXIT_VALIDATION
        joint = common_cause.joint_cause_bounds_check(model)
        weak = model.weak_report()
        result["joint_cause_bounds"] = joint
        result["weak_report"] = weak.as_dict()
        violated = (not joint.ok) or weak.violated
        result["status"] = "violation" if violated else "ok"
        _emit(_envelope("check-model", inputs, result), fmt)
        return EXIT_VIOLATION if violated else EXIT_OK

    scr = model.screening()
    result = {
        "n_cells": len(model.cells),
        "screening": {
            "max_abs": scr.max_abs,
            "skipped_cells": list(scr.skipped_cells),
        },
    }
    try:
        report = common_cause.check_cause_mass_bounds(model)
    except common_cause.PreconditionViolated as exc:
        result["status"] = "precondition_failed"
        result["reason"] = str(exc)
        _emit(_envelope("check-model", inputs, result), fmt)
        return EXIT_VALIDATION
    result["cause_mass"] = report
    result["status"] = "ok" if report.ok else "violation"
    _emit(_envelope("check-model", inputs, result), fmt)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def _cmd_oracle(args, fmt: str) -> int:
    if args.atoms:
        probs = _parse_floats(args.atoms, 16, "--atoms")
    elif args.file:
        try:
            probs = json.loads(Path(args.file).read_text())
        except (OSError, ValueError) as exc:
            raise WeakChError(f"cannot read {args.file}: {exc}") from exc
    else:
        raise _UsageError("oracle needs --atoms or --file")
    res = common_cause.ch_atom_oracle(probs)
    _emit(_envelope("oracle", {"atoms": list(map(float, probs))}, res), fmt)
    return EXIT_OK if res.in_bounds else EXIT_VIOLATION


def _cmd_optimize_angles(args, fmt: str) -> int:
    theta, value = search.optimize_angles(
        mode=args.mode, seed=args.seed, grid_size=args.grid, refine_sweeps=args.refine
    )
    inputs = {"mode": args.mode, "grid": args.grid, "refine": args.refine, "seed": args.seed}
    result = {"theta": list(theta), "ch_value": value, "tsirelson_ok": tsirelson_check(value)}
    _emit(_envelope("optimize-angles", inputs, result), fmt)
    return EXIT_OK


def _cmd_search(args, fmt: str) -> int:
    band = _parse_floats(args.eps_band, 2, "--eps-band")
    cards = [int(v) for v in _parse_floats(args.cards, 4, "--cards")]
    cfg = search.SearchConfig(
        seed=args.seed,
        restarts=args.restarts,
        max_iters=args.iters,
        cause_cards=tuple(cards),
        step_init=args.step,
        step_decay=args.decay,
        penalty_weight=args.penalty_weight,
        eps_band=(band[0], band[1]),
    )
    res = search.search_counterexample(cfg)
    inputs = dataclasses.asdict(cfg)
    result = {
        "feasible": res.feasible,
        "restart_index": res.restart_index,
        "objective": res.objective,
        "penalty": res.penalty,
        "epsilon": res.epsilon,
        "ch_value": res.ch_value,
        "weak_report": res.weak_report.as_dict(),
        "trace": [list(t) for t in res.trace],
        "model": res.model.to_dict(),
    }
    _emit(_envelope("search", inputs, result), fmt)
    return EXIT_VIOLATION if res.feasible else EXIT_OK


def _cmd_simulate(args, fmt: str) -> int:
    theta = _maybe_radians(_parse_floats(args.angles, 4, "--angles"), args.degrees)
    sp = None
    if args.setting_probs:
        vals = _parse_floats(args.setting_probs, 4, "--setting-probs")
        sp = np.asarray(vals).reshape(2, 2)
    cfg = simulate.SimConfig(
        seed=args.seed,
        n=args.n,
        theta=tuple(theta),
        setting_probs=sp,
        source=args.model if args.model else "singlet",
    )
    table = simulate.sample_runs(cfg)
    est = simulate.estimate(table)
    report = simulate.test_inequality(est, args.epsilon, args.k_sigma)
    inputs = {
        "seed": args.seed,
        "n": args.n,
        "angles": list(theta),
        "model": args.model,
        "epsilon": args.epsilon,
        "k_sigma": args.k_sigma,
        "setting_probs": cfg.setting_probs,
    }
    result = {
        "counts": table.counts,
        "pair_counts": est.pair_counts,
        "test": report,
        "undefined": list(est.undefined),
    }
    if fmt == "csv":
        header = ["alice_setting", "bob_setting", "alice_outcome", "bob_outcome", "count", "frequency"]
        rows = []
        for a in (0, 1):
            for b in (0, 1):
                n_pair = int(est.pair_counts[a, b])
                for oa, sa in enumerate("+-"):
                    for ob, sb in enumerate("+-"):
                        cnt = int(table.counts[a, b, oa, ob])
                        freq = "" if n_pair == 0 else format(cnt / n_pair, ".17g")
                        rows.append([a + 1, b + 3, sa, sb, cnt, freq])
        _emit(_envelope("simulate", inputs, result), fmt, csv_rows=rows, csv_header=header)
    else:
        _emit(_envelope("simulate", inputs, result), fmt)
    violated = report.violated_lower or report.violated_upper
    return EXIT_VIOLATION if violated else EXIT_OK


_HANDLERS = {
    "predict": _cmd_predict,
    "bounds": _cmd_bounds,
    "thresholds": _cmd_thresholds,
    "check": _cmd_check,
    "check-model": _cmd_check_model,
    "oracle": _cmd_oracle,
    "optimize-angles": _cmd_optimize_angles,
    "search": _cmd_search,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args, args.format)
    except _UsageError:
        return EXIT_USAGE
    except (WeakChError, ValueError) as exc:
        # stdout stays machine-readable on validation failures too
        print(f"weakch: {exc}", file=sys.stderr)
        envelope = {
            "command": getattr(args, "command", None),
            "error": str(exc),
            "version": __version__,
        }
        _emit(envelope, getattr(args, "format", "json"))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

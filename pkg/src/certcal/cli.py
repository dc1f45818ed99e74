"""Command-line interface.

Exit codes: 0 success (abstain-all included), 2 invalid input or usage,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .calibration import CertaintyPredictor, DEFAULT_DELTA, calibrate, predict, threshold_sweep
from .dataset_io import atomic_write_text, load_column, load_matrix, load_records
from .errors import InvalidInputError, NumericError
from .evaluation import emit_curves, evaluate, fpr_alpha_curve
from .scores import ScoreFunction, score_record
from .shift import (
    DEFAULT_GAMMA,
    DiscriminatorConfig,
    ShiftConfig,
    calibrate_under_shift_detailed,
    estimate_density_ratio,
)
from . import simulation as sim

REFUSAL_MARKER = "I-REFUSE-TO-ANSWER"
DEFAULT_SEED = 42

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _open_unit(name):
    def conv(text):
        try:
            x = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}") from None
        if not (0 < x < 1):
            raise argparse.ArgumentTypeError(f"{name} must lie strictly inside (0, 1), got {x}")
        return x
    conv.__name__ = name
    return conv


def _gamma(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gamma must be a number, got {text!r}") from None
    if not (0 < x <= 1):
        raise argparse.ArgumentTypeError(f"gamma must lie in (0, 1], got {x}")
    return x


def _positive_float(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (x > 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {x}")
    return x


def _positive_int(text):
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if x < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {x}")
    return x


def _seed(text):
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not (0 <= x < 2**64):
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return x


def _int_list(text):
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or min(out) < 0:
        raise argparse.ArgumentTypeError("expected non-negative integers")
    return out


def _alpha_list(text):
    conv = _open_unit("alpha")
    out = [conv(x) for x in text.split(",") if x.strip()]
    if not out or out != sorted(out):
        raise argparse.ArgumentTypeError("alpha grid must be ascending")
    return out


def _law(text):
    try:
        return sim.parse_law(text)
    except (InvalidInputError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _score_fn(text):
    try:
        return ScoreFunction.parse(text)
    except InvalidInputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _score_all(records, fid):
    return np.array([score_record(r, fid).value for r in records], dtype=float)


def _write_predictor(pred: CertaintyPredictor, path) -> None:
    atomic_write_text(path, pred.dumps())
    print(f"n0={pred.n0} k_hat={pred.k_hat} tau={'inf' if math.isinf(pred.tau) else repr(pred.tau)}")
    for w in pred.warnings:
        _warn(w)


def _read_predictor(path) -> CertaintyPredictor:
    with open(path, encoding="utf-8") as fh:
        return CertaintyPredictor.loads(fh.read())


# -- commands -------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    records = load_records(args.records)
    d0 = [r for r in records if r.y == 0]
    pred = calibrate(_score_all(d0, args.score), args.alpha, args.delta, args.score)
    _write_predictor(pred, args.output)
    return EXIT_OK


def cmd_predict(args) -> int:
    pred = _read_predictor(args.predictor)
    if pred.function_id is None:
        raise InvalidInputError("predictor has no function_id; cannot score records")
    records = load_records(args.records)
    lines = []
    for r in records:
        eta = score_record(r, pred.function_id).value
        dec = predict(pred, eta)
        lines.append(json.dumps({
            "id": r.id,
            "eta": eta,
            "decision": dec.value,
            "response": r.generated if dec.value == "certain" else REFUSAL_MARKER,
        }, ensure_ascii=False) + "\n")
    atomic_write_text(args.output, "".join(lines))
    n_cert = sum('"decision": "certain"' in ln for ln in lines)
    print(f"records={len(lines)} certain={n_cert} uncertain={len(lines) - n_cert}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred = _read_predictor(args.predictor)
    if pred.function_id is None:
        raise InvalidInputError("predictor has no function_id; cannot score records")
    records = load_records(args.records)
    if not records:
        raise InvalidInputError("records file is empty")
    eta = _score_all(records, pred.function_id)
    y = [r.y for r in records]
    labeled = [(e, yy, yy) for e, yy in zip(eta, y)]
    report = evaluate(pred, labeled)
    atomic_write_text(args.output, report.dumps())
    print(report.dumps(), end="")
    if args.sweep_output:
        pts = threshold_sweep(pred, [(e, yy) for e, yy in zip(eta, y)])
        emit_curves(args.sweep_output, ("tau", "accuracy", "fpr", "fnr"),
                    [(p.tau, p.accuracy, p.fpr, p.fnr) for p in pts])
    if args.curve_output:
        cal_records = load_records(args.calibration_records) if args.calibration_records else records
        cal = _score_all([r for r in cal_records if r.y == 0], pred.function_id)
        curve = fpr_alpha_curve(cal, labeled, args.alpha_grid, pred.delta)
        emit_curves(args.curve_output, ("alpha", "fpr"), curve)
    if pred.abstains_always:
        _warn("predictor abstains on every question")
    return EXIT_OK


def cmd_shift_calibrate(args) -> int:
    records = load_records(args.records)
    if args.ratios:
        ratios = load_column(args.ratios)
        if len(ratios) != len(records):
            raise InvalidInputError(
                f"ratio file has {len(ratios)} values for {len(records)} records"
            )
    else:
        feats = np.asarray(load_matrix(args.features), dtype=float)
        target = np.asarray(load_matrix(args.target_features), dtype=float)
        if len(feats) != len(records):
            raise InvalidInputError(f"feature file has {len(feats)} rows for {len(records)} records")
        if feats.size == 0 or target.size == 0:
            raise InvalidInputError("feature files must be non-empty")
        cfg = DiscriminatorConfig(feats.shape[1], args.learning_rate, args.epochs, args.l2)
        model = estimate_density_ratio(feats, target, cfg)
        ratios = model(feats).tolist()
    mask = [r.y == 0 for r in records]
    d0 = [r for r, m in zip(records, mask) if m]
    w0 = [w for w, m in zip(ratios, mask) if m]
    print(f"seed={args.seed}")
    shift = ShiftConfig(tuple(w0), gamma=args.gamma, bound_b=args.bound_b, seed=args.seed)
    res = calibrate_under_shift_detailed(_score_all(d0, args.score), shift, args.alpha, args.delta, args.score)
    print(f"B={res.bound_b!r} accepted={res.accepted.size}/{len(d0)}")
    _write_predictor(res.predictor, args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    print(f"seed={args.seed}")
    if args.kind == "type1":
        world = sim.SyntheticWorld(args.p0, args.p1, args.p_y).with_oracle(args.alpha)
        rep = sim.run_type1_trials(world, args.n0, args.alpha, args.delta, args.trials, args.seed)
        emit_curves(args.output, rep.COLUMNS, [rep.row()])
        print(f"exceed_rate={rep.exceed_rate} (limit {args.delta + sim.exceed_margin(args.delta, args.trials):.4f})")
    elif args.kind == "type2":
        world = sim.SyntheticWorld(args.p0, args.p1, args.p_y).with_oracle(args.alpha)
        rows = sim.run_type2_study(world, args.n0_grid, args.alpha, args.delta, args.trials, args.seed)
        emit_curves(args.output, sim.Type2Row.COLUMNS, [r.row() for r in rows])
        for r in rows:
            print(f"n0={r.n0} median_excess={r.median_excess:.5f}")
    else:
        ratio = None
        if args.ratio == "constant":
            ratio = lambda x: np.ones_like(x)  # noqa: E731
        rep = sim.run_shift_trials(args.source, args.target, args.n0, args.alpha, args.delta,
                                   args.trials, args.seed, ratio=ratio, gamma=args.gamma,
                                   bound_b=args.bound_b)
        emit_curves(args.output, rep.COLUMNS, [rep.row()])
        print(f"exceed_rate={rep.exceed_rate}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="certcal", description=__doc__.splitlines()[0], formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, alpha_required=True):
        if alpha_required:
            sp.add_argument("--alpha", type=_open_unit("alpha"), required=True, help="significance level")
        sp.add_argument("--delta", type=_open_unit("delta"), default=DEFAULT_DELTA,
                        help="allowed probability of exceeding alpha")

    sp = sub.add_parser("calibrate", help="calibrate a threshold on labeled records", formatter_class=fmt)
    sp.add_argument("--records", required=True, help="JSON-lines record file")
    common(sp)
    sp.add_argument("--score", type=_score_fn, default=ScoreFunction.VE, help="ve, se or kle")
    sp.add_argument("--output", "-o", required=True, help="predictor file to write")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("predict", help="emit certain/uncertain decisions", formatter_class=fmt)
    sp.add_argument("--predictor", required=True)
    sp.add_argument("--records", required=True)
    sp.add_argument("--output", "-o", required=True, help="decisions file (JSON lines)")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="accuracy, FPR, FNR and answer rate", formatter_class=fmt)
    sp.add_argument("--predictor", required=True)
    sp.add_argument("--records", required=True, help="labeled test records")
    sp.add_argument("--output", "-o", required=True, help="report file (JSON)")
    sp.add_argument("--sweep-output", default=None, help="accuracy-threshold table (CSV)")
    sp.add_argument("--curve-output", default=None, help="FPR-alpha table (CSV)")
    sp.add_argument("--alpha-grid", type=_alpha_list, default=[0.02, 0.05, 0.1, 0.2])
    sp.add_argument("--calibration-records", default=None,
                    help="records for the FPR-alpha curve calibration (default: --records)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("shift-calibrate", help="calibrate under covariate shift", formatter_class=fmt)
    sp.add_argument("--records", required=True)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--ratios", help="one density ratio per record line")
    src.add_argument("--features", help="feature matrix aligned with the records")
    sp.add_argument("--target-features", help="target-domain feature matrix (with --features)")
    common(sp)
    sp.add_argument("--score", type=_score_fn, default=ScoreFunction.VE)
    sp.add_argument("--gamma", type=_gamma, default=DEFAULT_GAMMA, help="quantile level for B")
    sp.add_argument("--bound-b", type=_positive_float, default=None, help="explicit ratio bound B")
    sp.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    sp.add_argument("--learning-rate", type=_positive_float, default=0.5)
    sp.add_argument("--epochs", type=_positive_int, default=500)
    sp.add_argument("--l2", type=float, default=0.0)
    sp.add_argument("--output", "-o", required=True)
    sp.set_defaults(func=cmd_shift_calibrate)

    sp = sub.add_parser("simulate", help="Monte Carlo certification on synthetic score laws",
                        formatter_class=fmt)
    sp.add_argument("kind", choices=["type1", "type2", "shift"])
    sp.add_argument("--config", default=None, help="file of key = value lines supplying defaults")
    sp.add_argument("--p0", type=_law, default="uniform", help="score law of the uncertain class")
    sp.add_argument("--p1", type=_law, default="beta(2,1)", help="score law of the certain class")
    sp.add_argument("--p-y", type=_open_unit("p_y"), default=0.5)
    sp.add_argument("--source", type=_law, default="uniform")
    sp.add_argument("--target", type=_law, default="beta(2,1)")
    sp.add_argument("--ratio", choices=["analytic", "constant"], default="analytic",
                    help="density ratio for shift trials; constant is a negative control")
    sp.add_argument("--gamma", type=_gamma, default=DEFAULT_GAMMA)
    sp.add_argument("--bound-b", type=_positive_float, default=None)
    sp.add_argument("--n0", type=_positive_int, default=1000)
    sp.add_argument("--n0-grid", type=_int_list, default=[100, 1000, 10000])
    sp.add_argument("--alpha", type=_open_unit("alpha"), default=0.05)
    sp.add_argument("--delta", type=_open_unit("delta"), default=DEFAULT_DELTA)
    sp.add_argument("--trials", type=_positive_int, default=2000)
    sp.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    sp.add_argument("--output", "-o", required=True, help="result table (CSV)")
    sp.set_defaults(func=cmd_simulate)
    return p


def _apply_config(parser, args, argv):
    """Re-parse with config-file values as defaults, so explicit flags still win."""
    sp = parser._subparsers._group_actions[0].choices["simulate"]
    by_dest = {a.dest: a for a in sp._actions}
    defaults = {}
    with open(args.config, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                parser.error(f"{args.config}:{lineno}: expected key = value")
            key, val = (x.strip() for x in s.split("=", 1))
            dest = key.replace("-", "_")
            action = by_dest.get(dest)
            if action is None or dest in ("config", "kind", "help"):
                parser.error(f"{args.config}:{lineno}: unknown key {key!r}")
            if action.choices is not None and val not in action.choices:
                parser.error(f"{args.config}:{lineno}: invalid value {val!r} for {key}")
            try:
                defaults[dest] = action.type(val) if action.type else val
            except argparse.ArgumentTypeError as exc:
                parser.error(f"{args.config}:{lineno}: {exc}")
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.command == "shift-calibrate" and args.features and not args.target_features:
        parser.error("--features requires --target-features")
    try:
        if getattr(args, "config", None):
            args = _apply_config(parser, args, argv)
        return args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

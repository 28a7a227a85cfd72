"""Command-line entry point: ``betapref {verify,train,eval,report}``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric failure,
4 invariant failure. Every command requires ``--seed``.
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluate, verify
from .errors import NumericFailure, PreconditionError, StructuralError
from .model import checkpoint_json, load_checkpoint, train
from .runs import (
    METRICS_SCHEMA,
    ConfigError,
    default_run_id,
    lambdas,
    load_config,
    load_run_record,
    resolve_config,
    train_config_from,
    world_from_config,
)
from .synth import build_context

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INVARIANT = 4

PROTOCOLS = ("accuracy", "calibration", "pareto", "bandit")
PARETO_HEADER = ("mix_ratio", "n_demos", "respond_acc", "refuse_acc")


class UsageError(Exception):
    """Refused request (e.g. an output that already exists)."""


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _fresh(path: Path) -> Path:
    if path.exists():
        raise UsageError(f"refusing to overwrite existing {path}")
    return path


def _config(args) -> dict:
    cfg = load_config(args.config) if args.config else resolve_config()
    if getattr(args, "lambda_", None):
        cfg["train"]["lambda"] = args.lambda_ if len(args.lambda_) > 1 else args.lambda_[0]
        resolve_config(cfg)
    return cfg


# verify


def cmd_verify(args) -> int:
    results = verify.run_checks(args.seed)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} ({r.seconds:.2f}s): {r.detail}")
        if not r.passed:
            print(f"     worst case: {json.dumps(r.worst, default=float)}")
    ok = all(r.passed for r in results)
    if args.report:
        doc = {"seed": args.seed, "passed": ok, "checks": [r.as_dict() for r in results]}
        Path(args.report).write_text(json.dumps(doc, indent=2, default=float) + "\n")
    if not ok:
        failed = ", ".join(r.name for r in results if not r.passed)
        print(f"invariant failure: {failed}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# train


def cmd_train(args) -> int:
    cfg = _config(args)
    world = world_from_config(cfg)
    out = Path(args.out)
    runs = [(lam, out / default_run_id(cfg, lam, args.seed)) for lam in lambdas(cfg)]
    for _, run_dir in runs:
        _fresh(run_dir)
    status = EXIT_OK
    for lam, run_dir in runs:
        run_cfg = json.loads(json.dumps(cfg))
        run_cfg["train"]["lambda"] = lam
        run_dir.mkdir(parents=True)
        (run_dir / "config.json").write_text(_dump(run_cfg))
        metrics = {"schema_version": METRICS_SCHEMA, "run_id": run_dir.name, "seed": args.seed, "lambda": lam}
        try:
            params, trace = train(world, train_config_from(run_cfg, lam, args.seed))
        except NumericFailure as exc:
            metrics.update(status="aborted", failure={"step": exc.step, "message": str(exc)})
            if exc.trace is not None:
                (run_dir / "trace.csv").write_text(exc.trace.to_csv())
            (run_dir / "metrics.json").write_text(_dump(metrics))
            print(f"{run_dir.name}: aborted: {exc}", file=sys.stderr)
            status = EXIT_NUMERIC
            continue
        (run_dir / "trace.csv").write_text(trace.to_csv())
        (run_dir / "checkpoint.json").write_text(checkpoint_json(params))
        metrics.update(status="ok", steps=len(trace), final=trace.final())
        (run_dir / "metrics.json").write_text(_dump(metrics))
        f = metrics["final"]
        print(f"{run_dir.name}: loss {f['loss']:.4f} mu {f['mu_mean']:.4f} tau {f['tau_mean']:.3f}")
    return status


# eval


def _eval_accuracy(params, world, ev, args):
    obj = world.standard_objective()
    if args.reversed:
        obj = obj.reversed()
    seeds = [args.seed + i for i in range(ev["n_seeds"])]
    rows = []
    for n in [args.n] if args.n else ev["n_values"]:
        accs = [evaluate.context_accuracy(params, obj, obj, n, ev["count"], s, world.margin_scale) for s in seeds]
        rows.append((int(n), float(np.mean(accs)), float(np.std(accs))))
    metrics = {"objective": obj.name, "reversed": bool(args.reversed), "seeds": seeds,
               "accuracy": {str(n): a for n, a, _ in rows}}
    return metrics, ("n_demos", "accuracy", "accuracy_std"), rows


def _eval_calibration(params, world, ev, args):
    obj = world.standard_objective()
    if args.reversed:
        obj = obj.reversed()
    seeds = [args.seed + i for i in range(ev["n_seeds"])]
    n_values = [args.n] if args.n else ev["n_values"]
    rows = evaluate.calibration_curve(params, obj, n_values, seeds, margin_scale=world.margin_scale)
    metrics = {"objective": obj.name, "seeds": seeds, "tau_mean": {str(n): m for n, m, _ in rows}}
    return metrics, ("n_demos", "tau_mean", "tau_std"), rows


def _eval_pareto(params, world, ev, args):
    obj_a = world.standard_objective()
    obj_b = obj_a.reversed() if args.reversed else world.objective(1)
    ratios = [args.mix_ratio] if args.mix_ratio is not None else ev["mix_ratios"]
    seeds = [args.seed + i for i in range(ev["n_seeds"])]
    rows, hv = [], {}
    for n in [args.n] if args.n else ev["pareto_n_values"]:
        pts = evaluate.pareto_sweep(params, obj_a, obj_b, n, ratios, seeds, ev["count"], world.margin_scale)
        rows.extend((p.mix_ratio, p.n_demos, p.respond_acc, p.refuse_acc) for p in pts)
        hv[str(n)] = evaluate.hypervolume(pts)
    metrics = {"obj_a": obj_a.name, "obj_b": obj_b.name, "seeds": seeds, "hv": hv}
    return metrics, PARETO_HEADER, rows


def _eval_bandit(params, world, ev, args):
    obj = world.standard_objective()
    if args.reversed:
        obj = obj.reversed()
    n = args.n or ev["n_demos"]
    arms = evaluate.make_bandit_arms(obj)
    rows, per_seed = [], []
    for i in range(ev["n_seeds"]):
        seed = args.seed + i
        context = build_context(obj, obj, n, 1.0, world.margin_scale, seed)
        res = evaluate.bandit_alignment(params, context, arms, ev["bandit_steps"], ev["bandit_batch_size"],
                                        ev["bandit_learning_rate"], seed)
        best = int(np.argmax([a.accuracy for a in arms]))
        for t in range(len(res.batch_reward)):
            rows.append((seed, t, float(res.batch_reward[t]), float(res.batch_gold[t]), float(res.probs[t + 1, best])))
        per_seed.append({"seed": seed, "best_arm_prob": res.best_arm_prob,
                         **(res.report.as_dict() if res.report else {"pearson_r": None})})
    pearsons = [p["pearson_r"] for p in per_seed if p["pearson_r"] is not None]
    metrics = {"objective": obj.name, "n_demos": n, "runs": per_seed,
               "mean_pearson_r": float(np.mean(pearsons)) if pearsons else None,
               "mean_best_arm_prob": float(np.mean([p["best_arm_prob"] for p in per_seed]))}
    return metrics, ("seed", "step", "mean_reward", "gold_accuracy", "best_arm_prob"), rows


EVALUATORS = {
    "accuracy": _eval_accuracy,
    "calibration": _eval_calibration,
    "pareto": _eval_pareto,
    "bandit": _eval_bandit,
}


def cmd_eval(args) -> int:
    cfg = _config(args)
    world = world_from_config(cfg)
    try:
        params = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise StructuralError(f"cannot load checkpoint {args.checkpoint}: {exc}") from exc
    if params.dim != world.dim:
        raise StructuralError(f"checkpoint dimension {params.dim} != world dimension {world.dim}")
    if args.mix_ratio is not None and not 0.0 <= args.mix_ratio <= 1.0:
        raise ConfigError("--mix-ratio", "must lie in [0, 1]")
    if args.n is not None and args.n < 1:
        raise ConfigError("--n", "must be >= 1")
    out = Path(args.out)
    stem = f"eval-{args.protocol}{'-reversed' if args.reversed else ''}-seed{args.seed}"
    json_path, csv_path = _fresh(out / f"{stem}.json"), _fresh(out / f"{stem}.csv")
    metrics, header, rows = EVALUATORS[args.protocol](params, world, cfg["eval"], args)
    doc = {"schema_version": METRICS_SCHEMA, "protocol": args.protocol, "seed": args.seed,
           "checkpoint": str(args.checkpoint), **metrics}
    out.mkdir(parents=True, exist_ok=True)
    json_path.write_text(_dump(doc))
    csv_path.write_text(_csv(header, rows))
    print(f"wrote {json_path} and {csv_path}")
    return EXIT_OK


# report


REPORT_HEADER = ("run_id", "seed", "lambda", "objective", "status", "step", "loss", "mu_mean", "tau_mean")
SUMMARY_HEADER = ("run_id", "seed", "lambda", "objective", "status", "loss", "mu_mean", "tau_mean")


def cmd_report(args) -> int:
    records = [load_run_record(d) for d in args.runs]
    out = Path(args.out)
    trace_path, summary_path = _fresh(out / "report.csv"), _fresh(out / "summary.csv")
    trace_rows, summary_rows = [], []
    for rec in records:
        run_id = rec.metrics.get("run_id", "")
        lam = rec.config["train"]["lambda"]
        obj = rec.config["train"]["objective"]
        status = rec.metrics.get("status", "")
        for row in zip(rec.trace.step, rec.trace.loss, rec.trace.mu_mean, rec.trace.tau_mean):
            trace_rows.append((run_id, rec.seed, lam, obj, status, int(row[0]), *map(float, row[1:])))
        final = rec.metrics.get("final", {})
        summary_rows.append((run_id, rec.seed, lam, obj, status,
                             *(final.get(k, "") for k in ("loss", "mu_mean", "tau_mean"))))
    out.mkdir(parents=True, exist_ok=True)
    trace_path.write_text(_csv(REPORT_HEADER, trace_rows))
    summary_path.write_text(_csv(SUMMARY_HEADER, summary_rows))
    print(f"wrote {trace_path} and {summary_path} ({len(records)} runs)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="betapref", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--seed", type=int, required=True, help="global seed (required)")
        p.add_argument("--config", help="JSON configuration document")
        if out_required:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("verify", help="run the invariant suite")
    common(p, out_required=False)
    p.add_argument("--report", help="write a JSON report of every check here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train", help="train one run per lambda")
    common(p)
    p.add_argument("--lambda", dest="lambda_", type=float, action="append",
                   help="KL weight; repeat for a sweep (overrides the config)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--protocol", choices=PROTOCOLS, required=True)
    p.add_argument("--n", type=int, help="evaluate at this context size only")
    p.add_argument("--mix-ratio", type=float, help="pareto: evaluate this ratio only")
    p.add_argument("--reversed", action="store_true", help="reversed objective for context and labels")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="aggregate run directories into CSV")
    common(p)
    p.add_argument("runs", nargs="+", help="run directories written by train")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, StructuralError, PreconditionError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

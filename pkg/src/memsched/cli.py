"""Command line front end: simulation sweeps, the DP oracle, model fitting,
log ingestion, evaluation reports, and the review service."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import control, estimate, evaluate, ingest
from .memory import ItemParams, ModelKind
from .schedulers import (
    LastMinuteSchedule,
    OptimalSchedule,
    ThresholdSchedule,
    UniformSchedule,
)
from .simulate import ExperimentConfig, run_ensemble


def _model_kind(args) -> ModelKind:
    if args.model == "pl":
        return ModelKind.power_law(args.omega)
    return ModelKind.exponential()


def _schedule_from_args(args):
    if args.schedule == "optimal":
        return OptimalSchedule(q=args.q)
    if args.schedule == "uniform":
        return UniformSchedule(mu=args.mu)
    if args.schedule == "threshold":
        return ThresholdSchedule(m_th=args.m_th, c=args.c, zeta=args.zeta)
    if args.schedule == "lastminute":
        return LastMinuteSchedule(t_lm=args.t_lm, mu=args.mu)
    raise ValueError(f"unknown schedule {args.schedule!r}")


def _item_params(args) -> ItemParams:
    return ItemParams(alpha=args.alpha, beta=args.beta, n0=args.n0)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    config = ExperimentConfig(
        t0=0.0, t_f=args.t_f, params=_item_params(args),
        schedule=_schedule_from_args(args), runs=args.runs, seed=args.seed,
        model=_model_kind(args))
    metrics = run_ensemble(config)

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "metric", "schedule", "median", "q_lo", "q_hi"])
            for name, mat in sorted(metrics.curves.items()):
                lo, med, hi = mat
                for k, t in enumerate(metrics.grid):
                    w.writerow([f"{t:.6g}", name, args.schedule,
                                f"{med[k]:.8g}", f"{lo[k]:.8g}",
                                f"{hi[k]:.8g}"])

    summary = {
        "schedule": args.schedule,
        "runs": args.runs,
        "seed": args.seed,
        "t_f": args.t_f,
        "mean_reviews": float(np.mean(metrics.total_reviews)),
        "median_reviews": float(np.median(metrics.total_reviews)),
        "final_n_median": float(metrics.median("n")[-1]),
    }
    for name in metrics.curves:
        if name.startswith("m+"):
            summary[f"final_{name}_median"] = float(
                metrics.median(name)[-1])
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def cmd_oracle(args) -> int:
    problem = control.ControlProblem(t0=0.0, t_f=args.t_f,
                                     params=_item_params(args), q=args.q)
    grid = control.DPGrid(dt=args.dt)
    result = control.solve_dp(problem, grid)
    mc_mean, mc_err = control.evaluate_policy_cost(
        control.optimal_policy(problem), problem, runs=args.runs,
        seed=args.seed)
    grid_value = control.evaluate_policy_on_grid(
        control.optimal_policy(problem), problem, grid)
    out = {
        "dp_value": result.value,
        "closed_form_mc_cost": mc_mean,
        "closed_form_mc_stderr": mc_err,
        "closed_form_grid_cost": grid_value,
        "gap": mc_mean - result.value,
        "relative_gap": (mc_mean - result.value) / result.value,
        "dt": args.dt,
        "boundary_absorbed": result.boundary_absorbed,
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _fitted_to_dict(model: estimate.FittedModel) -> dict:
    return {
        "kind": model.kind.family,
        "omega": model.kind.omega,
        "alpha": model.alpha,
        "beta": model.beta,
        "n0": dict(sorted(model.n0.items())),
        "l2": model.l2,
        "alpha_unidentified": model.alpha_unidentified,
        "beta_unidentified": model.beta_unidentified,
        "clamp_events": model.clamp_events,
        "final_loss": model.loss_curve[-1] if model.loss_curve else None,
    }


def fitted_from_dict(doc: dict) -> estimate.FittedModel:
    kind = ModelKind.power_law(doc["omega"]) if doc["kind"] == "pl" \
        else ModelKind.exponential()
    return estimate.FittedModel(
        kind=kind, alpha=doc["alpha"], beta=doc["beta"], n0=dict(doc["n0"]),
        loss_curve=[doc["final_loss"]] if doc.get("final_loss") is not None
        else [], clamp_events=doc.get("clamp_events", 0),
        alpha_unidentified=doc.get("alpha_unidentified", False),
        beta_unidentified=doc.get("beta_unidentified", False),
        l2=doc.get("l2", 0.0))


def cmd_fit(args) -> int:
    sequences = []
    for path in args.log:
        sequences.extend(ingest.load(path).sequences)
    config = estimate.FitConfig(seed=args.seed)
    kind = _model_kind(args)

    if args.binned:
        K, B = args.binned
        fit = estimate.fit_binned_alpha_beta(sequences, K=K, bootstrap_B=B,
                                             kind=kind, config=config)
        out = {
            "boundaries": [None if not np.isfinite(b) else float(b)
                           for b in fit.boundaries],
            "alpha": list(fit.alpha),
            "beta": list(fit.beta),
            "p_alpha": np.asarray(fit.p_alpha).tolist(),
            "p_beta": np.asarray(fit.p_beta).tolist(),
        }
    else:
        model = estimate.fit_halflife_regression(sequences, kind=kind,
                                                 config=config)
        out = _fitted_to_dict(model)

    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_evaluate(args) -> int:
    sequences = []
    for path in args.log:
        sequences.extend(ingest.load(path).sequences)
    records = [evaluate.SequenceRecord(seq) for seq in sequences]

    if args.fitted_model:
        with open(args.fitted_model) as fh:
            model = fitted_from_dict(json.load(fh))
        kind = model.kind

        def params_for(rec):
            if rec.seq.item in model.n0:
                return model.item_params(rec.seq.item)
            # unseen item: fall back to the default initial rate
            return ItemParams(alpha=model.alpha, beta=model.beta, n0=1.0)
    else:
        kind = _model_kind(args)
        defaults = _item_params(args)

        def params_for(rec):
            return defaults

    report = evaluate.score_records(records, params_for, kind=kind)
    report = evaluate.rank_and_compare(records, report, quantile=args.quantile,
                                       grouping=args.grouping)

    out = {
        "grouping": args.grouping,
        "quantile": args.quantile,
        "records": len(records),
        "skipped": report.skipped,
        "groups": [{
            "group": g.group,
            "mean_effort": g.mean_effort,
            "median_rate": g.median_rate,
            "ratios": g.ratios,
            "ks_p": g.ks_p,
            "rate_quartiles": {k: list(v)
                               for k, v in g.rate_quartiles.items()},
        } for g in report.groups],
        "log_likelihood": {name: [None if not np.isfinite(v) else float(v)
                                  for v in vals]
                           for name, vals in report.log_likelihood.items()},
    }
    with open(args.out_report, "w") as fh:
        fh.write(json.dumps(out, indent=2, sort_keys=True) + "\n")

    if args.out_tables:
        with open(args.out_tables, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["group", "cell", "value"])
            for g in report.groups:
                for cell, v in sorted(g.ratios.items()):
                    w.writerow([g.group, cell, f"{v:.8g}"])
                for cell, v in sorted(g.ks_p.items()):
                    w.writerow([g.group, f"ks_{cell}", f"{v:.8g}"])
                for name, (lo, hi) in sorted(g.rate_quartiles.items()):
                    w.writerow([g.group, f"rate_q25_{name}", f"{lo:.8g}"])
                    w.writerow([g.group, f"rate_q75_{name}", f"{hi:.8g}"])
    return 0


def cmd_ingest(args) -> int:
    rows, errors = ingest.parse_csv(args.csv)
    log = ingest.collapse_and_filter(
        rows, min_user_events=args.min_user_events,
        min_item_events=args.min_item_events,
        coalesce_window=args.coalesce_window)
    ingest.persist(log, args.out)
    summary = {
        "rows": len(rows),
        "row_errors": len(errors),
        "sequences": len(log.sequences),
        "events": len(log),
        "out": str(args.out),
    }
    if errors and args.verbose:
        summary["errors"] = [{"line": e.line, "message": e.message}
                             for e in errors[:50]]
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ReviewService, create_app

    app = create_app(ReviewService(data_dir=args.data_dir))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_model_flags(p):
    p.add_argument("--model", choices=("exp", "pl"), default="exp")
    p.add_argument("--omega", type=float, default=1.0)


def _add_param_flags(p):
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--n0", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memsched",
        description="Spaced-repetition scheduling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="ensemble simulation of a schedule")
    p.add_argument("--schedule", default="optimal",
                   choices=("optimal", "uniform", "threshold", "lastminute"))
    p.add_argument("--q", type=float, default=3e-4)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--m-th", type=float, default=0.7, dest="m_th")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--zeta", type=float, default=1.0)
    p.add_argument("--t-lm", type=float, default=15.0, dest="t_lm")
    p.add_argument("--t-f", type=float, default=20.0, dest="t_f")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="per-time quantile curves as CSV")
    _add_param_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="DP value vs the closed-form policy")
    p.add_argument("--q", type=float, default=3e-4)
    p.add_argument("--t-f", type=float, default=20.0, dest="t_f")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    _add_param_flags(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("fit", help="fit memory model parameters from logs")
    p.add_argument("--log", nargs="+", required=True,
                   help="canonical log files")
    p.add_argument("--out", help="write the fitted model JSON here")
    p.add_argument("--binned", nargs=2, type=int, metavar=("K", "B"),
                   help="per-gap-bin (alpha, beta) with B bootstrap refits")
    p.add_argument("--seed", type=int, default=0)
    _add_model_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="schedule comparison report")
    p.add_argument("--log", nargs="+", required=True)
    p.add_argument("--fitted-model", help="fitted model JSON from `fit`")
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-tables")
    p.add_argument("--grouping", choices=("pattern", "review_count"),
                   default="pattern")
    p.add_argument("--quantile", type=float, default=0.25)
    _add_param_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ingest", help="CSV session export to canonical log")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-user-events", type=int, default=30)
    p.add_argument("--min-item-events", type=int, default=30)
    p.add_argument("--coalesce-window", type=float, default=0.0,
                   help="merge sessions closer than this many seconds")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", default="decks")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: fit, predict, eval, and the simulation benchmark."""

import argparse
import csv
import hashlib
import json
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .data import read_csv_columns
from .errors import ConvergenceError, NumericalError, ValidationError
from .estimators import PenalizedCountRegressor
from .families import family_from_name, normalized_deviance, total_kl
from .simulate import METHODS, SimConfig, run_benchmark

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


def _utc_now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _config_hash(config):
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _manifest(command, config, seed, started_at):
    return {
        "command": command,
        "config_hash": _config_hash(config),
        "seed": seed,
        "tool_version": __version__,
        "started_at": started_at,
        "finished_at": _utc_now(),
    }


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _float_or_token(token):
    def parse(value):
        if value == token:
            return token
        try:
            return float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number or {token!r}, got {value!r}")
    return parse


def cmd_fit(args):
    started = _utc_now()
    feats, y, names = read_csv_columns(args.data, args.target)
    est = PenalizedCountRegressor(
        penalty=args.penalty, family=args.family, alpha=args.alpha,
        scale=args.scale, fit_intercept=not args.no_intercept,
        standardize=not args.no_standardize, cv=args.cv_folds,
        max_iter=args.max_iter, tol=args.tol, random_state=args.seed)
    est.fit(feats, y)

    family = est._family()
    eta_train = feats @ est.coef_ + est.intercept_
    train_dstar = normalized_deviance(family, y, eta_train)

    config = {
        "data": args.data, "target": args.target, "family": args.family,
        "alpha": args.alpha, "penalty": args.penalty, "scale": args.scale,
        "intercept": not args.no_intercept, "standardize": not args.no_standardize,
        "cv_folds": args.cv_folds, "max_iter": args.max_iter, "tol": args.tol,
        "seed": args.seed,
    }
    payload = {
        "model": {
            "family": args.family,
            "alpha": est.alpha_,
            "penalty": args.penalty,
            "scale": est.scale_,
            "fit_intercept": not args.no_intercept,
            "standardize": not args.no_standardize,
            "target": args.target,
            "feature_names": list(names),
            "intercept": est.intercept_,
            "coefficients": [float(c) for c in est.coef_],
            "coefficients_standardized": [float(c) for c in est.coef_standardized_],
            "column_norms": [float(v) for v in est.column_norms_],
            "support": [names[j] for j in est.support_],
        },
        "training": {
            "n": int(y.shape[0]),
            "normalized_deviance": train_dstar,
            "iterations": est.n_iter_,
            "converged": bool(est.converged_),
        },
        "manifest": _manifest("fit", config, args.seed, started),
    }
    if args.family == "nb":
        payload["model"]["effectively_poisson"] = bool(
            getattr(est, "effectively_poisson_", False))
    if est.cv_result_ is not None:
        payload["cv"] = {
            "grid": [float(v) for v in est.cv_result_.grid],
            "mean_loss": [float(v) for v in est.cv_result_.mean_loss],
            "chosen": float(est.cv_result_.chosen),
        }
    _write_json(args.out, payload)
    if not est.converged_:
        raise ConvergenceError(
            f"solver did not converge in {est.n_iter_} iterations", beta=est.coef_,
            iterations=est.n_iter_)
    return EXIT_OK


def _load_model(path):
    with open(path) as fh:
        payload = json.load(fh)
    if "model" not in payload:
        raise ValidationError(f"{path}: not a model file (missing 'model' section)")
    return payload["model"]


def _model_matrix(model, data_path):
    """Feature matrix for a model from a CSV, matched by column name."""
    target = model.get("target")
    feats, _, names = read_csv_columns(data_path, None)
    missing = [c for c in model["feature_names"] if c not in names]
    if missing:
        raise ValidationError(
            f"{data_path}: columns required by the model are missing: {missing}")
    cols = [names.index(c) for c in model["feature_names"]]
    X = feats[:, cols]
    y = None
    if target is not None and target in names:
        y = feats[:, names.index(target)]
    return X, y


def _predicted_eta(model, X):
    coef = np.asarray(model["coefficients"], dtype=np.float64)
    return X @ coef + float(model["intercept"])


def cmd_predict(args):
    started = _utc_now()
    model = _load_model(args.model)
    X, _ = _model_matrix(model, args.data)
    lam = np.exp(np.clip(_predicted_eta(model, X), -30.0, 30.0))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["predicted_mean"])
        for v in lam:
            writer.writerow([repr(float(v))])
    config = {"model": args.model, "data": args.data}
    _write_json(args.out + ".manifest.json", _manifest("predict", config, None, started))
    return EXIT_OK


def cmd_eval(args):
    started = _utc_now()
    model = _load_model(args.model)
    target = args.target or model.get("target")
    if target is None:
        raise ValidationError("no target column: pass --target or use a model that records one")
    feats, y, names = read_csv_columns(args.data, target)
    missing = [c for c in model["feature_names"] if c not in names]
    if missing:
        raise ValidationError(f"{args.data}: columns required by the model are missing: {missing}")
    X = feats[:, [names.index(c) for c in model["feature_names"]]]
    eta = _predicted_eta(model, X)
    family = family_from_name(model["family"],
                              model.get("alpha") if model["family"] != "poisson" else None)
    kl = total_kl(family, y, eta)
    config = {"model": args.model, "data": args.data, "target": target}
    payload = {
        "n": int(y.shape[0]),
        "family": model["family"],
        "alpha": model.get("alpha"),
        "test_kl": kl,
        "normalized_deviance": 2.0 * kl / y.shape[0],
        "manifest": _manifest("eval", config, None, started),
    }
    _write_json(args.out, payload)
    return EXIT_OK


def write_benchmark_csv(report, path):
    """One record per (design, replicate, method) cell.

    Only seed-deterministic fields are written (wall-clock runtimes stay in
    memory), so identical seeds give byte-identical files.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["design", "replicate", "method", "test_kl", "model_size"])
        for r in report.records:
            writer.writerow([r.design, r.replicate, r.method, repr(r.test_kl), r.model_size])


def cmd_bench(args):
    started = _utc_now()
    import os
    family = family_from_name(args.family, args.alpha if args.family == "nb" else None)
    config = SimConfig(d=args.d, rho=args.rho, epsilon=args.epsilon, family=family,
                       n_train=args.n_train, n_test=args.n_test,
                       n_designs=args.designs, n_replicates=args.replicates,
                       methods=tuple(args.methods), seed=args.seed,
                       cv_folds=args.cv_folds, null_signal=args.null_signal)
    report = run_benchmark(config)
    os.makedirs(args.out, exist_ok=True)
    write_benchmark_csv(report, os.path.join(args.out, "records.csv"))
    config_echo = {
        "d": args.d, "rho": args.rho, "epsilon": args.epsilon, "family": args.family,
        "alpha": args.alpha, "n_train": args.n_train, "n_test": args.n_test,
        "designs": args.designs, "replicates": args.replicates,
        "methods": list(args.methods), "seed": args.seed, "cv_folds": args.cv_folds,
        "null_signal": args.null_signal,
    }
    summary = {
        "config": config_echo,
        "n_records": len(report.records),
        "n_failed": report.n_failed,
        "methods": report.summary(),
    }
    _write_json(os.path.join(args.out, "summary.json"), summary)
    _write_json(os.path.join(args.out, "manifest.json"),
                _manifest("bench", config_echo, args.seed, started))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="countreg",
        description="Sparse count regression: penalized Poisson/negative-binomial "
                    "GLMs, subset selection, and a simulation benchmark.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a penalized count regression from a CSV")
    p_fit.add_argument("--data", required=True, help="CSV file with a header row")
    p_fit.add_argument("--target", required=True, help="name of the count column")
    p_fit.add_argument("--family", choices=["poisson", "nb"], default="poisson")
    p_fit.add_argument("--alpha", type=_float_or_token("auto"), default=None,
                       help="NB dispersion, or 'auto' for a method-of-moments estimate")
    p_fit.add_argument("--penalty", choices=["slope", "lasso"], default="slope")
    p_fit.add_argument("--scale", type=_float_or_token("cv"), default=1.0,
                       help="penalty tuning constant, or 'cv' for cross-validation")
    p_fit.add_argument("--no-intercept", action="store_true")
    p_fit.add_argument("--no-standardize", action="store_true")
    p_fit.add_argument("--cv-folds", type=int, default=5)
    p_fit.add_argument("--max-iter", type=int, default=5000)
    p_fit.add_argument("--tol", type=float, default=1e-8)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out", required=True, help="output model JSON path")
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="per-observation predicted means")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--data", required=True)
    p_pred.add_argument("--out", required=True, help="output CSV path")
    p_pred.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("eval", help="held-out KL divergence and normalized deviance")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--target", default=None)
    p_eval.add_argument("--out", required=True, help="output JSON path")
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", aliases=["simulate"],
                             help="run the simulation benchmark")
    p_bench.add_argument("--d", type=int, required=True)
    p_bench.add_argument("--rho", type=float, default=0.0)
    p_bench.add_argument("--epsilon", type=float, required=True)
    p_bench.add_argument("--family", choices=["poisson", "nb"], default="poisson")
    p_bench.add_argument("--alpha", type=float, default=None)
    p_bench.add_argument("--n-train", type=int, default=200)
    p_bench.add_argument("--n-test", type=int, default=100)
    p_bench.add_argument("--designs", type=int, default=10)
    p_bench.add_argument("--replicates", type=int, default=10)
    p_bench.add_argument("--methods", nargs="+", choices=list(METHODS),
                         default=list(METHODS))
    p_bench.add_argument("--cv-folds", type=int, default=5)
    p_bench.add_argument("--null-signal", action="store_true")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", required=True, help="output directory")
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        diagnostic = {"error": "convergence", "message": str(exc),
                      "iterations": exc.iterations}
        print(json.dumps(diagnostic, sort_keys=True), file=sys.stderr)
        return EXIT_CONVERGENCE
    except NumericalError as exc:
        print(json.dumps({"error": "numerical", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

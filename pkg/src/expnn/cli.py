"""Command-line interface.

Subcommands:

    fit         train one model on a CSV and save it as JSON
    transfer    warm-start a target-phenotype model from a source model
    experiment  replicated grid-search study driven by a JSON config
    synth       draw a synthetic cohort to CSV plus truth/schema sidecars
    curves      sorted-prediction table and plot from saved models
    gradcheck   internal finite-difference self-test

Failures print a single line, error:<category>: <message>, to stderr and
exit with status 1 (2 for command-line usage problems).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .data import load_csv, standardize_covariates
from .errors import ConfigError, DataError, ExpnnError
from .experiment import (ExperimentConfig, compare_transfer, expectile_curve_rows,
                         run_experiment, write_curves_tsv)
from .figures import render_curves_figure, render_report_figure
from .loss import check_gradient
from .model import (EnnConfig, HIDDEN_ACTIVATIONS, MODEL_SCHEMA_VERSION,
                    OUTPUT_ACTIVATIONS, ModelParams, forward_batch, load_model,
                    save_model)
from .optimize import FreezeSpec, minimize
from .synth import SyntheticSpec, generate_synthetic
from .transfer import TransferPlan, transfer_fit

FREEZE_CHOICES = {
    "w1b1": FreezeSpec.first_layer,
    "none": FreezeSpec.none,
    "all": FreezeSpec.everything,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error:usage: {message}", file=sys.stderr)
        self.exit(2)


def _add_model_hyperparams(sub, hidden_default=5):
    sub.add_argument("--tau", type=float, default=0.5,
                     help="expectile level in (0, 1) (default 0.5)")
    sub.add_argument("--lambda", dest="lam", type=float, default=0.0,
                     help="ridge penalty on the weight matrices (default 0)")
    sub.add_argument("--hidden", type=int, default=hidden_default,
                     help=f"hidden units (default {hidden_default})")
    sub.add_argument("--hidden-activation", choices=HIDDEN_ACTIVATIONS,
                     default="relu")
    sub.add_argument("--output-activation", choices=OUTPUT_ACTIVATIONS,
                     default="identity")
    sub.add_argument("--max-epochs", type=int, default=1000)
    sub.add_argument("--grad-tolerance", type=float, default=1e-6)
    sub.add_argument("--seed", type=int, default=0)


def _add_data_args(sub):
    sub.add_argument("--data", required=True, help="CSV file")
    sub.add_argument("--schema", required=True, help="schema JSON file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="expnn",
                     description="expectile neural networks with parameter transfer")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p_fit = sub.add_parser("fit", help="train one model and save it")
    _add_data_args(p_fit)
    p_fit.add_argument("--phenotype", required=True)
    _add_model_hyperparams(p_fit)
    p_fit.add_argument("--out-model", required=True, help="output model JSON path")
    p_fit.set_defaults(func=cmd_fit)

    p_tf = sub.add_parser("transfer", help="warm-start a target model from a source")
    _add_data_args(p_tf)
    p_tf.add_argument("--target-phenotype", required=True)
    p_tf.add_argument("--source-model", help="existing source model JSON")
    p_tf.add_argument("--source-phenotype",
                      help="fit the source now from this phenotype")
    p_tf.add_argument("--freeze", choices=sorted(FREEZE_CHOICES), default="w1b1")
    p_tf.add_argument("--no-warm-start", action="store_true",
                      help="start the target fit from a fresh initialization")
    _add_model_hyperparams(p_tf)
    p_tf.add_argument("--out-model", required=True)
    p_tf.set_defaults(func=cmd_transfer)

    p_exp = sub.add_parser("experiment", help="replicated grid-search study")
    p_exp.add_argument("--config", required=True, help="experiment config JSON")
    p_exp.set_defaults(func=cmd_experiment)

    p_synth = sub.add_parser("synth", help="generate a synthetic cohort")
    p_synth.add_argument("--spec", required=True, help="synthetic spec JSON")
    p_synth.add_argument("--out-dir", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_curves = sub.add_parser("curves", help="expectile curves from saved models")
    p_curves.add_argument("--models", required=True,
                          help="directory of model JSON files, one per tau")
    _add_data_args(p_curves)
    p_curves.add_argument("--out-dir", required=True)
    p_curves.set_defaults(func=cmd_curves)

    p_gc = sub.add_parser("gradcheck", help="finite-difference self-test")
    p_gc.add_argument("--seed", type=int, default=20240811)
    p_gc.set_defaults(func=cmd_gradcheck)
    return parser


def _scaler_meta(scaler) -> dict:
    return {
        "covariate_indices": [int(i) for i in scaler.covariate_indices],
        "mean": [float(v) for v in scaler.mean],
        "scale": [float(v) for v in scaler.scale],
    }


def _apply_scaler_meta(meta, X: np.ndarray) -> np.ndarray:
    std = (meta or {}).get("standardization")
    if not std or not std.get("covariate_indices"):
        return X
    idx = np.asarray(std["covariate_indices"], dtype=int)
    if idx.size and idx.max() >= X.shape[1]:
        raise DataError("model standardization refers to columns the data lacks")
    X = np.array(X)
    X[:, idx] = (X[:, idx] - np.asarray(std["mean"])) / np.asarray(std["scale"])
    return X


def _cfg_from_args(args, hidden=None) -> EnnConfig:
    return EnnConfig(tau=args.tau, lam=args.lam,
                     hidden_units=args.hidden if hidden is None else hidden,
                     hidden_activation=args.hidden_activation,
                     output_activation=args.output_activation,
                     max_epochs=args.max_epochs,
                     grad_tolerance=args.grad_tolerance,
                     seed=args.seed)


def cmd_fit(args) -> int:
    dataset = load_csv(args.data, args.schema)
    scaler, dataset = standardize_covariates(dataset)[:2]
    y = dataset.phenotype(args.phenotype)
    cfg = _cfg_from_args(args)
    report = minimize(cfg, dataset.X, y)
    meta = {
        "phenotype": args.phenotype,
        "n": dataset.n,
        "columns": [c.name for c in dataset.columns],
        "standardization": _scaler_meta(scaler),
        "iterations": report.iterations,
        "termination": report.termination,
        "risk_empirical": report.risk.empirical,
        "risk_penalty": report.risk.penalty,
    }
    save_model(args.out_model, report.params, cfg, meta)
    print(f"wrote {args.out_model} (risk {report.risk.total:.6g}, "
          f"{report.iterations} iterations, {report.termination})")
    return 0


def cmd_transfer(args) -> int:
    if bool(args.source_model) == bool(args.source_phenotype):
        raise ConfigError("give exactly one of --source-model or --source-phenotype")
    dataset = load_csv(args.data, args.schema)

    if args.source_model:
        loaded = load_model(args.source_model)
        X = _apply_scaler_meta(loaded.training_meta, dataset.X)
        source_params = loaded.params
        source_name = (loaded.training_meta or {}).get("phenotype", "source")
        hidden = loaded.params.q
        std_meta = (loaded.training_meta or {}).get("standardization")
    else:
        scaler, dataset = standardize_covariates(dataset)[:2]
        X = dataset.X
        source_name = args.source_phenotype
        src_report = minimize(_cfg_from_args(args), X,
                              dataset.phenotype(args.source_phenotype))
        source_params = src_report.params
        hidden = args.hidden
        std_meta = _scaler_meta(scaler)

    plan = TransferPlan(source_phenotype=source_name,
                        target_phenotype=args.target_phenotype,
                        freeze=FREEZE_CHOICES[args.freeze](),
                        reuse_as_warm_start=not args.no_warm_start)
    cfg = _cfg_from_args(args, hidden=hidden)
    report = transfer_fit(cfg, X, dataset.phenotype(args.target_phenotype),
                          source_params, plan)
    meta = {
        "phenotype": args.target_phenotype,
        "n": dataset.n,
        "columns": [c.name for c in dataset.columns],
        "standardization": std_meta,
        "iterations": report.iterations,
        "termination": report.termination,
        "risk_empirical": report.risk.empirical,
        "risk_penalty": report.risk.penalty,
        "transfer": {"source_phenotype": source_name, "freeze": args.freeze,
                     "warm_start": not args.no_warm_start},
    }
    save_model(args.out_model, report.params, cfg, meta)
    print(f"wrote {args.out_model} (risk {report.risk.total:.6g}, "
          f"{report.iterations} iterations, {report.termination})")
    return 0


def _experiment_config(raw: dict):
    if not isinstance(raw, dict):
        raise ConfigError("experiment config must be a JSON object")
    if ("data" in raw) == ("synthetic" in raw):
        raise ConfigError("config needs exactly one of 'data' or 'synthetic'")
    if "data" in raw:
        block = raw["data"]
        for key in ("csv", "schema"):
            if key not in block:
                raise ConfigError(f"config 'data' block needs '{key}'")
        dataset = load_csv(block["csv"], block["schema"])
    else:
        dataset, _ = generate_synthetic(SyntheticSpec.from_dict(raw["synthetic"]))

    plan = None
    if raw.get("transfer") is not None:
        t = raw["transfer"]
        freeze_name = t.get("freeze", "w1b1")
        if freeze_name not in FREEZE_CHOICES:
            raise ConfigError(f"unknown freeze choice '{freeze_name}'; "
                              f"choose from {sorted(FREEZE_CHOICES)}")
        try:
            plan = TransferPlan(source_phenotype=t["source_phenotype"],
                                target_phenotype=t["target_phenotype"],
                                freeze=FREEZE_CHOICES[freeze_name](),
                                reuse_as_warm_start=t.get("reuse_as_warm_start", True))
        except KeyError as exc:
            raise ConfigError(f"config 'transfer' block needs {exc}")

    phenotype = raw.get("phenotype")
    if phenotype is None and plan is not None:
        phenotype = plan.target_phenotype
    if phenotype is None:
        raise ConfigError("config needs 'phenotype' (or a 'transfer' block)")

    kwargs = {"phenotype": phenotype, "transfer_plan": plan}
    for key, cast in (("tau_levels", tuple), ("lambda_grid", tuple),
                      ("hidden_grid", tuple), ("replicates", int),
                      ("master_seed", int), ("hidden_activation", str),
                      ("output_activation", str), ("max_epochs", int),
                      ("grad_tolerance", float)):
        if key in raw:
            kwargs[key] = cast(raw[key])
    config = ExperimentConfig(**kwargs)

    output_dir = raw.get("output_dir")
    if not output_dir:
        raise ConfigError("config needs 'output_dir'")
    known = {"data", "synthetic", "transfer", "phenotype", "output_dir",
             "tau_levels", "lambda_grid", "hidden_grid", "replicates",
             "master_seed", "hidden_activation", "output_activation",
             "max_epochs", "grad_tolerance"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config fields: {unknown}")
    return dataset, config, output_dir


def cmd_experiment(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
    dataset, config, output_dir = _experiment_config(raw)
    runner = compare_transfer if config.paired else run_experiment
    report = runner(dataset, config)
    paths = report.write(output_dir)
    paths["figure"] = render_report_figure(
        report, os.path.join(output_dir, "report.png"))
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return 0


def cmd_synth(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"spec is not valid JSON: {exc}")
    dataset, truth = generate_synthetic(SyntheticSpec.from_dict(raw))
    os.makedirs(args.out_dir, exist_ok=True)

    csv_path = os.path.join(args.out_dir, "synthetic.csv")
    snp_names = [c.name for c in dataset.columns]
    pheno_names = sorted(dataset.y_columns)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(snp_names + pheno_names)
        for i in range(dataset.n):
            row = [str(int(g)) for g in dataset.X[i]]
            row += [repr(float(dataset.y_columns[name][i])) for name in pheno_names]
            writer.writerow(row)

    schema_path = os.path.join(args.out_dir, "schema.json")
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump({"phenotypes": pheno_names, "covariates": [],
                   "snps": "auto-remaining"}, fh, indent=1)
        fh.write("\n")
    truth_path = os.path.join(args.out_dir, "truth.json")
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=1)
        fh.write("\n")
    for path in (csv_path, schema_path, truth_path):
        print(f"wrote {path}")
    return 0


def cmd_curves(args) -> int:
    model_paths = sorted(
        os.path.join(args.models, name)
        for name in os.listdir(args.models) if name.endswith(".json"))
    if not model_paths:
        raise DataError(f"no model JSON files in {args.models}")
    dataset = load_csv(args.data, args.schema)
    predictions = {}
    for path in model_paths:
        loaded = load_model(path)
        tau = loaded.config.tau
        if tau in predictions:
            raise DataError(f"two models share tau={tau:g}; keep one per level")
        X = _apply_scaler_meta(loaded.training_meta, dataset.X)
        predictions[tau] = forward_batch(loaded.params, loaded.config, X)
    rows = expectile_curve_rows(predictions)
    os.makedirs(args.out_dir, exist_ok=True)
    tsv_path = os.path.join(args.out_dir, "curves.tsv")
    write_curves_tsv(tsv_path, rows)
    fig_path = render_curves_figure(rows, os.path.join(args.out_dir, "curves.png"))
    print(f"wrote {tsv_path}")
    print(f"wrote {fig_path}")
    return 0


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    n, p, q = 9, 3, 4
    failures = 0
    for hidden in HIDDEN_ACTIVATIONS:
        for output in OUTPUT_ACTIVATIONS:
            X = rng.normal(0.0, 1.0, (n, p))
            y = rng.normal(0.0, 1.0, n)
            params = ModelParams(w1=rng.normal(0.0, 0.7, (p, q)),
                                 b1=rng.normal(0.0, 0.3, q),
                                 w2=rng.normal(0.0, 0.7, q),
                                 b2=float(rng.normal(0.0, 0.3)))
            cfg = EnnConfig(tau=0.3, lam=0.5, hidden_units=q,
                            hidden_activation=hidden, output_activation=output)
            rep = check_gradient(params, cfg, X, y)
            status = "PASS" if rep.passed else "FAIL"
            if not rep.passed:
                failures += 1
            print(f"gradcheck {hidden}/{output}: "
                  f"max_rel_error={rep.max_rel_error:.3e} {status}")
    if failures:
        print(f"error:internal: {failures} gradient checks failed", file=sys.stderr)
        return 1
    print("all gradient checks passed")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExpnnError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

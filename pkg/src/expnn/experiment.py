"""Replicated train/validate/test experiments with optional transfer arm.

Each replicate draws a fresh 3:1:1 split, standardizes covariates on the
training portion, and for every expectile level runs a grid search over
(penalty, hidden units). Model selection uses the mean asymmetric loss on the
validation set; reported errors are classical train and test MSE. When a
transfer plan is present, a paired transfer arm is run on identical splits:
for each candidate (penalty, hidden units) the source task is fitted first
and the target fit starts from it under the plan's freeze rules.

Output tables are tab-separated with a header row and numbers rendered with
six significant digits, so a rerun of the same configuration reproduces the
files byte for byte.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, split, standardize_covariates
from .errors import ConfigError, DataError
from .model import (EnnConfig, HIDDEN_ACTIVATIONS, OUTPUT_ACTIVATIONS,
                    forward_batch)
from .optimize import minimize
from .seeding import ROLE_INIT, ROLE_SOURCE, rng_for, seed_for
from .transfer import TransferPlan, transfer_fit

DEFAULT_TAU_LEVELS = (0.1, 0.25, 0.5, 0.75, 0.9)
DEFAULT_LAMBDA_GRID = (0.0, 0.1, 1.0, 10.0, 100.0)
DEFAULT_HIDDEN_GRID = (3, 5, 10)
NEGATIVE_TRANSFER_RATIO = 1.05
WORKERS_ENV_VAR = "EXPNN_WORKERS"


def mse(y, yhat) -> float:
    """Classical mean squared error."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise DataError(f"shape mismatch: y {y.shape} vs yhat {yhat.shape}")
    if y.size == 0:
        raise DataError("mse needs at least one observation")
    d = y - yhat
    return float(np.mean(d * d))


def mean_expectile_loss(tau: float, y, yhat) -> float:
    """Mean asymmetric squared loss, the validation-selection criterion."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    r = y - yhat
    w = np.where(y < yhat, 1.0 - tau, tau)
    return float(np.mean(w * r * r))


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one replicated experiment."""

    phenotype: str
    tau_levels: tuple = DEFAULT_TAU_LEVELS
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    hidden_grid: tuple = DEFAULT_HIDDEN_GRID
    replicates: int = 50
    master_seed: int = 0
    transfer_plan: TransferPlan = None
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    max_epochs: int = 1000
    grad_tolerance: float = 1e-6

    def __post_init__(self):
        if not self.phenotype:
            raise ConfigError("experiment needs a phenotype name")
        taus = tuple(float(t) for t in self.tau_levels)
        if not taus or any(not (0.0 < t < 1.0) for t in taus):
            raise ConfigError(f"tau levels must lie strictly inside (0, 1), got {taus}")
        lams = tuple(float(l) for l in self.lambda_grid)
        if not lams or any(l < 0.0 for l in lams):
            raise ConfigError(f"lambda grid must be non-negative, got {lams}")
        hidden = tuple(int(q) for q in self.hidden_grid)
        if not hidden or any(q < 1 for q in hidden):
            raise ConfigError(f"hidden grid must contain positive sizes, got {hidden}")
        object.__setattr__(self, "tau_levels", taus)
        object.__setattr__(self, "lambda_grid", lams)
        object.__setattr__(self, "hidden_grid", hidden)
        if self.replicates < 1:
            raise ConfigError(f"replicates must be at least 1, got {self.replicates}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ConfigError(f"unknown hidden activation '{self.hidden_activation}'")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigError(f"unknown output activation '{self.output_activation}'")
        if self.transfer_plan is not None \
                and self.transfer_plan.target_phenotype != self.phenotype:
            raise ConfigError(
                f"transfer plan targets '{self.transfer_plan.target_phenotype}' but "
                f"the experiment phenotype is '{self.phenotype}'")

    @property
    def paired(self) -> bool:
        return self.transfer_plan is not None


@dataclass(frozen=True)
class ArmResult:
    """Selected model of one arm in one (replicate, tau) cell."""

    arm: str  # "scratch" or "transfer"
    lam: float
    hidden_units: int
    val_loss: float
    train_mse: float
    test_mse: float
    iterations: int
    termination: str


@dataclass(frozen=True)
class CellResult:
    """One (replicate, tau) cell: the scratch arm and optionally its pair."""

    replicate: int
    tau: float
    scratch: ArmResult
    transfer: ArmResult = None

    @property
    def negative_transfer(self) -> bool:
        """Transfer hurt: paired test MSE exceeds scratch by more than 5%."""
        if self.transfer is None:
            return False
        return self.transfer.test_mse > NEGATIVE_TRANSFER_RATIO * self.scratch.test_mse


def select_hyperparams(candidates):
    """Pick the best grid cell from (val_loss, lam, hidden_units, payload) tuples.

    Smaller validation loss wins; exact ties fall to the larger penalty, then
    to the smaller hidden size, so selection never depends on grid order.
    """
    best = None
    for cand in candidates:
        if best is None:
            best = cand
            continue
        loss, lam, q = cand[0], cand[1], cand[2]
        b_loss, b_lam, b_q = best[0], best[1], best[2]
        if loss < b_loss or (loss == b_loss and
                             (lam > b_lam or (lam == b_lam and q < b_q))):
            best = cand
    if best is None:
        raise ConfigError("select_hyperparams needs at least one candidate")
    return best


def _grid_configs(config: ExperimentConfig, tau: float, seed: int):
    for lam in config.lambda_grid:
        for q in config.hidden_grid:
            yield EnnConfig(tau=tau, lam=lam, hidden_units=q,
                            hidden_activation=config.hidden_activation,
                            output_activation=config.output_activation,
                            max_epochs=config.max_epochs,
                            grad_tolerance=config.grad_tolerance,
                            seed=seed)


def _arm_result(arm, cfg, report, val_loss, train_X, y_train, test_X, y_test):
    pred_train = forward_batch(report.params, cfg, train_X)
    pred_test = forward_batch(report.params, cfg, test_X)
    return ArmResult(arm=arm, lam=cfg.lam, hidden_units=cfg.hidden_units,
                     val_loss=val_loss,
                     train_mse=mse(y_train, pred_train),
                     test_mse=mse(y_test, pred_test),
                     iterations=report.iterations,
                     termination=report.termination)


def run_replicate(dataset: Dataset, config: ExperimentConfig, r: int):
    """All (tau, arm) fits for replicate r. Returns a list of CellResult."""
    sp = split(dataset.n, rng_for(config.master_seed, r))
    _, train, valid, test = standardize_covariates(
        dataset.take(sp.train), dataset.take(sp.valid), dataset.take(sp.test))
    y_train = train.phenotype(config.phenotype)
    y_valid = valid.phenotype(config.phenotype)
    y_test = test.phenotype(config.phenotype)
    plan = config.transfer_plan
    if plan is not None:
        y_src_train = train.phenotype(plan.source_phenotype)

    cells = []
    for ti, tau in enumerate(config.tau_levels):
        init_seed = seed_for(config.master_seed, r, ti, ROLE_INIT)
        source_seed = seed_for(config.master_seed, r, ti, ROLE_SOURCE)

        scratch_cands = []
        for cfg in _grid_configs(config, tau, init_seed):
            report = minimize(cfg, train.X, y_train)
            val_loss = mean_expectile_loss(
                tau, y_valid, forward_batch(report.params, cfg, valid.X))
            scratch_cands.append((val_loss, cfg.lam, cfg.hidden_units, cfg, report))
        val_loss, _, _, cfg, report = select_hyperparams(scratch_cands)
        scratch = _arm_result("scratch", cfg, report, val_loss,
                              train.X, y_train, test.X, y_test)

        transfer = None
        if plan is not None:
            tf_cands = []
            for cfg in _grid_configs(config, tau, init_seed):
                # The source model is fitted at the same (penalty, hidden
                # units) as the target candidate that will start from it.
                src_cfg = replace(cfg, seed=source_seed)
                src_report = minimize(src_cfg, train.X, y_src_train)
                tf_report = transfer_fit(cfg, train.X, y_train,
                                         src_report.params, plan)
                val_loss = mean_expectile_loss(
                    tau, y_valid, forward_batch(tf_report.params, cfg, valid.X))
                tf_cands.append((val_loss, cfg.lam, cfg.hidden_units, cfg, tf_report))
            val_loss, _, _, cfg, tf_report = select_hyperparams(tf_cands)
            transfer = _arm_result("transfer", cfg, tf_report, val_loss,
                                   train.X, y_train, test.X, y_test)
        cells.append(CellResult(replicate=r, tau=tau, scratch=scratch,
                                transfer=transfer))
    return cells


def _replicate_worker(payload):
    dataset, config, r = payload
    return run_replicate(dataset, config, r)


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV_VAR, "").strip()
    if not raw:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got '{raw}'")
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be at least 1, got {workers}")
    return workers


@dataclass(frozen=True)
class ExperimentReport:
    """All cells of a finished experiment plus the aggregate views."""

    config: ExperimentConfig
    cells: tuple

    def tau_cells(self, tau: float):
        return [c for c in self.cells if c.tau == tau]

    def aggregate(self):
        """Per-tau mean train/test MSE for each arm, transfer columns first."""
        rows = []
        for tau in self.config.tau_levels:
            cells = self.tau_cells(tau)
            row = {"tau": tau}
            if self.config.paired:
                row["enn_tf_train_mse"] = float(np.mean([c.transfer.train_mse for c in cells]))
                row["enn_tf_test_mse"] = float(np.mean([c.transfer.test_mse for c in cells]))
            row["enn_train_mse"] = float(np.mean([c.scratch.train_mse for c in cells]))
            row["enn_test_mse"] = float(np.mean([c.scratch.test_mse for c in cells]))
            rows.append(row)
        return rows

    def transfer_flags(self):
        """Per-tau negative-transfer summary (paired experiments only)."""
        if not self.config.paired:
            return []
        rows = []
        for tau in self.config.tau_levels:
            cells = self.tau_cells(tau)
            mean_tf = float(np.mean([c.transfer.test_mse for c in cells]))
            mean_scratch = float(np.mean([c.scratch.test_mse for c in cells]))
            rows.append({
                "tau": tau,
                "flagged_fraction": float(np.mean([c.negative_transfer for c in cells])),
                "mean_tf_test_mse": mean_tf,
                "mean_scratch_test_mse": mean_scratch,
                "flag": int(mean_tf > NEGATIVE_TRANSFER_RATIO * mean_scratch),
            })
        return rows

    def replicate_rows(self):
        """Flat per-(replicate, tau, arm) detail rows."""
        rows = []
        for c in self.cells:
            arms = [c.scratch] + ([c.transfer] if c.transfer is not None else [])
            for a in arms:
                rows.append({
                    "replicate": c.replicate, "tau": c.tau, "arm": a.arm,
                    "lambda": a.lam, "hidden_units": a.hidden_units,
                    "val_loss": a.val_loss, "train_mse": a.train_mse,
                    "test_mse": a.test_mse, "iterations": a.iterations,
                    "termination": a.termination,
                    "negative_transfer": int(c.negative_transfer) if a.arm == "transfer" else 0,
                })
        return rows

    def write(self, output_dir) -> dict:
        """Write report.tsv, replicates.tsv, and (when paired)
        transfer_flags.tsv into output_dir. Returns {name: path}."""
        os.makedirs(output_dir, exist_ok=True)
        paths = {}
        agg = self.aggregate()
        paths["report"] = os.path.join(output_dir, "report.tsv")
        write_tsv(paths["report"], list(agg[0].keys()), agg)
        rep = self.replicate_rows()
        paths["replicates"] = os.path.join(output_dir, "replicates.tsv")
        write_tsv(paths["replicates"], list(rep[0].keys()), rep)
        if self.config.paired:
            flags = self.transfer_flags()
            paths["transfer_flags"] = os.path.join(output_dir, "transfer_flags.tsv")
            write_tsv(paths["transfer_flags"], list(flags[0].keys()), flags)
        return paths


def run_experiment(dataset: Dataset, config: ExperimentConfig) -> ExperimentReport:
    """Run every replicate, serially or under EXPNN_WORKERS processes.

    Results are collected in replicate order either way, so the report (and
    the files written from it) never depends on scheduling.
    """
    if config.phenotype not in dataset.y_columns:
        raise DataError(f"dataset has no phenotype '{config.phenotype}'")
    if config.paired and config.transfer_plan.source_phenotype not in dataset.y_columns:
        raise DataError(
            f"dataset has no phenotype '{config.transfer_plan.source_phenotype}'")
    workers = _worker_count()
    cells = []
    if workers > 1:
        payloads = [(dataset, config, r) for r in range(config.replicates)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(_replicate_worker, payloads):
                cells.extend(result)
    else:
        for r in range(config.replicates):
            cells.extend(run_replicate(dataset, config, r))
    return ExperimentReport(config=config, cells=tuple(cells))


def compare_transfer(dataset: Dataset, config: ExperimentConfig) -> ExperimentReport:
    """Paired scratch-versus-transfer experiment; requires a transfer plan."""
    if config.transfer_plan is None:
        raise ConfigError("compare_transfer needs a config with a transfer_plan")
    return run_experiment(dataset, config)


def format_value(v) -> str:
    """One TSV field: floats at six significant digits, the rest verbatim."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "%.6g" % v
    return str(v)


def write_tsv(path, header, rows) -> None:
    """rows: list of dicts keyed by header names."""
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(format_value(row[h]) for h in header))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def expectile_curve_rows(predictions: dict):
    """Sorted-prediction table for plotting expectile curves.

    predictions maps tau to a vector of model outputs on a common input set.
    Returns dicts with rank (1-based), tau, and value, where value is the
    rank-th smallest prediction at that tau; rows are ordered by tau then
    rank. All prediction vectors must have equal length.
    """
    if not predictions:
        raise ConfigError("expectile_curve_rows needs at least one tau level")
    taus = sorted(predictions)
    lengths = {len(np.asarray(predictions[t]).ravel()) for t in taus}
    if len(lengths) != 1:
        raise DataError(f"prediction vectors differ in length: {sorted(lengths)}")
    rows = []
    for tau in taus:
        values = np.sort(np.asarray(predictions[tau], dtype=float).ravel())
        for rank, value in enumerate(values, start=1):
            rows.append({"rank": rank, "tau": float(tau), "value": float(value)})
    return rows


def write_curves_tsv(path, rows) -> None:
    write_tsv(path, ["rank", "tau", "value"], rows)

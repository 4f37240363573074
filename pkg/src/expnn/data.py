"""Loading, splitting, and standardizing tabular genotype/phenotype data.

Input is a UTF-8 CSV with a header row, comma delimiter, and the literal
string NA for missing values. A JSON schema names the columns:

    {
      "phenotypes": ["height", "weight"],
      "covariates": ["age", "sex"],
      "snps": "auto-remaining"          # or an explicit list of column names
    }

Missing-value policy, column by column:

* phenotype NA drops the whole row (the count is logged),
* covariate NA is an error (covariates must be complete),
* SNP NA is imputed with the column mode, ties going to the smaller genotype.

SNP values must be 0, 1, or 2 (minor-allele dosage). Columns that are
constant after imputation carry no information and are dropped with a
warning.
"""
from __future__ import annotations

import csv
import json
import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

logger = logging.getLogger("expnn")

NA_SENTINEL = "NA"
SNP_VALUES = (0, 1, 2)
_SD_FLOOR = 1e-8


@dataclass(frozen=True)
class ColumnMeta:
    """Description of one design-matrix column."""

    name: str
    kind: str  # "covariate" or "snp"
    n_imputed: int = 0


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix plus one response vector per phenotype.

    X has covariate columns first (schema order), then SNP columns. columns
    holds one ColumnMeta per X column in the same order.
    """

    X: np.ndarray
    y_columns: dict
    columns: tuple
    dropped_constant: tuple = ()
    n_dropped_rows: int = 0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise DataError(f"X must be 2-d, got shape {X.shape}")
        if len(self.columns) != X.shape[1]:
            raise DataError(
                f"{len(self.columns)} column descriptions for {X.shape[1]} columns")
        X = X.copy()
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        ys = {}
        for name, y in self.y_columns.items():
            y = np.asarray(y, dtype=float).copy()
            if y.shape != (X.shape[0],):
                raise DataError(
                    f"phenotype '{name}' has {y.shape} values for {X.shape[0]} rows")
            y.setflags(write=False)
            ys[name] = y
        object.__setattr__(self, "y_columns", ys)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def covariate_indices(self) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.columns) if c.kind == "covariate"],
                        dtype=int)

    def phenotype(self, name: str) -> np.ndarray:
        if name not in self.y_columns:
            raise DataError(f"unknown phenotype '{name}'; "
                            f"available: {sorted(self.y_columns)}")
        return self.y_columns[name]

    def take(self, indices) -> "Dataset":
        """Row subset, preserving column metadata."""
        indices = np.asarray(indices, dtype=int)
        return Dataset(X=self.X[indices],
                       y_columns={k: v[indices] for k, v in self.y_columns.items()},
                       columns=self.columns,
                       dropped_constant=self.dropped_constant,
                       n_dropped_rows=0)


def load_schema(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            schema = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"schema is not valid JSON: {exc}")
    return validate_schema(schema)


def validate_schema(schema) -> dict:
    if not isinstance(schema, dict):
        raise DataError("schema must be a JSON object")
    phenotypes = schema.get("phenotypes")
    if not isinstance(phenotypes, list) or not phenotypes \
            or not all(isinstance(s, str) for s in phenotypes):
        raise DataError("schema requires a non-empty 'phenotypes' list of column names")
    covariates = schema.get("covariates", [])
    if not isinstance(covariates, list) or not all(isinstance(s, str) for s in covariates):
        raise DataError("'covariates' must be a list of column names")
    snps = schema.get("snps", "auto-remaining")
    if snps != "auto-remaining" and (
            not isinstance(snps, list) or not all(isinstance(s, str) for s in snps)):
        raise DataError("'snps' must be \"auto-remaining\" or a list of column names")
    named = phenotypes + covariates + (snps if isinstance(snps, list) else [])
    dupes = sorted({n for n in named if named.count(n) > 1})
    if dupes:
        raise DataError(f"columns assigned to more than one role: {dupes}")
    return {"phenotypes": list(phenotypes), "covariates": list(covariates),
            "snps": snps if snps == "auto-remaining" else list(snps)}


def _parse_float(value: str, column: str, row: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise DataError(f"column '{column}', data row {row}: "
                        f"cannot parse '{value}' as a number")


def load_csv(path, schema) -> Dataset:
    """Read a CSV against a schema (dict or path of a schema JSON file)."""
    if isinstance(schema, (str, bytes)) or hasattr(schema, "__fspath__"):
        schema = load_schema(schema)
    else:
        schema = validate_schema(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty, expected a header row")
        rows = [row for row in reader if row]
    header = [h.strip() for h in header]
    dupes = sorted({h for h in header if header.count(h) > 1})
    if dupes:
        raise DataError(f"duplicate column names in header: {dupes}")
    col_index = {name: i for i, name in enumerate(header)}

    for role, names in (("phenotype", schema["phenotypes"]),
                        ("covariate", schema["covariates"]),
                        ("snp", schema["snps"] if isinstance(schema["snps"], list) else [])):
        for name in names:
            if name not in col_index:
                raise DataError(f"{role} column '{name}' not found in the CSV header")

    phenotypes = schema["phenotypes"]
    covariates = schema["covariates"]
    if schema["snps"] == "auto-remaining":
        assigned = set(phenotypes) | set(covariates)
        snps = [name for name in header if name not in assigned]
    else:
        snps = schema["snps"]

    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"data row {r} has {len(row)} fields, header has {len(header)}")

    # Phenotypes first: a missing response drops the row outright.
    keep = []
    for r, row in enumerate(rows, start=1):
        if all(row[col_index[name]].strip() != NA_SENTINEL for name in phenotypes):
            keep.append(r - 1)
    n_dropped = len(rows) - len(keep)
    if n_dropped:
        logger.warning("dropped %d of %d rows with missing phenotype values",
                       n_dropped, len(rows))
    if not keep:
        raise DataError("no rows remain after dropping rows with missing phenotypes")

    y_columns = {}
    for name in phenotypes:
        j = col_index[name]
        y_columns[name] = np.array(
            [_parse_float(rows[i][j].strip(), name, i + 1) for i in keep])

    feature_cols = []  # (ColumnMeta, values array)
    for name in covariates:
        j = col_index[name]
        values = np.empty(len(keep))
        for out_i, i in enumerate(keep):
            v = rows[i][j].strip()
            if v == NA_SENTINEL:
                raise DataError(f"covariate '{name}' is missing at data row {i + 1}; "
                                "covariates must be complete")
            values[out_i] = _parse_float(v, name, i + 1)
        feature_cols.append((ColumnMeta(name=name, kind="covariate"), values))

    for name in snps:
        j = col_index[name]
        raw = []
        for i in keep:
            v = rows[i][j].strip()
            if v == NA_SENTINEL:
                raw.append(None)
                continue
            try:
                g = int(v)
            except ValueError:
                raise DataError(f"SNP column '{name}', data row {i + 1}: "
                                f"'{v}' is not an integer genotype")
            if g not in SNP_VALUES:
                raise DataError(f"SNP column '{name}', data row {i + 1}: "
                                f"genotype {g} is outside {{0, 1, 2}}")
            raw.append(g)
        observed = [g for g in raw if g is not None]
        if not observed:
            raise DataError(f"SNP column '{name}' is entirely missing")
        counts = Counter(observed)
        top = max(counts.values())
        mode = min(g for g, c in counts.items() if c == top)
        n_imputed = sum(1 for g in raw if g is None)
        values = np.array([float(mode if g is None else g) for g in raw])
        feature_cols.append((ColumnMeta(name=name, kind="snp", n_imputed=n_imputed),
                             values))

    kept_cols = []
    dropped_constant = []
    for meta, values in feature_cols:
        if np.all(values == values[0]):
            dropped_constant.append(meta.name)
            warnings.warn(f"dropping constant column '{meta.name}'")
        else:
            kept_cols.append((meta, values))
    if not kept_cols:
        raise DataError("no informative feature columns remain")

    X = np.column_stack([values for _, values in kept_cols])
    return Dataset(X=X,
                   y_columns=y_columns,
                   columns=tuple(meta for meta, _ in kept_cols),
                   dropped_constant=tuple(dropped_constant),
                   n_dropped_rows=n_dropped)


def split_sizes(n: int) -> tuple:
    """Train/validation/test sizes in 3:1:1 proportion.

    train = ceil(3n/5), valid = floor(n/5), test = the remainder. Each size
    stays within one sample of the exact fractional target for every n.
    """
    if n < 1:
        raise DataError(f"n must be at least 1, got {n}")
    train = -((-3 * n) // 5)
    valid = n // 5
    return train, valid, n - train - valid


@dataclass(frozen=True, eq=False)
class SplitSpec:
    """Disjoint row indices for the three partitions."""

    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "valid", "test"):
            idx = np.asarray(getattr(self, name), dtype=int).copy()
            idx.setflags(write=False)
            object.__setattr__(self, name, idx)


def split(n: int, seed) -> SplitSpec:
    """Random 3:1:1 partition of range(n).

    seed may be an int, a SeedSequence, or a Generator; the same seed always
    yields the same partition.
    """
    n_train, n_valid, n_test = split_sizes(n)
    if min(n_train, n_valid, n_test) < 1:
        raise DataError(f"n={n} is too small for a 3:1:1 split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    return SplitSpec(train=perm[:n_train],
                     valid=perm[n_train:n_train + n_valid],
                     test=perm[n_train + n_valid:])


@dataclass(frozen=True, eq=False)
class CovariateScaler:
    """Center/scale parameters for the covariate columns of a design matrix.

    Scaling uses the population standard deviation (ddof 0), floored at 1e-8
    to stay finite on near-constant columns. SNP columns pass through
    untouched.
    """

    mean: np.ndarray
    scale: np.ndarray
    covariate_indices: np.ndarray

    @classmethod
    def fit(cls, dataset: Dataset) -> "CovariateScaler":
        idx = dataset.covariate_indices
        if idx.size == 0:
            return cls(mean=np.empty(0), scale=np.empty(0), covariate_indices=idx)
        cols = dataset.X[:, idx]
        mean = cols.mean(axis=0)
        scale = np.maximum(cols.std(axis=0), _SD_FLOOR)
        return cls(mean=mean, scale=scale, covariate_indices=idx)

    def transform(self, dataset: Dataset) -> Dataset:
        if self.covariate_indices.size == 0:
            return dataset
        X = np.array(dataset.X)
        X[:, self.covariate_indices] = \
            (X[:, self.covariate_indices] - self.mean) / self.scale
        return Dataset(X=X, y_columns=dict(dataset.y_columns), columns=dataset.columns,
                       dropped_constant=dataset.dropped_constant,
                       n_dropped_rows=dataset.n_dropped_rows)


def standardize_covariates(train: Dataset, *others: Dataset):
    """Fit scaling on the training set and apply it to every given dataset.

    Returns (scaler, transformed_train, *transformed_others).
    """
    scaler = CovariateScaler.fit(train)
    return (scaler, scaler.transform(train)) + tuple(scaler.transform(d) for d in others)

"""Synthetic genotype/phenotype generator with a controllable amount of
shared signal between two tasks.

Genotypes are minor-allele dosages drawn per SNP as Binomial(2, maf). Each of
the two phenotypes depends on k causal SNPs through sparse nonlinear bases; a
configurable fraction of those SNPs (with their basis functions and
coefficients) is shared between the tasks, which is the lever that makes
parameter transfer helpful (fraction near 1) or useless (fraction 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ColumnMeta, Dataset
from .errors import ConfigError, DataError
from .seeding import rng_for, seed_for

LINKS = ("sparse-nonlinear-shared",)
NOISE_KINDS = ("homoscedastic-normal", "heteroscedastic", "skewed")
_BASES = ("linear", "dominant", "quadratic")
_REDRAW_CAP = 1000
_NOISE_STREAM_SOURCE = 101
_NOISE_STREAM_TARGET = 102


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic cohort with phenotypes y_source and y_target."""

    n: int
    p_snps: int
    maf_range: tuple = (0.05, 0.5)
    link: str = "sparse-nonlinear-shared"
    shared_signal_fraction: float = 0.5
    noise: str = "homoscedastic-normal"
    noise_scale_source: float = 0.5
    noise_scale_target: float = 0.5
    seed: int = 0
    noise_seed_source: int = None
    noise_seed_target: int = None

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be at least 2, got {self.n}")
        if self.p_snps < 2:
            raise ConfigError(f"p_snps must be at least 2, got {self.p_snps}")
        lo, hi = self.maf_range
        if not (0.0 < lo <= hi <= 0.5):
            raise ConfigError(f"maf_range must satisfy 0 < lo <= hi <= 0.5, "
                              f"got {self.maf_range}")
        object.__setattr__(self, "maf_range", (float(lo), float(hi)))
        if self.link not in LINKS:
            raise ConfigError(f"unknown link '{self.link}'; choose from {LINKS}")
        if not (0.0 <= self.shared_signal_fraction <= 1.0):
            raise ConfigError("shared_signal_fraction must lie in [0, 1], "
                              f"got {self.shared_signal_fraction}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind '{self.noise}'; "
                              f"choose from {NOISE_KINDS}")
        if self.noise_scale_source <= 0.0 or self.noise_scale_target <= 0.0:
            raise ConfigError("noise scales must be positive")
        k = self.k_causal
        n_shared = self.n_shared
        if 2 * k - n_shared > self.p_snps:
            raise ConfigError(
                f"p_snps={self.p_snps} cannot host {2 * k - n_shared} distinct "
                f"causal SNPs; increase p_snps")

    @property
    def k_causal(self) -> int:
        """Causal SNPs per task: max(2, min(8, p_snps // 3))."""
        return max(2, min(8, self.p_snps // 3))

    @property
    def n_shared(self) -> int:
        return int(round(self.shared_signal_fraction * self.k_causal))

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        if not isinstance(d, dict):
            raise ConfigError("synthetic spec must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown synthetic spec fields: {unknown}")
        d = dict(d)
        if "maf_range" in d:
            d["maf_range"] = tuple(d["maf_range"])
        return cls(**d)


def _basis_values(name: str, g: np.ndarray) -> np.ndarray:
    if name == "linear":
        return g
    if name == "dominant":
        return (g >= 1.0).astype(float)
    if name == "quadratic":
        return (g - 1.0) ** 2
    raise ConfigError(f"unknown basis '{name}'")


def _standardize(v: np.ndarray) -> np.ndarray:
    sd = float(np.std(v))
    centered = v - float(np.mean(v))
    if sd <= 1e-8:
        return np.zeros_like(v)
    return centered / sd


def _draw_noise(kind: str, scale: float, signal: np.ndarray,
                rng: np.random.Generator) -> np.ndarray:
    n = signal.shape[0]
    if kind == "homoscedastic-normal":
        return scale * rng.normal(0.0, 1.0, n)
    if kind == "heteroscedastic":
        sigma = scale * (0.3 + 0.7 * np.abs(signal))
        return sigma * rng.normal(0.0, 1.0, n)
    if kind == "skewed":
        return scale * (rng.exponential(1.0, n) - 1.0)
    raise ConfigError(f"unknown noise kind '{kind}'")


def generate_synthetic(spec: SyntheticSpec):
    """Draw one cohort. Returns (Dataset, truth).

    The dataset carries phenotypes y_source and y_target over SNP columns
    snp1..snpP. truth is a JSON-friendly dict recording the minor-allele
    frequencies, the causal structure (0-based column indices, basis names,
    coefficients) of the shared, source-only, and target-only parts, the
    noise settings, and the signal standardization constants.
    """
    rng = np.random.default_rng(spec.seed)
    n, p = spec.n, spec.p_snps
    lo, hi = spec.maf_range

    mafs = rng.uniform(lo, hi, p)
    G = rng.binomial(2, mafs, size=(n, p)).astype(float)

    # Constant columns carry no signal and would be dropped on reload, which
    # would shift every causal index. Redraw them from a reserved stream so
    # the main stream's consumption does not depend on the data.
    redraw = rng_for(spec.seed, 7)
    for j in range(p):
        attempts = 0
        while np.all(G[:, j] == G[0, j]):
            if attempts >= _REDRAW_CAP:
                raise DataError(
                    f"could not draw a non-constant genotype column after "
                    f"{_REDRAW_CAP} attempts (n={n} may be too small)")
            mafs[j] = redraw.uniform(lo, hi)
            G[:, j] = redraw.binomial(2, mafs[j], n)
            attempts += 1

    k = spec.k_causal
    n_shared = spec.n_shared
    n_own = k - n_shared
    perm = rng.permutation(p)
    shared_idx = perm[:n_shared]
    source_idx = perm[n_shared:n_shared + n_own]
    target_idx = perm[n_shared + n_own:n_shared + 2 * n_own]

    def coefs(count):
        mags = rng.uniform(0.7, 1.3, count)
        signs = rng.choice([-1.0, 1.0], count)
        return mags * signs

    shared_coefs = coefs(n_shared)
    source_coefs = coefs(n_own)
    target_coefs = coefs(n_own)

    def task_signal(own_idx, own_coefs):
        # Causal list is shared SNPs first, then the task's own; bases cycle
        # linear, dominant, quadratic down that list, so shared SNPs act
        # through the same basis in both tasks.
        sig = np.zeros(n)
        bases = []
        for pos, (j, c) in enumerate(
                list(zip(shared_idx, shared_coefs)) + list(zip(own_idx, own_coefs))):
            basis = _BASES[pos % len(_BASES)]
            bases.append(basis)
            sig = sig + c * _standardize(_basis_values(basis, G[:, j]))
        return sig, bases

    raw_source, bases_source = task_signal(source_idx, source_coefs)
    raw_target, bases_target = task_signal(target_idx, target_coefs)

    def finalize(raw):
        sd = float(np.std(raw))
        mean = float(np.mean(raw))
        if sd <= 1e-8:
            return np.zeros_like(raw), mean, sd
        return (raw - mean) / sd, mean, sd

    signal_source, center_s, scale_s = finalize(raw_source)
    signal_target, center_t, scale_t = finalize(raw_target)

    seed_src = spec.noise_seed_source
    if seed_src is None:
        seed_src = seed_for(spec.seed, _NOISE_STREAM_SOURCE)
    seed_tgt = spec.noise_seed_target
    if seed_tgt is None:
        seed_tgt = seed_for(spec.seed, _NOISE_STREAM_TARGET)
    eps_source = _draw_noise(spec.noise, spec.noise_scale_source, signal_source,
                             np.random.default_rng(seed_src))
    eps_target = _draw_noise(spec.noise, spec.noise_scale_target, signal_target,
                             np.random.default_rng(seed_tgt))

    y_source = signal_source + eps_source
    y_target = signal_target + eps_target

    columns = tuple(ColumnMeta(name=f"snp{j + 1}", kind="snp") for j in range(p))
    dataset = Dataset(X=G, y_columns={"y_source": y_source, "y_target": y_target},
                      columns=columns)

    truth = {
        "n": n,
        "p_snps": p,
        "mafs": [float(m) for m in mafs],
        "shared": {
            "indices": [int(j) for j in shared_idx],
            "bases": bases_source[:n_shared],
            "coefs": [float(c) for c in shared_coefs],
        },
        "source_own": {
            "indices": [int(j) for j in source_idx],
            "bases": bases_source[n_shared:],
            "coefs": [float(c) for c in source_coefs],
        },
        "target_own": {
            "indices": [int(j) for j in target_idx],
            "bases": bases_target[n_shared:],
            "coefs": [float(c) for c in target_coefs],
        },
        "signal_standardization": {
            "source": {"center": center_s, "scale": scale_s},
            "target": {"center": center_t, "scale": scale_t},
        },
        "noise": {
            "kind": spec.noise,
            "scale_source": spec.noise_scale_source,
            "scale_target": spec.noise_scale_target,
            "seed_source": int(seed_src),
            "seed_target": int(seed_tgt),
        },
        "link": spec.link,
        "shared_signal_fraction": spec.shared_signal_fraction,
        "seed": spec.seed,
    }
    return dataset, truth

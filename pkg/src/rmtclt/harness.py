"""Monte Carlo replication of linear spectral statistics and two-pipeline comparisons."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
import hashlib
import json
import math
from pathlib import Path

import numpy as np
from scipy import stats as sps

from ._parallel import derive_seed, ordered_map
from .ensembles import EntryLaw, PopulationShape, build_f_pair, draw_entries, MatrixSample
from .errors import NumericalError, SchemaVersionMismatch, SingularSy
from .lss import (
    TestFunction,
    centering_integral,
    deterministic_centering_gap,
    f_centering_integral,
    pan_contour,
)
from .stieltjes import Ratio

SCHEMA_VERSION = 1
PIPELINES = ("cov-centralized", "cov-simplified", "f-centralized", "f-simplified")
CONVENTIONS = ("nminus1", "n")
MAX_FAILURE_RATE = 0.01

MEAN_SE_MULT = 3.0
VAR_RATIO_BAND = (0.8, 1.25)
KS_ALPHA = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``centering_convention`` defaults to ``"nminus1"`` for centralized
    pipelines and ``"n"`` for simplified ones.
    """

    pipeline: str
    p: int
    n: int
    N: int | None = None
    law_x: EntryLaw = EntryLaw()
    law_y: EntryLaw = EntryLaw()
    shape: PopulationShape = PopulationShape()
    f: TestFunction = TestFunction.monomial(1)
    reps: int = 200
    master_seed: int = 0
    centering_convention: str | None = None

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ValueError(f"pipeline must be one of {PIPELINES}")
        if self.centering_convention is None:
            conv = "nminus1" if self.pipeline.endswith("centralized") else "n"
            object.__setattr__(self, "centering_convention", conv)
        if self.centering_convention not in CONVENTIONS:
            raise ValueError(f"centering_convention must be one of {CONVENTIONS}")
        if self.p < 1 or self.n < 2 or self.reps < 1:
            raise ValueError("need p >= 1, n >= 2, reps >= 1")
        if self.is_f:
            if self.N is None:
                raise ValueError("F pipelines need N")
            if self.p > self.N - 1:
                raise ValueError("F pipelines need p <= N - 1")
        if self.shape.kind == "diagonal" and self.shape.p != self.p:
            raise ValueError("population shape dimension does not match p")

    @property
    def is_f(self):
        return self.pipeline.startswith("f-")

    @property
    def centralized(self):
        return self.pipeline.endswith("centralized")

    def centering_ratios(self):
        """Ratios at which the deterministic centering measure is evaluated."""
        if self.centering_convention == "nminus1":
            r = (self.p / (self.n - 1),)
            return r + ((self.p / (self.N - 1),) if self.is_f else ())
        r = (self.p / self.n,)
        return r + ((self.p / self.N,) if self.is_f else ())

    def to_dict(self):
        return {
            "pipeline": self.pipeline,
            "p": self.p,
            "n": self.n,
            "N": self.N,
            "law_x": self.law_x.to_dict(),
            "law_y": self.law_y.to_dict(),
            "shape": self.shape.to_dict(),
            "f": str(self.f),
            "reps": self.reps,
            "master_seed": self.master_seed,
            "centering_convention": self.centering_convention,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if "law_x" in d:
            d["law_x"] = EntryLaw.from_config(d["law_x"])
        if "law_y" in d:
            d["law_y"] = EntryLaw.from_config(d["law_y"])
        if "shape" in d:
            shape = d["shape"]
            if isinstance(shape, dict) and shape.get("kind") == "two-level":
                shape = {**shape, "p": d["p"]}
            d["shape"] = PopulationShape.from_config(shape)
        if "f" in d and isinstance(d["f"], str):
            d["f"] = TestFunction.parse(d["f"])
        return cls(**d)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class SummaryStats:
    """Moments with jackknife standard errors and a normality test."""

    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    se_mean: float
    se_variance: float
    se_skewness: float
    se_kurtosis: float
    ks_pvalue: float
    reps: int

    def gaussian_verdict(self):
        """``(passed, reasons)`` for skewness, kurtosis (3 SE) and KS p-value (> 0.01)."""
        reasons = []
        if abs(self.skewness) > 3 * self.se_skewness:
            reasons.append(f"skewness {self.skewness:.3g} exceeds 3 SE ({self.se_skewness:.3g})")
        if abs(self.excess_kurtosis) > 3 * self.se_kurtosis:
            reasons.append(
                f"excess kurtosis {self.excess_kurtosis:.3g} exceeds 3 SE ({self.se_kurtosis:.3g})"
            )
        if not self.ks_pvalue > KS_ALPHA:
            reasons.append(f"KS p-value {self.ks_pvalue:.3g} <= {KS_ALPHA}")
        return not reasons, reasons

    def to_dict(self):
        return {k: float(v) if k != "reps" else int(v) for k, v in self.__dict__.items()}


def _moments(x):
    """mean, unbiased variance, skewness, excess kurtosis along the last axis."""
    m = x.mean(axis=-1, keepdims=True)
    d = x - m
    n = x.shape[-1]
    m2 = np.mean(d**2, axis=-1)
    m3 = np.mean(d**3, axis=-1)
    m4 = np.mean(d**4, axis=-1)
    return m[..., 0], m2 * n / (n - 1), m3 / m2**1.5, m4 / m2**2 - 3.0


def _leave_one_out(x):
    """Moment statistics of every leave-one-out subsample, vectorized by power sums."""
    c = x - x.mean()
    k = x.size - 1
    s = [np.sum(c**j) for j in range(1, 5)]
    a1, a2, a3, a4 = ((s[j] - c ** (j + 1)) / k for j in range(4))
    m2 = a2 - a1**2
    m3 = a3 - 3 * a1 * a2 + 2 * a1**3
    m4 = a4 - 4 * a1 * a3 + 6 * a1**2 * a2 - 3 * a1**4
    return a1 + x.mean(), m2 * k / (k - 1), m3 / m2**1.5, m4 / m2**2 - 3.0


def summarize(samples):
    """:class:`SummaryStats` of a 1-D sample."""
    x = np.asarray(samples, dtype=float)
    if x.size < 3:
        raise ValueError("need at least 3 samples")
    full = _moments(x)
    if not full[1] > 0:
        raise ValueError("samples have zero variance")
    loo = _leave_one_out(x)
    n = x.size
    ses = [math.sqrt((n - 1) / n * float(np.sum((t - t.mean()) ** 2))) for t in loo]
    ks = sps.kstest(x, "norm", args=(full[0], math.sqrt(full[1]))).pvalue
    return SummaryStats(*(float(v) for v in full), *ses, float(ks), int(n))


def gaussianity_report(samples, min_reps=500):
    """Summary statistics plus a Gaussian verdict; needs ``min_reps`` samples."""
    if len(samples) < min_reps:
        raise ValueError(f"gaussianity_report needs at least {min_reps} samples")
    stats = summarize(samples)
    passed, reasons = stats.gaussian_verdict()
    return {"stats": stats, "pass": passed, "reasons": reasons}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    samples: np.ndarray
    seeds: list
    stats: SummaryStats
    raw_sums: np.ndarray = field(repr=False, default=None)
    centering: float = float("nan")
    failures: int = 0
    timestamp: str = ""


def _centering(config):
    ratios = config.centering_ratios()
    if config.is_f:
        return f_centering_integral(config.f, *ratios, check=True)
    h = config.shape.spectral_weights(config.p)
    return centering_integral(config.f, Ratio(ratios[0]), h, check=True)


def _replicate(config, r):
    """``(raw sum, seed, failed attempts)`` for replication ``r``."""
    budget = max(1, math.ceil(MAX_FAILURE_RATE * config.reps)) + 1
    for attempt in range(budget):
        seed = derive_seed(config.master_seed, r, attempt)
        if config.is_f:
            ex = draw_entries(config.p, config.n, config.law_x, derive_seed(seed, 0))
            ey = draw_entries(config.p, config.N, config.law_y, derive_seed(seed, 1))
            try:
                pair = build_f_pair(ex, ey, config.shape)
            except SingularSy:
                continue
            eigs = pair.eigs_F if config.centralized else pair.eigs_G
        else:
            s = MatrixSample(config.p, config.n, draw_entries(config.p, config.n, config.law_x, seed),
                             config.shape, seed)
            eigs = s.eigs_S if config.centralized else s.eigs_B
        with np.errstate(invalid="raise", divide="raise"):
            try:
                raw = float(np.sum(config.f(eigs)))
            except FloatingPointError:
                continue
        return raw, seed, attempt
    raise NumericalError(f"replication {r} failed {budget} times")


def run_experiment(config, threads=None):
    """Run ``config.reps`` replications; results are ordered by replication index.

    Raises
    ------
    NumericalError
        More than 1% of replications needed resampling.
    """
    c = _centering(config)
    rows = ordered_map(lambda r: _replicate(config, r), range(config.reps), threads)
    failures = sum(row[2] for row in rows)
    if failures > MAX_FAILURE_RATE * config.reps:
        raise NumericalError(f"{failures} failed replications exceed 1% of {config.reps}")
    raw = np.array([row[0] for row in rows])
    samples = raw - config.p * c
    return ExperimentResult(
        config,
        samples,
        [row[1] for row in rows],
        summarize(samples),
        raw,
        c,
        failures,
        datetime.now(timezone.utc).isoformat(),
    )


@dataclass(frozen=True)
class ComparisonReport:
    stats_a: SummaryStats
    stats_b: SummaryStats
    mean_diff: float
    mean_diff_se: float
    var_ratio: float
    var_ratio_se: float
    ks_pvalue: float
    verdict: bool
    reasons: tuple
    thresholds: dict

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k not in ("stats_a", "stats_b")}
        d["stats_a"] = self.stats_a.to_dict()
        d["stats_b"] = self.stats_b.to_dict()
        d["reasons"] = list(self.reasons)
        return d


def compare_samples(a, b):
    """Two-sample equivalence test on mean, variance and distribution."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    sa, sb = summarize(a), summarize(b)
    diff = sa.mean - sb.mean
    se = math.hypot(sa.se_mean, sb.se_mean)
    ratio = sa.variance / sb.variance
    # delta method on log ratio
    ratio_se = ratio * math.hypot(sa.se_variance / sa.variance, sb.se_variance / sb.variance)
    ks = float(sps.ks_2samp(a, b).pvalue)
    reasons = []
    if abs(diff) > MEAN_SE_MULT * se:
        reasons.append(f"mean difference {diff:.4g} exceeds {MEAN_SE_MULT} SE ({se:.4g})")
    if not VAR_RATIO_BAND[0] <= ratio <= VAR_RATIO_BAND[1]:
        reasons.append(f"variance ratio {ratio:.4g} outside {list(VAR_RATIO_BAND)}")
    if not ks > KS_ALPHA:
        reasons.append(f"two-sample KS p-value {ks:.3g} <= {KS_ALPHA}")
    thresholds = {
        "mean_se_mult": MEAN_SE_MULT,
        "var_ratio_band": list(VAR_RATIO_BAND),
        "ks_alpha": KS_ALPHA,
    }
    return ComparisonReport(sa, sb, diff, se, ratio, ratio_se, ks, not reasons, tuple(reasons), thresholds)


def compare_pipelines(config_a, config_b, threads=None):
    """Run both experiments and compare their samples.

    Returns ``(report, result_a, result_b)``.  Configs must share
    ``p``, ``n``, ``N`` and ``f``; use different ``master_seed`` values for
    independent samples.
    """
    for attr in ("p", "n", "N", "f"):
        if getattr(config_a, attr) != getattr(config_b, attr):
            raise ValueError(f"configs differ in {attr}")
    ra = run_experiment(config_a, threads)
    rb = ra if config_b == config_a else run_experiment(config_b, threads)
    return compare_samples(ra.samples, rb.samples), ra, rb


def bias_demonstration(config, f=None, threads=None):
    """Offset caused by centering a centralized statistic at ``p/n`` instead of ``p/(n-1)``.

    The same draws are centered both ways, so the mean offset is a
    deterministic number equal to the centering gap.  The limit of that gap
    and the contour integral of the alternative bias integrand are reported
    next to it.
    """
    if config.is_f:
        raise ValueError("bias demonstration needs a covariance pipeline")
    f = config.f if f is None else f
    base = replace(config, pipeline="cov-centralized", f=f)
    good = run_experiment(replace(base, centering_convention="nminus1"), threads)
    bad = run_experiment(replace(base, centering_convention="n"), threads)
    offset = float(bad.samples.mean() - good.samples.mean())
    h = config.shape.spectral_weights(config.p)
    gap, limit = deterministic_centering_gap(f, config.p, config.n, h)
    pan = pan_contour(f, config.p / config.n, h)
    return {
        "f": str(f),
        "p": config.p,
        "n": config.n,
        "offset": offset,
        "gap": float(gap),
        "identity_error": abs(offset - gap),
        "limit": float(limit),
        "pan_diagnostic": pan,
        "mean_correct": good.stats.mean,
        "se_correct": good.stats.se_mean,
        "mean_wrong": bad.stats.mean,
        "se_wrong": bad.stats.se_mean,
        "reps": config.reps,
        "master_seed": config.master_seed,
    }


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def persist_results(result, path):
    """Write ``result`` as JSON plus a companion CSV (index, seed, value)."""
    path = Path(path)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": result.config.to_dict(),
        "config_hash": result.config.config_hash(),
        "samples": [float(v) for v in result.samples],
        "seeds": [int(s) for s in result.seeds],
        "stats": result.stats.to_dict(),
        "seed": result.config.master_seed,
        "failures": result.failures,
        "centering": result.centering,
        "timestamp": result.timestamp,
    }
    path.write_text(json.dumps(doc, indent=1))
    csv_path = path.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "seed", "value"])
        for i, (s, v) in enumerate(zip(result.seeds, result.samples)):
            w.writerow([i, s, repr(float(v))])
    return path, csv_path


def load_results(path):
    """Inverse of :func:`persist_results`.

    Raises
    ------
    SchemaVersionMismatch
        Unparseable file, wrong schema version, missing fields or a config
        hash that does not match the stored config.
    OSError
        The file cannot be read.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise SchemaVersionMismatch(f"unsupported schema_version {doc.get('schema_version')!r}")
        config = ExperimentConfig.from_dict(doc["config"])
        if config.config_hash() != doc["config_hash"]:
            raise SchemaVersionMismatch("config hash does not match stored config")
        samples = np.array(doc["samples"], dtype=float)
        stats = SummaryStats(**doc["stats"])
        if samples.size != config.reps or len(doc["seeds"]) != config.reps:
            raise SchemaVersionMismatch("sample count does not match config.reps")
        return ExperimentResult(config, samples, list(doc["seeds"]), stats, None,
                                float(doc["centering"]), int(doc["failures"]), doc["timestamp"])
    except SchemaVersionMismatch:
        raise
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise SchemaVersionMismatch(f"corrupted results file: {exc}") from exc

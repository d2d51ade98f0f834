"""Evaluation machinery: weight sweeps, Monte Carlo variability, rank
correlation, demographic gaps, and grouped summaries with confidence
intervals.

Dataset inputs are factor matrices: one row per record, seven columns in
FACTOR_COLUMNS order (four individual-side composites then three
attack-side composites), all on [0, 5].

Reproducibility contract: every Monte Carlo iteration draws from a random
stream derived from (seed, iteration index) only, so results are identical
regardless of scheduling or worker count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .core import (
    ASI_WEIGHT_NAMES,
    IVI_WEIGHT_NAMES,
    WeightConfig,
)
from .errors import (
    ConstantInputError,
    EmptyCorpusError,
    EmptySelectionError,
    InfeasibleRangesError,
    LengthMismatchError,
    NonPositiveInputError,
)

FACTOR_COLUMNS = IVI_WEIGHT_NAMES + ASI_WEIGHT_NAMES
SAMPLED_WEIGHT_NAMES = ("alpha",) + IVI_WEIGHT_NAMES + ASI_WEIGHT_NAMES

_REJECTION_CAP = 10_000


def as_factor_matrix(rows) -> np.ndarray:
    """Validate and coerce records to an (n, 7) float matrix on [0, 5]."""
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != len(FACTOR_COLUMNS):
        raise ValueError(f"expected (n, {len(FACTOR_COLUMNS)}) factor matrix, got {arr.shape}")
    if arr.size == 0:
        raise EmptyCorpusError("factor matrix is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("factor matrix contains non-finite values")
    if arr.min() < 0 or arr.max() > 5:
        raise ValueError("factor values must lie in [0, 5]")
    return arr


def scvi_scores(factors: np.ndarray, config: WeightConfig) -> np.ndarray:
    """Per-record overall score for one weight configuration."""
    ivi = factors[:, :4] @ np.asarray(config.ivi_weights)
    asi = factors[:, 4:] @ np.asarray(config.asi_weights)
    return config.alpha * ivi + config.beta * asi


# ---------------------------------------------------------------------------
# Weight ranges and simplex sampling


@dataclass(frozen=True)
class WeightRangeSpec:
    """Closed [lo, hi] interval per sampled weight (alpha plus the seven
    factor weights); beta is always 1 - alpha."""

    ranges: dict[str, tuple[float, float]]

    def __post_init__(self):
        cleaned = {}
        for name in SAMPLED_WEIGHT_NAMES:
            lo, hi = self.ranges.get(name, (0.0, 1.0))
            lo, hi = float(lo), float(hi)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise InfeasibleRangesError(f"range for {name} is not finite")
            if lo > hi:
                raise InfeasibleRangesError(f"range for {name} has lo > hi: [{lo}, {hi}]")
            if lo < 0.0 or hi > 1.0:
                raise InfeasibleRangesError(f"range for {name} leaves [0, 1]: [{lo}, {hi}]")
            cleaned[name] = (lo, hi)
        unknown = set(self.ranges) - set(SAMPLED_WEIGHT_NAMES)
        if unknown:
            raise InfeasibleRangesError(f"unknown weight names: {', '.join(sorted(unknown))}")
        object.__setattr__(self, "ranges", cleaned)

    @classmethod
    def unrestricted(cls) -> "WeightRangeSpec":
        return cls({})

    @classmethod
    def from_dict(cls, doc: dict) -> "WeightRangeSpec":
        return cls({name: (pair[0], pair[1]) for name, pair in doc.items()})


def _sample_block(
    names: tuple[str, ...], spec: WeightRangeSpec, rng: np.random.Generator
) -> dict[str, float]:
    ranges = spec.ranges
    lo_sum = sum(ranges[n][0] for n in names)
    hi_sum = sum(ranges[n][1] for n in names)
    if lo_sum > 1.0 + 1e-12 or hi_sum < 1.0 - 1e-12:
        raise InfeasibleRangesError(
            f"block {names} cannot sum to 1 within ranges (lo sum {lo_sum}, hi sum {hi_sum})"
        )
    pinned = {n: ranges[n][0] for n in names if ranges[n][0] == ranges[n][1]}
    free = [n for n in names if n not in pinned]
    mass = 1.0 - math.fsum(pinned.values())
    if not free:
        if abs(mass) > 1e-9:
            raise InfeasibleRangesError(f"pinned block {names} sums to {1.0 - mass}, not 1")
        return pinned
    if mass < -1e-12:
        raise InfeasibleRangesError(f"pinned weights in block {names} already exceed 1")
    mass = max(mass, 0.0)
    for _ in range(_REJECTION_CAP):
        gammas = rng.standard_exponential(len(free))
        point = gammas / gammas.sum() * mass
        if all(ranges[n][0] <= w <= ranges[n][1] for n, w in zip(free, point)):
            return {**pinned, **{n: float(w) for n, w in zip(free, point)}}
    raise InfeasibleRangesError(
        f"rejection sampling for block {names} exhausted {_REJECTION_CAP} retries"
    )


def sample_weight_simplex(spec: WeightRangeSpec, rng: np.random.Generator) -> WeightConfig:
    """Draw one weight configuration uniformly, honoring the range spec.

    Each factor block is a flat Dirichlet draw (the uniform distribution on
    the simplex) rejected until every coordinate lands inside its range;
    coordinates whose range is a single point are fixed and the remaining
    mass is sampled on the reduced simplex. Alpha is uniform on its range.
    """
    a_lo, a_hi = spec.ranges["alpha"]
    alpha = float(rng.uniform(a_lo, a_hi)) if a_lo < a_hi else a_lo
    ivi = _sample_block(IVI_WEIGHT_NAMES, spec, rng)
    asi = _sample_block(ASI_WEIGHT_NAMES, spec, rng)
    return WeightConfig(alpha=alpha, beta=1.0 - alpha, **ivi, **asi)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MonteCarloRun:
    """All iterations of one weight-variability simulation.

    ``weights`` holds the sampled values in SAMPLED_WEIGHT_NAMES column
    order; ``mean_scvi[i]`` is the dataset-mean score under iteration i's
    configuration.
    """

    seed: int
    iterations: int
    weights: np.ndarray  # (iterations, 8)
    mean_scvi: np.ndarray  # (iterations,)

    def config(self, i: int) -> WeightConfig:
        row = dict(zip(SAMPLED_WEIGHT_NAMES, self.weights[i]))
        return WeightConfig(beta=1.0 - row["alpha"], **row)

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "iterations": self.iterations,
            "mean_scvi": {
                "mean": float(self.mean_scvi.mean()),
                "std": float(self.mean_scvi.std()),
                "min": float(self.mean_scvi.min()),
                "max": float(self.mean_scvi.max()),
            },
            "weight_means": {
                name: float(self.weights[:, j].mean())
                for j, name in enumerate(SAMPLED_WEIGHT_NAMES)
            },
            "weight_stds": {
                name: float(self.weights[:, j].std())
                for j, name in enumerate(SAMPLED_WEIGHT_NAMES)
            },
        }


def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(iteration,)))


def monte_carlo(
    factors: np.ndarray,
    spec: WeightRangeSpec,
    iterations: int = 10_000,
    seed: int = 0,
) -> MonteCarloRun:
    """Recompute the dataset-mean score under independently sampled weights."""
    factors = as_factor_matrix(factors)
    if iterations < 1:
        raise ValueError("iteration count must be at least 1")
    col_means = factors.mean(axis=0)
    weights = np.empty((iterations, len(SAMPLED_WEIGHT_NAMES)))
    means = np.empty(iterations)
    for i in range(iterations):
        config = sample_weight_simplex(spec, _iteration_rng(seed, i))
        weights[i] = [getattr(config, n) for n in SAMPLED_WEIGHT_NAMES]
        ivi = float(col_means[:4] @ np.asarray(config.ivi_weights))
        asi = float(col_means[4:] @ np.asarray(config.asi_weights))
        means[i] = config.alpha * ivi + config.beta * asi
    return MonteCarloRun(seed=seed, iterations=iterations, weights=weights, mean_scvi=means)


def run_to_jsonl_lines(run: MonteCarloRun) -> list[str]:
    """One JSON object per iteration: {iter, mean_scvi, weights}."""
    lines = []
    for i in range(run.iterations):
        config = run.config(i)
        lines.append(json.dumps(
            {"iter": i, "mean_scvi": float(run.mean_scvi[i]), "weights": config.as_dict()},
            sort_keys=True,
        ))
    return lines


# ---------------------------------------------------------------------------
# Peak / outlier decomposition


def scvi_interval(lo: float, hi: float):
    def select(mean_scvi: np.ndarray) -> np.ndarray:
        return (mean_scvi >= lo) & (mean_scvi <= hi)
    return select


def top_fraction(fraction: float):
    def select(mean_scvi: np.ndarray) -> np.ndarray:
        return mean_scvi >= np.quantile(mean_scvi, 1.0 - fraction)
    return select


def bottom_fraction(fraction: float):
    def select(mean_scvi: np.ndarray) -> np.ndarray:
        return mean_scvi <= np.quantile(mean_scvi, fraction)
    return select


def mode_neighborhood(rel_width: float = 0.02):
    """Iterations within +/- rel_width of the tallest histogram bin's center
    (Freedman-Diaconis binning)."""
    def select(mean_scvi: np.ndarray) -> np.ndarray:
        if mean_scvi.max() == mean_scvi.min():
            return np.ones_like(mean_scvi, dtype=bool)
        counts, edges = np.histogram(mean_scvi, bins="fd")
        centers = 0.5 * (edges[:-1] + edges[1:])
        mode = centers[int(np.argmax(counts))]
        tolerance = rel_width * abs(mode)
        if tolerance == 0.0:
            tolerance = rel_width * (mean_scvi.max() - mean_scvi.min())
        return np.abs(mean_scvi - mode) <= tolerance
    return select


def peak_stats(run: MonteCarloRun, selector) -> dict[str, tuple[float, float]]:
    """Mean and standard deviation of each sampled weight over a selection
    of iterations (an interval of mean score, a tail, or a mode
    neighborhood)."""
    mask = np.asarray(selector(run.mean_scvi), dtype=bool)
    if not mask.any():
        raise EmptySelectionError("selector matched no iterations")
    selected = run.weights[mask]
    return {
        name: (float(selected[:, j].mean()), float(selected[:, j].std()))
        for j, name in enumerate(SAMPLED_WEIGHT_NAMES)
    }


# ---------------------------------------------------------------------------
# Sensitivity sweeps


@dataclass(frozen=True)
class SweepPoint:
    value: float
    mean_scvi: float
    std_scvi: float
    degenerate_redistribution: bool


def _reweighted(baseline: WeightConfig, target: str, value: float) -> tuple[WeightConfig, bool]:
    raw = baseline.as_dict()
    if target == "alpha":
        degenerate = raw["beta"] == 0.0
        raw["alpha"], raw["beta"] = value, 1.0 - value
        return WeightConfig(**raw), degenerate
    if target in IVI_WEIGHT_NAMES:
        block = IVI_WEIGHT_NAMES
    elif target in ASI_WEIGHT_NAMES:
        block = ASI_WEIGHT_NAMES
    else:
        raise ValueError(f"unknown sweep target {target!r}")
    others = [n for n in block if n != target]
    others_sum = math.fsum(raw[n] for n in others)
    remainder = 1.0 - value
    degenerate = others_sum == 0.0
    for n in others:
        raw[n] = remainder / len(others) if degenerate else raw[n] * remainder / others_sum
    raw[target] = value
    return WeightConfig(**raw), degenerate


def sensitivity_sweep(
    factors: np.ndarray,
    target: str,
    grid,
    baseline: WeightConfig,
) -> list[SweepPoint]:
    """One-at-a-time sweep of a single weight over a grid in [0, 1].

    At each grid value the rest of the target's block is redistributed
    proportionally to the baseline weights (uniformly, and flagged, when the
    other baseline weights are all zero), and the dataset mean and population
    standard deviation of the score are recorded.
    """
    factors = as_factor_matrix(factors)
    curve = []
    for value in grid:
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"grid value {value} outside [0, 1]")
        config, degenerate = _reweighted(baseline, target, value)
        scores = scvi_scores(factors, config)
        curve.append(SweepPoint(
            value=value,
            mean_scvi=float(scores.mean()),
            std_scvi=float(scores.std()),
            degenerate_redistribution=degenerate,
        ))
    return curve


# ---------------------------------------------------------------------------
# Rank correlation


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average of their positions."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(arr.size, dtype=float)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> tuple[float, float]:
    """Spearman rank correlation with average-rank ties and a two-sided
    Student-t p-value on n - 2 degrees of freedom."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatchError(f"length mismatch: {a.shape} vs {b.shape}")
    n = a.size
    if n < 3:
        raise LengthMismatchError(f"need at least 3 observations, got {n}")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise ConstantInputError("rank correlation undefined for constant input")
    ra = average_ranks(a)
    rb = average_ranks(b)
    if np.array_equal(ra, rb):
        rho = 1.0
    elif np.array_equal(ra + rb, np.full(n, n + 1.0)):
        rho = -1.0
    else:
        da = ra - ra.mean()
        db = rb - rb.mean()
        rho = float(np.dot(da, db) / math.sqrt(np.dot(da, da) * np.dot(db, db)))
        rho = min(max(rho, -1.0), 1.0)
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(_scipy_stats.t.sf(abs(t), n - 2))
    return rho, p


def format_p_value(p: float) -> str:
    """Report-style p: floored at 1e-300 and shown as 0.0 when below 5e-5."""
    p = max(p, 1e-300)
    return "0.0" if p < 5e-5 else f"{p:.4f}"


# ---------------------------------------------------------------------------
# Group aggregation


@dataclass(frozen=True)
class GroupSummary:
    group: str
    n: int
    mean_ivi: float
    mean_asi: float
    mean_scvi: float
    ci_lower: float
    ci_upper: float
    degenerate_ci: bool = False


def group_aggregate(groups, ivi, asi, scvi, ci: str = "z") -> list[GroupSummary]:
    """Per-group sample sizes, means, and a 95% confidence interval on the
    mean score (z: mean +/- 1.96 * s / sqrt(n); t: Student-t critical value).

    Single-member groups get the degenerate interval [mean, mean], flagged.
    """
    if ci not in ("z", "t"):
        raise ValueError(f"ci must be 'z' or 't', got {ci!r}")
    keys = list(groups)
    ivi = np.asarray(ivi, dtype=float)
    asi = np.asarray(asi, dtype=float)
    scvi = np.asarray(scvi, dtype=float)
    if not (len(keys) == ivi.size == asi.size == scvi.size):
        raise LengthMismatchError("groups and score vectors differ in length")
    buckets: dict[str, list[int]] = {}
    for index, key in enumerate(keys):
        buckets.setdefault(str(key), []).append(index)
    summaries = []
    for key in sorted(buckets):
        idx = buckets[key]
        n = len(idx)
        mean_scvi = float(scvi[idx].mean())
        if n == 1:
            lower = upper = mean_scvi
            degenerate = True
        else:
            s = float(scvi[idx].std(ddof=1))
            crit = 1.96 if ci == "z" else float(_scipy_stats.t.ppf(0.975, n - 1))
            half = crit * s / math.sqrt(n)
            lower, upper = mean_scvi - half, mean_scvi + half
            degenerate = False
        summaries.append(GroupSummary(
            group=key,
            n=n,
            mean_ivi=float(ivi[idx].mean()),
            mean_asi=float(asi[idx].mean()),
            mean_scvi=mean_scvi,
            ci_lower=lower,
            ci_upper=upper,
            degenerate_ci=degenerate,
        ))
    return summaries


GROUP_CSV_HEADER = "group,n,mean_ivi,mean_asi,mean_scvi,ci_lower,ci_upper"


def group_summaries_to_csv(summaries: list[GroupSummary]) -> str:
    """Four-decimal CSV in the published table layout, LF line endings."""
    lines = [GROUP_CSV_HEADER]
    for s in summaries:
        lines.append(
            f"{s.group},{s.n},{s.mean_ivi:.4f},{s.mean_asi:.4f},"
            f"{s.mean_scvi:.4f},{s.ci_lower:.4f},{s.ci_upper:.4f}"
        )
    return "\n".join(lines) + "\n"


def group_summaries_from_csv(text: str) -> list[GroupSummary]:
    lines = [line for line in text.split("\n") if line]
    if not lines or lines[0] != GROUP_CSV_HEADER:
        raise ValueError("group summary CSV must start with the standard header")
    summaries = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 7:
            raise ValueError(f"bad group summary row: {line!r}")
        group, n, mean_ivi, mean_asi, mean_scvi, lower, upper = parts
        summaries.append(GroupSummary(
            group=group,
            n=int(n),
            mean_ivi=float(mean_ivi),
            mean_asi=float(mean_asi),
            mean_scvi=float(mean_scvi),
            ci_lower=float(lower),
            ci_upper=float(upper),
            degenerate_ci=float(lower) == float(upper),
        ))
    return summaries


# ---------------------------------------------------------------------------
# Demographic gaps


def percentage_gap(a: float, b: float) -> float:
    """Absolute difference as a percentage of the midpoint of the pair."""
    if a <= 0 or b <= 0:
        raise NonPositiveInputError(f"inputs must be positive: {a}, {b}")
    return 100.0 * abs(a - b) / ((a + b) / 2.0)

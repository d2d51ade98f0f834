"""Comparator indices: CVSS-style and SVI-style per-record scores.

Neither published mapping from survey features to these scales exists, so
the mappings are editable data files and this module is only the engine:
a threshold-table walk feeding a base-score formula (CVSS-like) and
corpus percentile ranking of sociodemographic indicators (SVI-like).
Both outputs are rescaled onto [0, 5] so cross-index tables line up.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    CorpusTooSmallError,
    MappingError,
    MissingFieldError,
)
from .vocab import AGE_GROUPS, GENDERS, RACE_ETHNICITY

MAPPING_FORMAT = "scvindex-mapping/1"

CVSS_METRICS = (
    "attack_vector",
    "attack_complexity",
    "user_interaction",
    "conf_impact",
    "integ_impact",
    "avail_impact",
)

# Base-score constants: exploitability scale, impact scale, native ceiling.
_EXPLOITABILITY_SCALE = 8.22
_IMPACT_SCALE = 6.42
_NATIVE_MAX = 10.0


@dataclass(frozen=True)
class LevelRule:
    """Stepwise lookup: the contribution of the highest threshold <= value."""

    source: str
    levels: tuple[tuple[float, float], ...]

    def contribution(self, value: float) -> float:
        result = 0.0
        for threshold, contribution in self.levels:
            if value >= threshold:
                result = contribution
            else:
                break
        return result


@dataclass(frozen=True)
class Indicator:
    source: str
    transform: dict[str, float] | None = None
    invert: bool = False


@dataclass(frozen=True)
class ComparatorMapping:
    name: str
    kind: str  # "cvss-like" or "svi-like"
    metrics: dict[str, LevelRule] | None = None
    indicators: tuple[Indicator, ...] = ()


def parse_mapping(doc: dict) -> ComparatorMapping:
    if doc.get("format") != MAPPING_FORMAT:
        raise MappingError(f"unsupported mapping format: {doc.get('format')!r}")
    kind = doc.get("kind")
    name = str(doc.get("name", ""))
    if kind == "cvss-like":
        metric_docs = doc.get("metrics", {})
        missing = [m for m in CVSS_METRICS if m not in metric_docs]
        if missing:
            raise MappingError(f"cvss-like mapping lacks metrics: {', '.join(missing)}")
        metrics = {}
        for metric, body in metric_docs.items():
            if metric not in CVSS_METRICS:
                raise MappingError(f"unknown cvss-like metric {metric!r}")
            levels = tuple((float(t), float(c)) for t, c in body["levels"])
            if any(not (math.isfinite(t) and math.isfinite(c)) for t, c in levels):
                raise MappingError(f"metric {metric!r} has non-finite levels")
            if list(t for t, _ in levels) != sorted(t for t, _ in levels):
                raise MappingError(f"metric {metric!r} thresholds must be ascending")
            metrics[metric] = LevelRule(source=str(body["source"]), levels=levels)
        return ComparatorMapping(name=name, kind=kind, metrics=metrics)
    if kind == "svi-like":
        indicators = []
        for body in doc.get("indicators", []):
            transform = body.get("transform")
            if transform is not None:
                transform = {str(k): float(v) for k, v in transform.items()}
            indicators.append(Indicator(
                source=str(body["source"]),
                transform=transform,
                invert=bool(body.get("invert", False)),
            ))
        if not indicators:
            raise MappingError("svi-like mapping declares no indicators")
        return ComparatorMapping(name=name, kind=kind, indicators=tuple(indicators))
    raise MappingError(f"unknown mapping kind: {kind!r}")


def load_mapping(path: str | Path) -> ComparatorMapping:
    return parse_mapping(json.loads(Path(path).read_text(encoding="utf-8")))


def bundled_mapping_path(kind: str) -> Path:
    name = {"cvss-like": "cvss_mapping.json", "svi-like": "svi_mapping.json"}[kind]
    return Path(str(resources.files("scvindex.data").joinpath(name)))


def _field(record: Mapping, source: str) -> object:
    if source not in record or record[source] is None:
        raise MissingFieldError(f"record lacks field {source!r}")
    return record[source]


def cvss_like(record: Mapping, mapping: ComparatorMapping) -> float:
    """Base-style score from the mapped metric contributions, on [0, 5].

    exploitability = 8.22 * AV * AC * UI; impact = 6.42 * (1 - prod(1 - cia));
    their sum is capped at the native ceiling of 10 (zero when the impact
    side is zero) and halved onto the comparison scale.
    """
    if mapping.kind != "cvss-like" or mapping.metrics is None:
        raise MappingError(f"mapping {mapping.name!r} is not cvss-like")
    contributions = {
        metric: rule.contribution(float(_field(record, rule.source)))
        for metric, rule in mapping.metrics.items()
    }
    exploitability = (
        _EXPLOITABILITY_SCALE
        * contributions["attack_vector"]
        * contributions["attack_complexity"]
        * contributions["user_interaction"]
    )
    iss = 1.0 - (
        (1.0 - contributions["conf_impact"])
        * (1.0 - contributions["integ_impact"])
        * (1.0 - contributions["avail_impact"])
    )
    impact = _IMPACT_SCALE * iss
    base = 0.0 if impact <= 0.0 else min(exploitability + impact, _NATIVE_MAX)
    return base * 5.0 / _NATIVE_MAX


def _indicator_value(record: Mapping, indicator: Indicator) -> float:
    raw = _field(record, indicator.source)
    if indicator.transform is not None:
        key = str(raw)
        if key not in indicator.transform:
            raise MappingError(
                f"indicator {indicator.source!r}: no transform entry for {key!r}"
            )
        value = indicator.transform[key]
    else:
        value = float(raw)
    return -value if indicator.invert else value


@dataclass(frozen=True)
class SviContext:
    """Sorted per-indicator corpus columns for percentile ranking."""

    mapping_name: str
    columns: tuple[np.ndarray, ...]
    n: int


def svi_context(records: list[Mapping], mapping: ComparatorMapping) -> SviContext:
    if mapping.kind != "svi-like":
        raise MappingError(f"mapping {mapping.name!r} is not svi-like")
    if len(records) < 10:
        raise CorpusTooSmallError(
            f"percentile ranking needs at least 10 records, got {len(records)}"
        )
    columns = []
    for indicator in mapping.indicators:
        values = np.sort([_indicator_value(r, indicator) for r in records])
        columns.append(values)
    return SviContext(mapping_name=mapping.name, columns=tuple(columns), n=len(records))


def svi_like(record: Mapping, mapping: ComparatorMapping, context: SviContext) -> float:
    """Mean percentile rank of the record's indicators, rescaled to [0, 5].

    The rank of a value x in a column is (count of values <= x - 1)/(n - 1),
    so a record at every indicator's corpus maximum scores exactly 5 even
    under ties, and ranks are invariant to strictly increasing transforms.
    """
    if mapping.kind != "svi-like":
        raise MappingError(f"mapping {mapping.name!r} is not svi-like")
    ranks = []
    for indicator, column in zip(mapping.indicators, context.columns):
        value = _indicator_value(record, indicator)
        rank = int(np.searchsorted(column, value, side="right")) - 1
        ranks.append(rank / (context.n - 1))
    return 5.0 * math.fsum(ranks) / len(ranks)


# ---------------------------------------------------------------------------
# Cross-index comparison


_GROUP_ORDERS = {
    "gender": GENDERS,
    "race_ethnicity": RACE_ETHNICITY,
    "age_group": AGE_GROUPS,
}

COMPARISON_LABELS = ("scvi", "cvss", "svi")


@dataclass(frozen=True)
class IndexComparison:
    labels: tuple[str, ...]
    rho: np.ndarray  # symmetric, unit diagonal
    p: np.ndarray
    # demographic field -> ordered rows of (group, svi mean, cvss mean, scvi mean)
    tables: dict[str, list[tuple[str, float, float, float]]]


def compare_indices(
    scvi, cvss, svi, demographics: list[Mapping[str, str | None]]
) -> IndexComparison:
    """Spearman matrix over the three indices plus per-demographic mean tables."""
    from .analysis import spearman  # local import avoids a cycle

    series = {
        "scvi": np.asarray(scvi, dtype=float),
        "cvss": np.asarray(cvss, dtype=float),
        "svi": np.asarray(svi, dtype=float),
    }
    n = series["scvi"].size
    if any(v.size != n for v in series.values()) or len(demographics) != n:
        raise MappingError("comparison inputs differ in length")

    k = len(COMPARISON_LABELS)
    rho = np.eye(k)
    p = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            r, pv = spearman(series[COMPARISON_LABELS[i]], series[COMPARISON_LABELS[j]])
            rho[i, j] = rho[j, i] = r
            p[i, j] = p[j, i] = pv

    tables: dict[str, list[tuple[str, float, float, float]]] = {}
    for field, order in _GROUP_ORDERS.items():
        groups: dict[str, list[int]] = {}
        for index, demo in enumerate(demographics):
            value = demo.get(field)
            if value:
                groups.setdefault(value, []).append(index)
        ordered = [g for g in order if g in groups] + sorted(set(groups) - set(order))
        tables[field] = [
            (
                group,
                float(series["svi"][groups[group]].mean()),
                float(series["cvss"][groups[group]].mean()),
                float(series["scvi"][groups[group]].mean()),
            )
            for group in ordered
        ]
    return IndexComparison(labels=COMPARISON_LABELS, rho=rho, p=p, tables=tables)

"""Scam-report text pipeline.

Takes user-written scam reports through normalization, lexicon-based feature
extraction, scam-type/success annotation, and the factor mappings that place
each report (and each scam type) on the [0, 5] scales used by the index.

Corpus-relative quantities (percentile rescaling, per-type maxima) require a
two-pass flow: collect the corpus, then score. Per-report normalization and
feature extraction are independent and order-free.
"""

from __future__ import annotations

import json
import math
import os
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import IO, Callable, Iterable

import numpy as np

from .core import IviFactors
from .errors import (
    DuplicateRuleError,
    EmptyCorpusError,
    MissingAnnotationError,
    MissingLexiconCategoryError,
    NoFlaggedReportsError,
    ProviderUnavailableError,
    ScvindexError,
)

SCAM_TYPES = (
    "phishing",
    "investment",
    "lottery",
    "tech support",
    "romance",
    "online shopping",
    "job",
    "undetected",
)

FEATURE_CATEGORIES = (
    "negation",
    "affect",
    "posemo",
    "cogproc",
    "percept",
    "informal",
    "pronoun_i",
    "pronoun_we",
    "pronoun_you",
)

_URL = re.compile(r"(?:https?://\S+|www\.\S+)")
_MENTION = re.compile(r"[@#]\w+")
_ELONGATION = re.compile(r"([^\W\d_])\1{2,}")
_WS = re.compile(r"\s+")
_KEPT_PUNCT = ".,!?'"


def _word_table_pattern(table: dict[str, str]) -> re.Pattern:
    keys = sorted(table, key=len, reverse=True)
    return re.compile(r"\b(?:" + "|".join(re.escape(k) for k in keys) + r")\b", re.IGNORECASE)


def _load_table(name: str) -> tuple[dict[str, str], str]:
    raw = resources.files("scvindex.data").joinpath(name).read_text(encoding="utf-8")
    doc = json.loads(raw)
    return doc["entries"], str(doc["version"])


@dataclass(frozen=True)
class TextNormalizer:
    """Deterministic, idempotent report-text cleaner.

    Stage order: slang substitution, URL removal, mention/hashtag stripping,
    lowercasing, contraction expansion, elongation reduction (letter runs of
    three or more collapse to two; punctuation runs are preserved), then
    removal of everything that is not alphanumeric, whitespace, or one of
    ``.,!?'``, and whitespace collapsing.
    """

    slang: dict[str, str]
    contractions: dict[str, str]
    slang_version: str
    contractions_version: str

    @classmethod
    def bundled(cls) -> "TextNormalizer":
        slang, s_ver = _load_table("slang.json")
        contractions, c_ver = _load_table("contractions.json")
        return cls(slang=slang, contractions=contractions,
                   slang_version=s_ver, contractions_version=c_ver)

    def __post_init__(self):
        object.__setattr__(self, "_slang_re", _word_table_pattern(self.slang))
        object.__setattr__(self, "_contraction_re", _word_table_pattern(self.contractions))

    def normalize(self, text: str) -> str:
        text = text.replace("’", "'")
        text = self._slang_re.sub(lambda m: self.slang[m.group(0).lower()], text)
        text = _URL.sub(" ", text)
        text = _MENTION.sub(" ", text)
        text = text.lower()
        text = self._contraction_re.sub(lambda m: self.contractions[m.group(0)], text)
        text = _ELONGATION.sub(r"\1\1", text)
        text = "".join(
            ch if (ch.isalnum() and ch != "_") or ch in _KEPT_PUNCT or ch.isspace() else " "
            for ch in text
        )
        return _WS.sub(" ", text).strip()


def normalize_text(raw: str, normalizer: TextNormalizer | None = None) -> str:
    if normalizer is None:
        normalizer = TextNormalizer.bundled()
    return normalizer.normalize(raw)


# ---------------------------------------------------------------------------
# Lexicons and feature extraction


@dataclass(frozen=True)
class Lexicon:
    """One word category: exact entries plus prefix entries (trailing ``*``)."""

    category: str
    exact: frozenset[str]
    prefixes: tuple[str, ...]
    version: str

    def matches(self, token: str) -> bool:
        if token in self.exact:
            return True
        return any(token.startswith(p) for p in self.prefixes)


def load_lexicon(path: Path, category: str, version: str) -> Lexicon:
    exact: list[str] = []
    prefixes: list[str] = []
    seen: set[str] = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        entry = line.strip().lower()
        if not entry or entry.startswith("#"):
            continue
        if entry in seen:
            raise DuplicateRuleError(f"lexicon {category!r}: duplicate entry {entry!r}")
        seen.add(entry)
        if entry.endswith("*"):
            prefixes.append(entry[:-1])
        else:
            exact.append(entry)
    return Lexicon(category=category, exact=frozenset(exact),
                   prefixes=tuple(sorted(prefixes)), version=version)


def load_lexicons(directory: str | Path) -> dict[str, Lexicon]:
    """Load every ``*.txt`` category in a directory; VERSION file names the set."""
    directory = Path(directory)
    version_file = directory / "VERSION"
    version = version_file.read_text().strip() if version_file.exists() else "unversioned"
    lexicons = {}
    for path in sorted(directory.glob("*.txt")):
        lexicons[path.stem] = load_lexicon(path, path.stem, version)
    return lexicons


def bundled_lexicons_path() -> Path:
    return Path(str(resources.files("scvindex.data").joinpath("lexicons")))


def load_bundled_lexicons() -> dict[str, Lexicon]:
    return load_lexicons(bundled_lexicons_path())


@dataclass(frozen=True)
class LexicalFeatures:
    """Per-report lexical rates, all per 100 tokens."""

    token_count: int
    clout: float
    negation_rate: float
    affect_rate: float
    posemo_rate: float
    cogproc_rate: float
    percept_rate: float
    informal_rate: float
    exclaim_rate: float
    lexicon_version: str


def extract_features(normalized_text: str, lexicons: dict[str, Lexicon]) -> LexicalFeatures:
    """Count lexicon hits over whitespace tokens.

    Tokens are matched after stripping edge punctuation. The clout proxy is
    100 * (we-words + you-words - i-words) / tokens, floored at zero; the
    exclamation rate counts ``!`` characters.
    """
    for category in FEATURE_CATEGORIES:
        if category not in lexicons:
            raise MissingLexiconCategoryError(f"lexicon category {category!r} not loaded")
    tokens = normalized_text.split()
    denominator = max(len(tokens), 1)
    counts = {category: 0 for category in FEATURE_CATEGORIES}
    for token in tokens:
        form = token.strip(_KEPT_PUNCT)
        if not form:
            continue
        for category in FEATURE_CATEGORIES:
            if lexicons[category].matches(form):
                counts[category] += 1

    def rate(category: str) -> float:
        return 100.0 * counts[category] / denominator

    clout = 100.0 * (counts["pronoun_we"] + counts["pronoun_you"] - counts["pronoun_i"])
    clout = max(0.0, clout / denominator)
    version = next(iter(lexicons.values())).version if lexicons else "unversioned"
    return LexicalFeatures(
        token_count=len(tokens),
        clout=clout,
        negation_rate=rate("negation"),
        affect_rate=rate("affect"),
        posemo_rate=rate("posemo"),
        cogproc_rate=rate("cogproc"),
        percept_rate=rate("percept"),
        informal_rate=rate("informal"),
        exclaim_rate=100.0 * normalized_text.count("!") / denominator,
        lexicon_version=version,
    )


# ---------------------------------------------------------------------------
# Reports and annotation


@dataclass(frozen=True)
class Annotation:
    scam_type: str
    success: int | None  # 1 = victimized, 0 = targeted but unsuccessful
    provider: str = ""

    def __post_init__(self):
        if self.scam_type not in SCAM_TYPES:
            raise ScvindexError(f"unknown scam type: {self.scam_type!r}")
        if self.success not in (None, 0, 1):
            raise ScvindexError(f"success flag must be 0, 1, or absent: {self.success!r}")


@dataclass(frozen=True)
class ScamReport:
    """One report: raw and normalized text plus annotation-derived fields.

    Emotion intensities default to None and are usually filled from lexical
    features; scoring treats absent intensities as neutral (zero).
    """

    report_id: str
    raw_text: str
    normalized_text: str
    created_at: str | None = None
    author: str | None = None
    annotation: Annotation | None = None
    loss: float | None = None
    positive_emotion: float | None = None
    negative_emotion: float | None = None

    def __post_init__(self):
        if self.loss is not None and self.loss < 0:
            raise ScvindexError(f"report {self.report_id}: negative loss {self.loss}")
        for name in ("positive_emotion", "negative_emotion"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ScvindexError(f"report {self.report_id}: negative {name} {v}")


def parse_report(obj: dict, normalizer: TextNormalizer) -> ScamReport:
    annotation = None
    if obj.get("annotation"):
        a = obj["annotation"]
        annotation = Annotation(
            scam_type=a["type"],
            success=a.get("success"),
            provider=a.get("provider", "input"),
        )
    emotions = obj.get("emotions") or {}
    text = obj.get("text", "")
    return ScamReport(
        report_id=str(obj["id"]),
        raw_text=text,
        normalized_text=normalizer.normalize(text),
        created_at=obj.get("created_at"),
        author=obj.get("author"),
        annotation=annotation,
        loss=float(obj["loss"]) if obj.get("loss") is not None else None,
        positive_emotion=emotions.get("positive"),
        negative_emotion=emotions.get("negative"),
    )


def load_reports(stream: IO[str] | Iterable[str],
                 normalizer: TextNormalizer | None = None) -> list[ScamReport]:
    """Read JSON-lines report input: one {id, text, created_at, ...} per line."""
    if normalizer is None:
        normalizer = TextNormalizer.bundled()
    reports = []
    for line in stream:
        line = line.strip()
        if line:
            reports.append(parse_report(json.loads(line), normalizer))
    return reports


def with_emotions_from_features(report: ScamReport, features: LexicalFeatures) -> ScamReport:
    """Fill absent emotion intensities from lexical rates.

    Positive intensity is the positive-emotion rate; negative intensity is
    the remainder of the affect rate, floored at zero.
    """
    if report.positive_emotion is not None and report.negative_emotion is not None:
        return report
    pos = report.positive_emotion
    neg = report.negative_emotion
    return replace(
        report,
        positive_emotion=pos if pos is not None else features.posemo_rate,
        negative_emotion=neg if neg is not None else
        max(0.0, features.affect_rate - features.posemo_rate),
    )


class HeuristicKeywordProvider:
    """Offline annotation: phrase-count votes per scam type.

    The type with the most keyword hits wins; no hits or a tie yields
    ``undetected``. The success flag is set when any loss-indicating marker
    phrase appears.
    """

    def __init__(self, table: dict | None = None):
        if table is None:
            raw = resources.files("scvindex.data").joinpath("scam_keywords.json")
            table = json.loads(raw.read_text(encoding="utf-8"))
        self.types: dict[str, list[str]] = table["types"]
        self.success_markers: list[str] = table["success_markers"]
        self.name = f"heuristic-keywords/{table.get('version', '?')}"

    def annotate(self, text: str) -> Annotation:
        haystack = _WS.sub(" ", text.lower())
        votes = {
            scam_type: sum(haystack.count(phrase) for phrase in phrases)
            for scam_type, phrases in self.types.items()
        }
        best = max(votes.values(), default=0)
        winners = [t for t, v in votes.items() if v == best]
        scam_type = winners[0] if best > 0 and len(winners) == 1 else "undetected"
        success = int(any(marker in haystack for marker in self.success_markers))
        return Annotation(scam_type=scam_type, success=success, provider=self.name)


def _urllib_transport(url: str, payload: bytes, headers: dict[str, str], timeout: float) -> bytes:
    request = urllib.request.Request(url, data=payload, headers=headers, method="POST")
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return response.read()


class RemoteAnnotationProvider:
    """HTTP annotation endpoint: POST {"text": ...} -> {"type": ..., "success": ...}.

    Endpoint and key come from SCVINDEX_ANNOTATE_URL / SCVINDEX_ANNOTATE_KEY
    unless given explicitly. Calls are retried with capped backoff; any
    exhaustion raises ProviderUnavailableError. Never used by the test suite.
    """

    name = "remote/1"

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        transport: Callable[[str, bytes, dict, float], bytes] = _urllib_transport,
        retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 10.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint or os.environ.get("SCVINDEX_ANNOTATE_URL")
        self.api_key = api_key or os.environ.get("SCVINDEX_ANNOTATE_KEY")
        self.transport = transport
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self.sleep = sleep
        if not self.endpoint:
            raise ProviderUnavailableError("no annotation endpoint configured")

    def annotate(self, text: str) -> Annotation:
        payload = json.dumps({"text": text}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                body = self.transport(self.endpoint, payload, headers, self.timeout)
                doc = json.loads(body)
                return Annotation(scam_type=doc["type"], success=doc.get("success"),
                                  provider=self.name)
            except (urllib.error.URLError, OSError, ValueError, KeyError) as exc:
                last_error = exc
                if attempt + 1 < self.retries:
                    self.sleep(min(self.backoff * 2 ** attempt, 8.0))
        raise ProviderUnavailableError(
            f"annotation endpoint failed after {self.retries} attempts: {last_error}"
        )


def default_provider():
    if os.environ.get("SCVINDEX_ANNOTATE_URL"):
        return RemoteAnnotationProvider()
    return HeuristicKeywordProvider()


def annotate(report: ScamReport, provider) -> Annotation:
    """Annotate one report, recording the provider identity for audit."""
    annotation = provider.annotate(report.raw_text)
    if not annotation.provider:
        annotation = replace(annotation, provider=getattr(provider, "name", "unknown"))
    return annotation


# ---------------------------------------------------------------------------
# Factor mapping


def rescale_percentile(value: float, bounds: tuple[float, float]) -> float:
    """Map a raw signal onto [0, 5] against corpus 5th/95th percentile bounds.

    Values at or below the 5th percentile score 0, at or above the 95th score
    5. A degenerate window (the corpus signal is constant) collapses to a
    step at the lower bound.
    """
    lo, hi = bounds
    if hi <= lo:
        return 0.0 if value <= lo else 5.0
    t = (value - lo) / (hi - lo)
    return 5.0 * min(max(t, 0.0), 1.0)


def _p5_p95(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(np.percentile(arr, 5.0)), float(np.percentile(arr, 95.0))


def _informality(features: LexicalFeatures) -> float:
    return features.informal_rate + features.exclaim_rate


def _affect_mix(features: LexicalFeatures) -> float:
    return features.affect_rate + features.posemo_rate - features.cogproc_rate


@dataclass(frozen=True)
class CorpusContext:
    """Corpus-level state needed to score a single report."""

    author_counts: dict[str, int]
    informality_bounds: tuple[float, float]
    negation_bounds: tuple[float, float]
    affect_mix_bounds: tuple[float, float]

    @classmethod
    def from_corpus(cls, pairs: list[tuple[ScamReport, LexicalFeatures]]) -> "CorpusContext":
        if not pairs:
            raise EmptyCorpusError("cannot build corpus context from an empty corpus")
        authors: dict[str, int] = {}
        for report, _ in pairs:
            if report.author:
                authors[report.author] = authors.get(report.author, 0) + 1
        return cls(
            author_counts=authors,
            informality_bounds=_p5_p95([_informality(f) for _, f in pairs]),
            negation_bounds=_p5_p95([f.negation_rate for _, f in pairs]),
            affect_mix_bounds=_p5_p95([_affect_mix(f) for _, f in pairs]),
        )

    def prior_count(self, report: ScamReport) -> int:
        """Number of *other* corpus reports by this report's author."""
        if not report.author:
            return 0
        return max(0, self.author_counts.get(report.author, 1) - 1)


def engagement_to_unfamiliarity(prior_reports: int) -> float:
    """More prior engagement with scam discussion means less unfamiliarity."""
    if prior_reports <= 0:
        return 5.0
    if prior_reports <= 2:
        return 4.0
    if prior_reports <= 5:
        return 3.0
    if prior_reports <= 10:
        return 2.0
    if prior_reports <= 20:
        return 1.0
    return 0.0


def reddit_ivi_factors(
    report: ScamReport, features: LexicalFeatures, context: CorpusContext
) -> IviFactors:
    """Map one report onto the individual-side factors.

    Awareness comes from the author's engagement bucket; behavior is
    informality (informal markers + exclamations) discounted by skepticism
    (negations), each percentile-rescaled; psychology is the emotional-vs-
    analytic rate mix; experience is 5 for victims, 2 for targeted-but-
    unsuccessful, 0 when the report shows no exposure.
    """
    behavior = rescale_percentile(_informality(features), context.informality_bounds)
    behavior -= rescale_percentile(features.negation_rate, context.negation_bounds)
    behavior = min(max(behavior, 0.0), 5.0)
    psychology = rescale_percentile(_affect_mix(features), context.affect_mix_bounds)

    if report.annotation is None:
        raise MissingAnnotationError(f"report {report.report_id}: no annotation")
    if report.annotation.scam_type == "undetected":
        experience = 0.0
    elif report.annotation.success is None:
        raise MissingAnnotationError(
            f"report {report.report_id}: annotation lacks a success flag"
        )
    else:
        experience = 5.0 if report.annotation.success == 1 else 2.0

    return IviFactors(
        unfamiliarity=engagement_to_unfamiliarity(context.prior_count(report)),
        risky_behavior=behavior,
        trust=psychology,
        past_encounters=experience,
    )


# ---------------------------------------------------------------------------
# Per-type attack components


def _annotated(reports: list[ScamReport]) -> list[ScamReport]:
    annotated = [r for r in reports if r.annotation is not None]
    if not annotated:
        raise EmptyCorpusError("no annotated reports in corpus")
    return annotated


def _check_type(scam_type: str):
    if scam_type not in SCAM_TYPES:
        raise ScvindexError(f"unknown scam type: {scam_type!r}")


def scam_frequency(reports: list[ScamReport], scam_type: str) -> float:
    """Report count for the type, rescaled so the most-reported type scores 5."""
    _check_type(scam_type)
    annotated = _annotated(reports)
    counts: dict[str, int] = {}
    for r in annotated:
        counts[r.annotation.scam_type] = counts.get(r.annotation.scam_type, 0) + 1
    max_count = max(counts.values())
    return 5.0 * counts.get(scam_type, 0) / max_count


def scam_consequence(
    reports: list[ScamReport], scam_type: str, financial_weight: float = 0.5
) -> float:
    """Blend of financial and emotional impact for the type, each on [0, 5].

    Financial impact is the type's mean loss on a log1p scale, normalized by
    the corpus-maximum single-report log-loss. Emotional impact is the type's
    mean net-negative intensity (negative - positive), rescaled against the
    corpus 5th/95th percentiles of per-report net-negative intensity. Reports
    without a loss or emotion value count as zero for that component.
    """
    _check_type(scam_type)
    if not 0.0 <= financial_weight <= 1.0:
        raise ScvindexError(f"financial weight must be in [0, 1]: {financial_weight}")
    annotated = _annotated(reports)
    type_reports = [r for r in annotated if r.annotation.scam_type == scam_type]
    if not type_reports:
        return 0.0

    max_log_loss = max(math.log1p(r.loss or 0.0) for r in annotated)
    mean_loss = math.fsum(r.loss or 0.0 for r in type_reports) / len(type_reports)
    financial = 5.0 * math.log1p(mean_loss) / max_log_loss if max_log_loss > 0 else 0.0
    financial = min(financial, 5.0)

    def net_negative(r: ScamReport) -> float:
        return (r.negative_emotion or 0.0) - (r.positive_emotion or 0.0)

    bounds = _p5_p95([net_negative(r) for r in annotated])
    mean_net = math.fsum(net_negative(r) for r in type_reports) / len(type_reports)
    emotional = rescale_percentile(mean_net, bounds)

    return financial_weight * financial + (1.0 - financial_weight) * emotional


def scam_sophistication(reports: list[ScamReport], scam_type: str) -> float:
    """Success proportion among flagged reports of the type, times 5."""
    _check_type(scam_type)
    flagged = [
        r for r in reports
        if r.annotation is not None
        and r.annotation.scam_type == scam_type
        and r.annotation.success is not None
    ]
    if not flagged:
        raise NoFlaggedReportsError(f"no reports of type {scam_type!r} carry a success flag")
    successes = sum(r.annotation.success for r in flagged)
    return 5.0 * successes / len(flagged)


def attack_components(reports: list[ScamReport], scam_type: str) -> dict[str, float]:
    """Frequency, consequence, and sophistication for one scam type."""
    return {
        "frequency": scam_frequency(reports, scam_type),
        "consequence": scam_consequence(reports, scam_type),
        "sophistication": scam_sophistication(reports, scam_type),
    }


def observed_types(reports: list[ScamReport]) -> list[str]:
    return sorted({r.annotation.scam_type for r in reports if r.annotation is not None})

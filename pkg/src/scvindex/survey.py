"""Survey answer encoding.

A schema document declares, per index section ("ivi" / "asi"), the dimensions
and the per-question answer-to-score rules that turn categorical survey
answers into integer scores on [0, 5]. Matching is exact after case folding,
whitespace collapsing, and typographic-apostrophe canonicalization; anything
else is a data problem and is reported, never guessed at.

Dimension aggregation follows the per-index convention: individual-side
dimensions average their member scores, attack-side dimensions sum them and
are rescaled back onto [0, 5] by the maximum obtainable sum over the
questions actually answered.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping

from .errors import (
    AllDimensionsMissingError,
    DuplicateRuleError,
    MissingComponentError,
    MissingHeaderError,
    OutOfRangeScoreError,
    SchemaError,
    UnknownDimensionError,
    UnknownQuestionError,
    UnmatchedAnswerError,
    VocabularyError,
)
from .vocab import check_demographic

SCHEMA_FORMAT = "scvindex-schema/1"
INDEX_MODES = {"ivi": "mean", "asi": "sum"}
DEMOGRAPHIC_FIELDS = ("gender", "race_ethnicity", "age_group", "state")
EXTERNAL_SCORE_FIELDS = ("svi", "cvss")

_WS = re.compile(r"\s+")


def normalize_answer(text: str) -> str:
    """Canonical matching form: apostrophes unified, whitespace collapsed, case folded."""
    return _WS.sub(" ", text.replace("’", "'").strip()).casefold()


@dataclass(frozen=True)
class DimensionSpec:
    """One scored dimension: member questions plus the aggregation mode."""

    dimension_id: str
    mode: str  # "mean" or "sum"
    questions: tuple[str, ...]


@dataclass(frozen=True)
class EncodingSchema:
    """Rules and dimensions for one index section of a schema document."""

    index: str  # "ivi" or "asi"
    dimensions: dict[str, DimensionSpec]
    # question id -> original answer text -> integer score or None (= ignore)
    rules: dict[str, dict[str, int | None]]
    # question id -> normalized answer -> score/None, built once at load
    lookup: dict[str, dict[str, int | None]]

    def max_assignable(self, question_id: str) -> int:
        scores = [v for v in self.rules[question_id].values() if v is not None]
        return max(scores) if scores else 0


@dataclass(frozen=True)
class SchemaBundle:
    """A loaded schema document: one or both index sections plus identity."""

    name: str
    version: str
    sections: dict[str, EncodingSchema]

    @property
    def ivi(self) -> EncodingSchema | None:
        return self.sections.get("ivi")

    @property
    def asi(self) -> EncodingSchema | None:
        return self.sections.get("asi")


def _reject_duplicate_keys(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise DuplicateRuleError(f"duplicate key {key!r} in schema document")
        seen[key] = value
    return seen


def _build_section(index: str, body: dict) -> EncodingSchema:
    if index not in INDEX_MODES:
        raise UnknownDimensionError(f"unknown index section {index!r}")
    try:
        dim_docs = body["dimensions"]
        rule_docs = body["questions"]
    except (KeyError, TypeError):
        raise SchemaError(f"section {index!r} needs 'dimensions' and 'questions'") from None

    rules: dict[str, dict[str, int | None]] = {}
    lookup: dict[str, dict[str, int | None]] = {}
    for qid, mapping in rule_docs.items():
        if not isinstance(mapping, dict) or not mapping:
            raise SchemaError(f"question {qid!r}: rules must be a non-empty mapping")
        normalized: dict[str, int | None] = {}
        parsed: dict[str, int | None] = {}
        for answer, action in mapping.items():
            if action == "ignore":
                value = None
            elif isinstance(action, int) and not isinstance(action, bool):
                if not 0 <= action <= 5:
                    raise OutOfRangeScoreError(
                        f"question {qid!r} answer {answer!r}: score {action} outside [0, 5]"
                    )
                value = action
            else:
                raise OutOfRangeScoreError(
                    f"question {qid!r} answer {answer!r}: action must be an integer "
                    f"score or 'ignore', got {action!r}"
                )
            key = normalize_answer(answer)
            if key in normalized:
                raise DuplicateRuleError(
                    f"question {qid!r}: answers {answer!r} collide after normalization"
                )
            normalized[key] = value
            parsed[answer] = value
        rules[qid] = parsed
        lookup[qid] = normalized

    dimensions: dict[str, DimensionSpec] = {}
    claimed: set[str] = set()
    for dim_id, dim_body in dim_docs.items():
        mode = dim_body.get("mode")
        if mode != INDEX_MODES[index]:
            raise SchemaError(
                f"dimension {dim_id!r}: mode {mode!r} does not match the "
                f"{index} convention ({INDEX_MODES[index]!r})"
            )
        qids = dim_body.get("questions", [])
        if not qids:
            raise SchemaError(f"dimension {dim_id!r} lists no questions")
        if len(set(qids)) != len(qids):
            raise DuplicateRuleError(f"dimension {dim_id!r} lists a question twice")
        for qid in qids:
            if qid not in rules:
                raise UnknownQuestionError(
                    f"dimension {dim_id!r} references undeclared question {qid!r}"
                )
        dimensions[dim_id] = DimensionSpec(dim_id, mode, tuple(qids))
        claimed.update(qids)

    unclaimed = set(rules) - claimed
    if unclaimed:
        raise UnknownDimensionError(
            f"questions not assigned to any dimension: {', '.join(sorted(unclaimed))}"
        )
    return EncodingSchema(index=index, dimensions=dimensions, rules=rules, lookup=lookup)


def parse_schema(doc: dict) -> SchemaBundle:
    if doc.get("format") != SCHEMA_FORMAT:
        raise SchemaError(f"unsupported schema format: {doc.get('format')!r}")
    indices = doc.get("indices")
    if not isinstance(indices, dict) or not indices:
        raise SchemaError("schema document has no index sections")
    sections = {index: _build_section(index, body) for index, body in indices.items()}
    return SchemaBundle(
        name=str(doc.get("name", "")),
        version=str(doc.get("version", "")),
        sections=sections,
    )


def load_schema(path: str | Path) -> SchemaBundle:
    """Load and validate a schema document from disk."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema {path}: invalid JSON ({exc})") from exc
    return parse_schema(doc)


def schema_document(bundle: SchemaBundle) -> dict:
    indices = {}
    for index, section in bundle.sections.items():
        indices[index] = {
            "dimensions": {
                d.dimension_id: {"mode": d.mode, "questions": list(d.questions)}
                for d in section.dimensions.values()
            },
            "questions": {
                qid: {answer: ("ignore" if v is None else v) for answer, v in mapping.items()}
                for qid, mapping in section.rules.items()
            },
        }
    return {
        "format": SCHEMA_FORMAT,
        "name": bundle.name,
        "version": bundle.version,
        "indices": indices,
    }


def canonical_schema_bytes(bundle: SchemaBundle) -> bytes:
    """Canonical serialization: sorted keys, two-space indent, LF, trailing newline."""
    text = json.dumps(schema_document(bundle), sort_keys=True, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def bundled_schema_path() -> Path:
    return Path(str(resources.files("scvindex.data").joinpath("ipoll.schema.json")))


def load_bundled_schema() -> SchemaBundle:
    """The shipped transcription of the survey feature-extraction tables."""
    return load_schema(bundled_schema_path())


# ---------------------------------------------------------------------------
# Encoding


def encode_response(question_id: str, raw_answer: str, schema: EncodingSchema) -> int | None:
    """Encode one answer; returns the integer score, or None for an ignore rule.

    Unmatched answers raise rather than being silently dropped: survey exports
    are controlled vocabularies, so a miss means corrupted data or a schema gap.
    """
    table = schema.lookup.get(question_id)
    if table is None:
        raise UnknownQuestionError(f"question {question_id!r} not in schema")
    key = normalize_answer(raw_answer)
    if key not in table:
        raise UnmatchedAnswerError(
            f"question {question_id!r}: unmatched answer {raw_answer!r}"
        )
    return table[key]


def dimension_score(
    question_scores: Mapping[str, int | None],
    spec: DimensionSpec,
    schema: EncodingSchema,
) -> float | None:
    """Aggregate one dimension; None when every member is ignored/unanswered.

    Sum-mode dimensions are rescaled by the maximum obtainable sum over the
    answered members, times 5, so multi-question components stay on [0, 5].
    """
    answered = [
        (qid, question_scores[qid])
        for qid in spec.questions
        if question_scores.get(qid) is not None
    ]
    if not answered:
        return None
    values = [v for _, v in answered]
    if spec.mode == "mean":
        return math.fsum(values) / len(values)
    max_possible = sum(schema.max_assignable(qid) for qid, _ in answered)
    if max_possible == 0:
        return 0.0
    return 5.0 * math.fsum(values) / max_possible


@dataclass(frozen=True)
class EncodedRecord:
    """One respondent: raw encodings, dimension aggregates, demographics."""

    respondent_id: str
    demographics: dict[str, str | None]
    # index section -> question id -> encoded score (None = ignored)
    question_scores: dict[str, dict[str, int | None]]
    # index section -> dimension id -> aggregate (None = all members ignored)
    dimension_scores: dict[str, dict[str, float | None]]
    svi: float | None = None
    cvss: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "respondent_id": self.respondent_id,
            "demographics": self.demographics,
            "question_scores": self.question_scores,
            "dimension_scores": self.dimension_scores,
            "svi": self.svi,
            "cvss": self.cvss,
        }


def encode_record(
    respondent_id: str,
    answers: Mapping[str, str],
    demographics: Mapping[str, str],
    bundle: SchemaBundle,
    svi: float | None = None,
    cvss: float | None = None,
) -> EncodedRecord:
    """Encode one respondent's answers against every section of the bundle."""
    demo: dict[str, str | None] = {}
    for field_name in DEMOGRAPHIC_FIELDS:
        value = demographics.get(field_name)
        demo[field_name] = check_demographic(field_name, value) if value else None

    question_scores: dict[str, dict[str, int | None]] = {}
    dim_scores: dict[str, dict[str, float | None]] = {}
    for index, section in bundle.sections.items():
        encoded: dict[str, int | None] = {}
        for qid, raw in answers.items():
            if qid in section.lookup:
                encoded[qid] = encode_response(qid, raw, section)
        question_scores[index] = encoded
        dim_scores[index] = {
            dim_id: dimension_score(encoded, spec, section)
            for dim_id, spec in section.dimensions.items()
        }
    return EncodedRecord(
        respondent_id=respondent_id,
        demographics=demo,
        question_scores=question_scores,
        dimension_scores=dim_scores,
        svi=svi,
        cvss=cvss,
    )


# ---------------------------------------------------------------------------
# Realized survey indices


def ipoll_ivi(record: EncodedRecord, strict_seven: bool = False) -> float:
    """Individual index realized as the mean of the encoded survey dimensions.

    By default the divisor is the number of dimensions that were actually
    measured, so respondents are not penalized for skip-logic paths;
    ``strict_seven`` divides by the full dimension count instead.
    """
    dims = record.dimension_scores.get("ivi", {})
    present = [v for v in dims.values() if v is not None]
    if not present:
        raise AllDimensionsMissingError(
            f"respondent {record.respondent_id}: no individual dimensions measurable"
        )
    divisor = len(dims) if strict_seven else len(present)
    return math.fsum(present) / divisor


def ipoll_asi(record: EncodedRecord) -> float:
    """Attack index realized as the equal-weight mean of the rescaled components."""
    dims = record.dimension_scores.get("asi", {})
    missing = sorted(d for d, v in dims.items() if v is None)
    if not dims or missing:
        raise MissingComponentError(
            f"respondent {record.respondent_id}: missing attack components: "
            f"{', '.join(missing) if missing else 'all'}"
        )
    return math.fsum(dims.values()) / len(dims)


# ---------------------------------------------------------------------------
# Table ingest


@dataclass(frozen=True)
class RejectedRow:
    """One rejected input row with the offending cell, for the rejects report."""

    row: int
    question: str | None
    answer: str | None
    reason: str

    def to_json_dict(self) -> dict:
        return {
            "row": self.row,
            "question": self.question,
            "answer": self.answer,
            "reason": self.reason,
        }


def ingest_survey(
    stream: IO[str] | Iterable[str], bundle: SchemaBundle
) -> tuple[list[EncodedRecord], list[RejectedRow]]:
    """Encode an RFC-4180 survey table, one record per row.

    Rows that fail encoding (unmatched answers, bad demographics, malformed
    cells) are collected into the rejects list with the first offending cell;
    the run continues. A missing header is fatal. Empty cells mean the
    question was never asked (skip logic) and are simply absent from the
    record. Columns that are neither questions, demographics, nor external
    scores are ignored.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingHeaderError("survey input is empty; a header row is required") from None
    if not any(cell.strip() for cell in header):
        raise MissingHeaderError("survey input header row is blank")
    header = [cell.strip() for cell in header]

    known_questions = set()
    for section in bundle.sections.values():
        known_questions.update(section.lookup)

    records: list[EncodedRecord] = []
    rejects: list[RejectedRow] = []
    for row_index, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            rejects.append(
                RejectedRow(row_index, None, None,
                            f"malformed row: {len(row)} cells, expected {len(header)}")
            )
            continue
        cells = dict(zip(header, row))
        respondent_id = cells.get("respondent_id", "").strip() or str(row_index)
        answers = {
            col: value.strip()
            for col, value in cells.items()
            if col in known_questions and value.strip()
        }
        demographics = {
            f: cells[f].strip() for f in DEMOGRAPHIC_FIELDS if cells.get(f, "").strip()
        }
        try:
            externals = {
                f: float(cells[f]) if cells.get(f, "").strip() else None
                for f in EXTERNAL_SCORE_FIELDS
            }
        except ValueError as exc:
            rejects.append(RejectedRow(row_index, None, None, f"bad external score: {exc}"))
            continue
        try:
            record = encode_record(
                respondent_id, answers, demographics, bundle,
                svi=externals["svi"], cvss=externals["cvss"],
            )
        except UnmatchedAnswerError as exc:
            qid, ans = _offending_cell(answers, bundle)
            rejects.append(RejectedRow(row_index, qid, ans, str(exc)))
            continue
        except VocabularyError as exc:
            rejects.append(RejectedRow(row_index, None, None, str(exc)))
            continue
        records.append(record)
    return records, rejects


def _offending_cell(answers: Mapping[str, str], bundle: SchemaBundle):
    for qid, raw in answers.items():
        for section in bundle.sections.values():
            if qid in section.lookup:
                try:
                    encode_response(qid, raw, section)
                except UnmatchedAnswerError:
                    return qid, raw
    return None, None

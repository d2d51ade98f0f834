"""Run artifacts: atomic file writes, the scores table, and run manifests.

Scores CSVs carry floats in shortest round-trip form (repr), so re-ingesting
an emitted file and re-emitting it reproduces the bytes exactly. Every
artifact directory gets a manifest.json with the inputs, parameters, data
file versions, and seed needed to reproduce the run; no wall-clock values
appear anywhere.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import FACTOR_COLUMNS
from .survey import DEMOGRAPHIC_FIELDS

TOOL_NAME = "scvindex"

SCORE_COLUMNS = (
    ("respondent_id",)
    + DEMOGRAPHIC_FIELDS
    + ("svi", "cvss")
    + FACTOR_COLUMNS
    + ("ivi", "asi", "scvi", "ipoll_ivi", "ipoll_asi")
)


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write to a temp name in the target directory, then rename into place."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_jsonl(path: str | Path, objects) -> None:
    lines = [json.dumps(obj, sort_keys=True) for obj in objects]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _parse(cell: str) -> float | None:
    return None if cell == "" else float(cell)


@dataclass(frozen=True)
class ScoredRecord:
    """One scores-table row: demographics, factor composites, index values."""

    respondent_id: str
    demographics: dict[str, str | None]
    factors: dict[str, float]  # FACTOR_COLUMNS keys
    ivi: float
    asi: float
    scvi: float
    svi: float | None = None
    cvss: float | None = None
    ipoll_ivi: float | None = None
    ipoll_asi: float | None = None

    def row(self) -> list[str]:
        return (
            [self.respondent_id]
            + [self.demographics.get(f) or "" for f in DEMOGRAPHIC_FIELDS]
            + [_fmt(self.svi), _fmt(self.cvss)]
            + [_fmt(self.factors[c]) for c in FACTOR_COLUMNS]
            + [_fmt(self.ivi), _fmt(self.asi), _fmt(self.scvi),
               _fmt(self.ipoll_ivi), _fmt(self.ipoll_asi)]
        )

    def comparator_fields(self) -> dict:
        """Field view used by comparator mappings: factors plus demographics."""
        out: dict[str, object] = dict(self.factors)
        out.update({f: self.demographics.get(f) for f in DEMOGRAPHIC_FIELDS})
        out["ivi"] = self.ivi
        out["asi"] = self.asi
        out["scvi"] = self.scvi
        return out


def scores_to_csv(records: list[ScoredRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SCORE_COLUMNS)
    for record in records:
        writer.writerow(record.row())
    return buffer.getvalue()


def scores_from_csv(text: str) -> list[ScoredRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != list(SCORE_COLUMNS):
        raise ValueError("scores CSV header does not match the standard layout")
    records = []
    for row in reader:
        if not row:
            continue
        cells = dict(zip(SCORE_COLUMNS, row))
        records.append(ScoredRecord(
            respondent_id=cells["respondent_id"],
            demographics={f: cells[f] or None for f in DEMOGRAPHIC_FIELDS},
            factors={c: float(cells[c]) for c in FACTOR_COLUMNS},
            ivi=float(cells["ivi"]),
            asi=float(cells["asi"]),
            scvi=float(cells["scvi"]),
            svi=_parse(cells["svi"]),
            cvss=_parse(cells["cvss"]),
            ipoll_ivi=_parse(cells["ipoll_ivi"]),
            ipoll_asi=_parse(cells["ipoll_asi"]),
        ))
    return records


def read_scores_csv(path: str | Path) -> list[ScoredRecord]:
    return scores_from_csv(Path(path).read_text(encoding="utf-8"))


def write_scores_csv(path: str | Path, records: list[ScoredRecord]) -> None:
    atomic_write_text(path, scores_to_csv(records))


def factor_matrix(records: list[ScoredRecord]) -> np.ndarray:
    return np.array([[r.factors[c] for c in FACTOR_COLUMNS] for r in records], dtype=float)


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run byte-for-byte."""

    subcommand: str
    params: dict
    inputs: dict
    versions: dict
    seed: int | None = None
    tool: str = TOOL_NAME
    tool_version: str = ""
    notes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        body = {
            "tool": self.tool,
            "tool_version": self.tool_version,
            "subcommand": self.subcommand,
            "params": self.params,
            "inputs": self.inputs,
            "versions": self.versions,
            "seed": self.seed,
            "notes": self.notes,
        }
        return json.dumps(body, sort_keys=True, indent=2) + "\n"


def write_manifest(out_dir: str | Path, manifest: RunManifest) -> None:
    atomic_write_text(Path(out_dir) / "manifest.json", manifest.to_json())

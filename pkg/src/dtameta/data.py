"""Parsing, validation, continuity correction, and logit transform of 2x2 tables.

The universal input is one row per diagnostic study with four counts
(TP, FP, FN, TN).  Everything downstream works on the logit-scale pairs

    y1 = logit(tp / (tp + fn))      s1sq = 1/tp + 1/fn
    y2 = logit(tn / (tn + fp))      s2sq = 1/tn + 1/fp

computed from continuity-corrected counts.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyArmError,
    EmptyInputError,
    SchemaError,
    ValueFormatError,
    ZeroCellError,
)

REQUIRED_COLUMNS = ("tp", "fp", "fn", "tn")
ID_COLUMN_NAMES = ("id", "study", "studyid", "study_id", "name", "label", "author")

CORRECTION_STRATEGIES = ("zero-studies-only", "all-studies", "none")


@dataclass(frozen=True)
class StudyRecord:
    """One study's raw 2x2 counts."""

    id: str
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValueFormatError(
                    f"study {self.id!r}: {name} must be a non-negative integer, got {v!r}"
                )
        if self.n_diseased < 1:
            raise EmptyArmError(f"study {self.id!r} has tp + fn = 0")
        if self.n_healthy < 1:
            raise EmptyArmError(f"study {self.id!r} has tn + fp = 0")

    @property
    def n_diseased(self) -> int:
        return self.tp + self.fn

    @property
    def n_healthy(self) -> int:
        return self.tn + self.fp


@dataclass(frozen=True)
class StudyTable:
    """An ordered collection of studies; the input to every analysis."""

    studies: tuple[StudyRecord, ...]
    source_name: str = ""

    def __post_init__(self):
        if not self.studies:
            raise EmptyInputError("a study table needs at least one study")
        seen = set()
        for rec in self.studies:
            if rec.id in seen:
                raise ValueFormatError(f"duplicate study id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.studies)

    def ids(self) -> tuple[str, ...]:
        return tuple(rec.id for rec in self.studies)

    def counts(self) -> np.ndarray:
        """(M, 4) float array in tp, fp, fn, tn order."""
        return np.array([[r.tp, r.fp, r.fn, r.tn] for r in self.studies], dtype=float)

    def to_json(self) -> dict:
        return {
            "source_name": self.source_name,
            "studies": [
                {"id": r.id, "tp": r.tp, "fp": r.fp, "fn": r.fn, "tn": r.tn}
                for r in self.studies
            ],
        }

    @classmethod
    def from_json(cls, payload: dict | list) -> "StudyTable":
        if isinstance(payload, list):
            payload = {"studies": payload}
        rows = payload.get("studies")
        if not rows:
            raise EmptyInputError("no studies in payload")
        records = []
        for k, row in enumerate(rows, start=1):
            if not isinstance(row, dict):
                raise ValueFormatError(f"row {k} is not an object")
            missing = [c for c in REQUIRED_COLUMNS if c not in row]
            if missing:
                raise SchemaError(f"row {k} missing fields: {', '.join(missing)}")
            records.append(
                StudyRecord(
                    id=str(row.get("id", f"study_{k}")),
                    **{c: _as_count(row[c], c, k) for c in REQUIRED_COLUMNS},
                )
            )
        return cls(studies=tuple(records), source_name=str(payload.get("source_name", "")))


@dataclass(frozen=True)
class CorrectedRecord:
    id: str
    tp: float
    fp: float
    fn: float
    tn: float
    corrected: bool


@dataclass(frozen=True)
class CorrectedTable:
    studies: tuple[CorrectedRecord, ...]
    strategy: str

    def __len__(self) -> int:
        return len(self.studies)

    def counts(self) -> np.ndarray:
        return np.array([[r.tp, r.fp, r.fn, r.tn] for r in self.studies], dtype=float)

    @property
    def corrected_flags(self) -> tuple[bool, ...]:
        return tuple(r.corrected for r in self.studies)


@dataclass(frozen=True)
class BivariateSample:
    """Logit-transformed per-study pairs with within-study variances."""

    ids: tuple[str, ...]
    y1: np.ndarray
    y2: np.ndarray
    s1sq: np.ndarray
    s2sq: np.ndarray

    def __post_init__(self):
        m = len(self.ids)
        for name in ("y1", "y2", "s1sq", "s2sq"):
            arr = getattr(self, name)
            if arr.shape != (m,):
                raise ValueFormatError(f"{name} must have shape ({m},)")

    def __len__(self) -> int:
        return len(self.ids)

    def to_json(self) -> list[dict]:
        return [
            {
                "id": self.ids[i],
                "y1": float(self.y1[i]),
                "y2": float(self.y2[i]),
                "s1sq": float(self.s1sq[i]),
                "s2sq": float(self.s2sq[i]),
            }
            for i in range(len(self))
        ]


def _as_count(value, column: str, rownum: int) -> int:
    """Parse a cell as a non-negative integer count (integral floats allowed)."""
    if isinstance(value, bool):
        raise ValueFormatError(f"row {rownum}, column {column}: boolean is not a count")
    if isinstance(value, int):
        n = value
    elif isinstance(value, float):
        if not value.is_integer():
            raise ValueFormatError(f"row {rownum}, column {column}: {value!r} is not an integer")
        n = int(value)
    else:
        text = str(value).strip()
        try:
            f = float(text)
        except ValueError:
            raise ValueFormatError(
                f"row {rownum}, column {column}: {text!r} is not a number"
            ) from None
        if not f.is_integer():
            raise ValueFormatError(f"row {rownum}, column {column}: {text!r} is not an integer")
        n = int(f)
    if n < 0:
        raise ValueFormatError(f"row {rownum}, column {column}: negative count {n}")
    return n


def _is_numeric(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def parse_dataset(
    raw: str | bytes,
    format: str = "auto",
    source_name: str = "",
) -> tuple[StudyTable, list[str]]:
    """Parse CSV/TSV text into a StudyTable.

    The header must contain TP, FP, FN, TN (any order, case-insensitive).
    An id column is recognized by name, or as a non-numeric first column.
    Returns the table and a list of warnings (e.g. ignored extra columns).
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8-sig")
    raw = raw.lstrip("﻿")
    if not raw.strip():
        raise EmptyInputError("empty input")

    if format == "csv":
        delimiter = ","
    elif format == "tsv":
        delimiter = "\t"
    elif format == "auto":
        first_line = raw.strip().splitlines()[0]
        delimiter = "\t" if first_line.count("\t") > first_line.count(",") else ","
    else:
        raise ValueFormatError(f"unknown format {format!r}")

    reader = csv.reader(io.StringIO(raw), delimiter=delimiter)
    rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyInputError("no rows")

    header = [h.strip().lower() for h in rows[0]]
    col_index: dict[str, int] = {}
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise SchemaError(f"missing required column {col.upper()}")
        col_index[col] = header.index(col)

    id_index = None
    for j, name in enumerate(header):
        if name in ID_COLUMN_NAMES:
            id_index = j
            break

    data_rows = rows[1:]
    if not data_rows:
        raise EmptyInputError("header only, no data rows")

    if id_index is None and header and header[0] not in REQUIRED_COLUMNS:
        # a nameless leading column of non-numeric values is treated as the id
        values = [row[0].strip() for row in data_rows if len(row) > 0]
        if values and not all(_is_numeric(v) for v in values if v):
            id_index = 0

    warnings: list[str] = []
    used = set(col_index.values()) | ({id_index} if id_index is not None else set())
    for j, name in enumerate(header):
        if j not in used:
            warnings.append(f"ignored column {rows[0][j].strip()!r}")

    records = []
    for k, row in enumerate(data_rows, start=1):
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        sid = row[id_index].strip() if id_index is not None else ""
        if not sid:
            sid = f"study_{k}"
        records.append(
            StudyRecord(
                id=sid,
                **{c: _as_count(row[col_index[c]], c.upper(), k) for c in REQUIRED_COLUMNS},
            )
        )
    return StudyTable(studies=tuple(records), source_name=source_name), warnings


def continuity_correct(table: StudyTable, strategy: str = "zero-studies-only") -> CorrectedTable:
    """Apply the 0.5 continuity correction.

    zero-studies-only: studies containing at least one zero cell get 0.5
    added to all four cells; other studies pass through unchanged.
    all-studies: every cell of every study gets 0.5.
    none: counts pass through unchanged.
    """
    if strategy not in CORRECTION_STRATEGIES:
        raise ValueFormatError(f"unknown correction strategy {strategy!r}")
    out = []
    for rec in table.studies:
        has_zero = 0 in (rec.tp, rec.fp, rec.fn, rec.tn)
        if strategy == "all-studies" or (strategy == "zero-studies-only" and has_zero):
            delta, flag = 0.5, True
        else:
            delta, flag = 0.0, False
        out.append(
            CorrectedRecord(
                id=rec.id,
                tp=rec.tp + delta,
                fp=rec.fp + delta,
                fn=rec.fn + delta,
                tn=rec.tn + delta,
                corrected=flag,
            )
        )
    return CorrectedTable(studies=tuple(out), strategy=strategy)


def logit_transform(corrected: CorrectedTable) -> BivariateSample:
    """Logit-scale sample from corrected counts; every cell must be positive."""
    counts = corrected.counts()
    if np.any(counts <= 0):
        bad = [corrected.studies[i].id for i in np.nonzero((counts <= 0).any(axis=1))[0]]
        raise ZeroCellError(
            f"zero cells remain after correction (strategy {corrected.strategy!r}): "
            + ", ".join(bad)
        )
    tp, fp, fn, tn = counts.T
    return BivariateSample(
        ids=tuple(r.id for r in corrected.studies),
        y1=np.log(tp / fn),
        y2=np.log(tn / fp),
        s1sq=1.0 / tp + 1.0 / fn,
        s2sq=1.0 / tn + 1.0 / fp,
    )


def prepare_sample(table: StudyTable, strategy: str = "zero-studies-only") -> BivariateSample:
    """Shorthand: continuity-correct then logit-transform."""
    return logit_transform(continuity_correct(table, strategy))

"""Flat-file formats: record/dataset CSV, JSONL logs, vocabulary and ranking files.

CSV dialect: UTF-8, comma-separated, header row mandatory, LF line endings;
multi-valued attribute fields are semicolon-joined. Floats are written with
``repr`` so every value round-trips bit-exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .expand import BlacklistRule, load_blacklist_rows
from .metrics import DecisionMatrix
from .model import ComparisonRecord, FindingRecord, HedgingPhrase, Rating, Source, Status, Winner
from .ranking import ReferenceRanking, Vocabulary

RECORD_FIELDS = (
    "study_id",
    "finding",
    "location",
    "attributes",
    "view",
    "status",
    "prob",
    "source",
    "sentence",
)


def data_path(name: str) -> Path:
    """Path of a packaged data artifact (dictionary, blacklist, samples...)."""
    return Path(__file__).parent / "data" / name


def _fmt_float(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def record_to_row(rec: FindingRecord) -> dict[str, str]:
    return {
        "study_id": rec.study_id,
        "finding": rec.finding,
        "location": rec.location or "",
        "attributes": ";".join(sorted(rec.attributes)),
        "view": rec.view or "",
        "status": rec.status.value,
        "prob": _fmt_float(rec.prob),
        "source": rec.source.value,
        "sentence": rec.sentence or "",
    }


def record_from_row(row: Mapping[str, str]) -> FindingRecord:
    return FindingRecord(
        study_id=row["study_id"],
        finding=row["finding"],
        location=row["location"] or None,
        attributes=frozenset(a for a in row["attributes"].split(";") if a),
        view=row["view"] or None,
        status=Status(row["status"]),
        prob=float(row["prob"]) if row["prob"] else None,
        source=Source(row["source"]),
        sentence=row["sentence"] or None,
    )


def write_records(path: Path | str, records: Iterable[FindingRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_FIELDS, lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow(record_to_row(rec))


def read_records(path: Path | str) -> list[FindingRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [record_from_row(row) for row in csv.DictReader(fh)]


def write_comparisons(path: Path | str, records: Iterable[ComparisonRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "item_a": rec.item_a,
                        "item_b": rec.item_b,
                        "sentence_a": rec.sentence_a,
                        "sentence_b": rec.sentence_b,
                        "judge": rec.judge,
                        "winner": rec.winner.value,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_comparisons(path: Path | str) -> list[ComparisonRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            records.append(
                ComparisonRecord(
                    item_a=obj["item_a"],
                    item_b=obj["item_b"],
                    sentence_a=obj.get("sentence_a", ""),
                    sentence_b=obj.get("sentence_b", ""),
                    judge=obj["judge"],
                    winner=Winner(obj["winner"]),
                )
            )
    return records


def read_extractions(path: Path | str) -> list[tuple[str, str, str]]:
    """Extraction log: one {"phrase", "finding", "sentence"} object per line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append((obj["phrase"], obj.get("finding", ""), obj.get("sentence", "")))
    return out


def write_vocabulary(csv_path: Path | str, jsonl_path: Path | str, vocab: Vocabulary) -> None:
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["phrase", "count"])
        for phrase in vocab.phrases:
            writer.writerow([phrase.text, phrase.count])
    with open(jsonl_path, "w", encoding="utf-8") as fh:
        for phrase in vocab.phrases:
            for finding, sentence in phrase.occurrences:
                fh.write(
                    json.dumps(
                        {"phrase": phrase.text, "finding": finding, "sentence": sentence},
                        sort_keys=True,
                    )
                    + "\n"
                )


def read_vocabulary(
    csv_path: Path | str, jsonl_path: Path | str, threshold: int = 10
) -> Vocabulary:
    occurrences: dict[str, list[tuple[str, str]]] = {}
    with open(jsonl_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            occurrences.setdefault(obj["phrase"], []).append(
                (obj.get("finding", ""), obj.get("sentence", ""))
            )
    phrases = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            occ = occurrences.get(row["phrase"], [])
            if len(occ) != int(row["count"]):
                raise ValueError(
                    f"occurrence sidecar disagrees with count for {row['phrase']!r}: "
                    f"{len(occ)} != {row['count']}"
                )
            phrases.append(HedgingPhrase(text=row["phrase"], occurrences=tuple(occ)))
    return Vocabulary(phrases=tuple(phrases), threshold=threshold)


def write_ranking(path: Path | str, ranking: ReferenceRanking) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["phrase", "mu", "sigma", "rank"])
        for rank, (phrase, rating) in enumerate(ranking.entries, start=1):
            writer.writerow([phrase, repr(rating.mu), repr(rating.sigma), rank])


def write_per_seed_ratings(path: Path | str, ranking: ReferenceRanking) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["seed", "phrase", "mu", "sigma"])
        for seed, table in ranking.per_seed_ratings:
            for phrase, rating in table:
                writer.writerow([seed, phrase, repr(rating.mu), repr(rating.sigma)])


def read_ranking(path: Path | str) -> ReferenceRanking:
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            entries.append((row["phrase"], Rating(float(row["mu"]), float(row["sigma"]))))
    entries.sort(key=lambda e: (-e[1].mu, e[0]))
    return ReferenceRanking(entries=tuple(entries))


def read_blacklist(path: Path | str) -> list[BlacklistRule]:
    with open(path, newline="", encoding="utf-8") as fh:
        return load_blacklist_rows(csv.DictReader(fh))


def read_decision_matrix(path: Path | str) -> DecisionMatrix:
    """Matrix CSV: first column is the item id, remaining columns are raters."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        raters = tuple(header[1:])
        items = []
        decisions: dict[tuple[str, str], str] = {}
        for row in reader:
            item = row[0]
            items.append(item)
            for rater, cell in zip(raters, row[1:]):
                if cell:
                    decisions[(item, rater)] = cell
    return DecisionMatrix(items=tuple(items), raters=raters, decisions=decisions)


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)

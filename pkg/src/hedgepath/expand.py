"""Pathway expansion pipeline: dedup, matching, recursive expansion, and
conflict resolution, plus the coverage statistics over a processed corpus.

Each report is processed independently: near-duplicate findings are merged
first, every positive finding is aligned with at most one pathway variant,
matched findings are expanded recursively along the pathway DAG, and the
enlarged record set is made internally consistent by deterministic rules.
"""

from __future__ import annotations

import enum
import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np
import requests

from .model import FindingRecord, Source, Status, validate_record
from .pathway import PathwayDictionary, PathwayVariant, dictionary_stats, match, normalize


class ProviderFailure(Exception):
    """Embedding provider could not produce a vector."""


class CycleDetected(Exception):
    """A pathway chain revisited a diagnosis; pathways must form a DAG."""


class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


class HashedTokenProvider:
    """Deterministic lexical embedding: hashed bag of distinct tokens.

    Cosine similarity between two such vectors equals the Otsuka-Ochiai
    coefficient of the token sets (up to rare hash collisions), which keeps the
    pipeline hermetic when no clinical embedding service is configured.
    """

    def __init__(self, dim: int = 512):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dim, dtype=np.float64)
        for token in set(re.findall(r"[a-z0-9-]+", text.lower())):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            vector[int.from_bytes(digest[:8], "big") % self.dim] = 1.0
        return vector


class RemoteEmbeddingProvider:
    """Client for an embedding service: POST {"text": ...} -> {"embedding": [...]}."""

    def __init__(self, url: str, timeout: float = 30.0, retries: int = 2,
                 token: str | None = None):
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.token = token
        self._session = requests.Session()
        self._dim: int | None = None

    def embed(self, text: str) -> np.ndarray:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.post(
                    self.url, json={"text": text}, headers=headers, timeout=self.timeout
                )
                resp.raise_for_status()
                vector = np.asarray(resp.json()["embedding"], dtype=np.float64)
                if self._dim is None:
                    self._dim = vector.size
                elif vector.size != self._dim:
                    raise ProviderFailure(
                        f"embedding length changed from {self._dim} to {vector.size}"
                    )
                return vector
            except ProviderFailure:
                raise
            except (requests.RequestException, ValueError, KeyError) as exc:
                last_error = exc
        raise ProviderFailure(f"embedding request failed: {last_error}") from last_error


@dataclass(frozen=True)
class BlacklistRule:
    """Symmetric substring pair that must never be merged by deduplication."""

    term_a: str
    term_b: str
    category: str = ""

    def blocks(self, phrase_a: str, phrase_b: str) -> bool:
        return (self.term_a in phrase_a and self.term_b in phrase_b) or (
            self.term_b in phrase_a and self.term_a in phrase_b
        )


def linearize(rec: FindingRecord, synonyms: Mapping[str, str] | None = None) -> str:
    """Phrase combining entity, location, and attributes, used for similarity."""
    parts = [normalize(rec.finding, synonyms)]
    if rec.location:
        parts.append(normalize(rec.location, synonyms))
    parts.extend(sorted(normalize(a, synonyms) for a in rec.attributes))
    return ", ".join(parts)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    denom = float(np.linalg.norm(u) * np.linalg.norm(v))
    if denom == 0.0:
        return 0.0
    return float(np.dot(u, v)) / denom


def deduplicate(
    records: Sequence[FindingRecord],
    provider: EmbeddingProvider | None = None,
    threshold: float = 0.9,
    blacklist: Sequence[BlacklistRule] = (),
    synonyms: Mapping[str, str] | None = None,
) -> list[FindingRecord]:
    """Merge near-duplicate findings within each report.

    Pairs whose linearized phrases reach the similarity threshold and are not
    blocked by a blacklist rule are merged transitively (union-find). The
    surviving record keeps the identity of the lexicographically first phrase
    in the cluster and the (status, prob) of the member with the highest
    effective probability.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    provider = provider or HashedTokenProvider()
    phrases = [linearize(rec, synonyms) for rec in records]
    try:
        vectors = [provider.embed(phrase) for phrase in phrases]
    except ProviderFailure:
        raise
    except Exception as exc:  # contract: provider errors surface uniformly
        raise ProviderFailure(str(exc)) from exc

    parent = list(range(len(records)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        parent[find(i)] = find(j)

    by_study: dict[str, list[int]] = {}
    for idx, rec in enumerate(records):
        by_study.setdefault(rec.study_id, []).append(idx)
    for indices in by_study.values():
        for pos, i in enumerate(indices):
            for j in indices[pos + 1 :]:
                if any(rule.blocks(phrases[i], phrases[j]) for rule in blacklist):
                    continue
                if _cosine(vectors[i], vectors[j]) >= threshold:
                    union(i, j)

    clusters: dict[int, list[int]] = {}
    for idx in range(len(records)):
        clusters.setdefault(find(idx), []).append(idx)

    merged: list[tuple[int, FindingRecord]] = []
    for members in clusters.values():
        if len(members) == 1:
            merged.append((members[0], records[members[0]]))
            continue
        canonical_idx = min(members, key=lambda i: (phrases[i], i))
        best_idx = members[0]
        for i in members[1:]:
            better = records[i].effective_prob > records[best_idx].effective_prob or (
                records[i].effective_prob == records[best_idx].effective_prob
                and records[i].status.priority > records[best_idx].status.priority
            )
            if better:
                best_idx = i
        survivor = records[canonical_idx].with_(
            status=records[best_idx].status, prob=records[best_idx].prob
        )
        merged.append((min(members), survivor))
    merged.sort(key=lambda pair: pair[0])
    return [rec for _, rec in merged]


def _child_status(parent: FindingRecord, node_status: Status) -> tuple[Status, float | None]:
    # Positive pathway nodes inherit the parent's certainty and probability.
    # Negative nodes assert absence: definitive parents yield dn, tentative
    # parents yield tn with the complementary probability.
    if node_status is Status.DP:
        return parent.status, parent.prob
    if parent.status is Status.DP:
        return Status.DN, None
    prob = 1.0 - parent.prob if parent.prob is not None else None
    return Status.TN, prob


def expand_finding(
    rec: FindingRecord,
    variant: PathwayVariant,
    dictionary: PathwayDictionary,
    _chain: frozenset[str] = frozenset(),
) -> list[FindingRecord]:
    """Recursively infer sub-finding records below a matched positive finding.

    Children inherit the parent's attributes (extended by the pathway node's
    own attribute refinements), view, and probability semantics; children that
    are themselves expandable diagnoses recurse until leaf nodes.
    """
    if not rec.status.is_positive:
        return []
    if variant.diagnosis in _chain:
        raise CycleDetected(
            f"pathway recursion revisited {variant.diagnosis!r} via {sorted(_chain)}"
        )
    chain = _chain | {variant.diagnosis}
    synonyms = dictionary.synonym_table
    inherited = frozenset(normalize(a, synonyms) for a in rec.attributes)
    out: list[FindingRecord] = []
    for node in variant.children:
        status, prob = _child_status(rec, node.status)
        child = FindingRecord(
            study_id=rec.study_id,
            finding=node.finding,
            location=node.location,
            attributes=inherited | node.attributes,
            view=rec.view,
            status=status,
            prob=prob,
            source=Source.EXPANSION,
            sentence=None,
        )
        out.append(child)
        if child.status.is_positive and node.finding in dictionary.diagnosis_set:
            child_variant = match(child, dictionary)
            if child_variant is not None:
                out.extend(expand_finding(child, child_variant, dictionary, chain))
    return out


class ConflictSource(str, enum.Enum):
    ORIGINAL_VS_EXPANSION = "original_vs_expansion"
    ORIGINAL_VS_ORIGINAL = "original_vs_original"
    EXPANSION_VS_EXPANSION = "expansion_vs_expansion"


class ConflictType(str, enum.Enum):
    POLARITY = "polarity"  # dp vs dn (or any positive vs negative)
    CERTAINTY_POS = "certainty_pos"  # dp vs tp
    CERTAINTY_NEG = "certainty_neg"  # dn vs tn
    DUPLICATE_POS = "duplicate_pos"  # tp vs tp
    DUPLICATE_NEG = "duplicate_neg"  # tn vs tn


@dataclass(frozen=True)
class Conflict:
    study_id: str
    finding: str
    location: str | None
    source: ConflictSource
    type: ConflictType
    members: tuple[FindingRecord, ...]


def _group_key(
    rec: FindingRecord, synonyms: Mapping[str, str] | None
) -> tuple[str, str, str]:
    location = normalize(rec.location, synonyms) if rec.location else ""
    return (rec.study_id, normalize(rec.finding, synonyms), location)


def _classify_type(members: Sequence[FindingRecord]) -> ConflictType:
    statuses = {m.status for m in members}
    has_pos = bool(statuses & {Status.DP, Status.TP})
    has_neg = bool(statuses & {Status.DN, Status.TN})
    if has_pos and has_neg:
        return ConflictType.POLARITY
    if has_pos:
        return ConflictType.CERTAINTY_POS if len(statuses) > 1 else ConflictType.DUPLICATE_POS
    return ConflictType.CERTAINTY_NEG if len(statuses) > 1 else ConflictType.DUPLICATE_NEG


def _classify_source(members: Sequence[FindingRecord]) -> ConflictSource:
    sources = {m.source for m in members}
    if sources == {Source.ORIGINAL, Source.EXPANSION}:
        return ConflictSource.ORIGINAL_VS_EXPANSION
    if sources == {Source.ORIGINAL}:
        return ConflictSource.ORIGINAL_VS_ORIGINAL
    return ConflictSource.EXPANSION_VS_EXPANSION


def detect_conflicts(
    records: Sequence[FindingRecord], synonyms: Mapping[str, str] | None = None
) -> list[Conflict]:
    """Groups of two or more records sharing (study, entity, location)."""
    groups: dict[tuple[str, str, str], list[FindingRecord]] = {}
    for rec in records:
        groups.setdefault(_group_key(rec, synonyms), []).append(rec)
    conflicts = []
    for (study_id, finding, location), members in groups.items():
        if len(members) < 2:
            continue
        conflicts.append(
            Conflict(
                study_id=study_id,
                finding=finding,
                location=location or None,
                source=_classify_source(members),
                type=_classify_type(members),
                members=tuple(members),
            )
        )
    conflicts.sort(key=lambda c: (c.study_id, c.finding, c.location or ""))
    return conflicts


def resolve_conflicts(
    records: Sequence[FindingRecord], synonyms: Mapping[str, str] | None = None
) -> list[FindingRecord]:
    """Collapse every conflict group to at most one record.

    Per (study, entity, location) group: originals silence expansions; a pure
    dp/dn clash among the remainder drops the group; otherwise the member with
    the highest effective probability survives, ties broken by status priority
    dp > tp > tn > dn and then by input order. Output order follows the input.
    """
    groups: dict[tuple[str, str, str], list[int]] = {}
    for idx, rec in enumerate(records):
        groups.setdefault(_group_key(rec, synonyms), []).append(idx)

    keep: set[int] = set()
    for indices in groups.values():
        if len(indices) == 1:
            keep.add(indices[0])
            continue
        members = indices
        if any(records[i].source is Source.ORIGINAL for i in members) and any(
            records[i].source is Source.EXPANSION for i in members
        ):
            members = [i for i in members if records[i].source is Source.ORIGINAL]
        if len(members) == 1:
            keep.add(members[0])
            continue
        statuses = {records[i].status for i in members}
        if statuses == {Status.DP, Status.DN}:
            continue  # pure polarity clash: drop the group
        best = members[0]
        for i in members[1:]:
            better = records[i].effective_prob > records[best].effective_prob or (
                records[i].effective_prob == records[best].effective_prob
                and records[i].status.priority > records[best].status.priority
            )
            if better:
                best = i
        keep.add(best)
    return [rec for idx, rec in enumerate(records) if idx in keep]


@dataclass(frozen=True)
class CoverageRow:
    diagnosis: str
    variants: int
    pathways: int
    depth: int
    width: int
    expandable: int
    expandable_pct: float
    inferred: int
    inferred_pct: float


@dataclass(frozen=True)
class CoverageStats:
    rows: tuple[CoverageRow, ...]
    crosstab: Mapping[tuple[str, str], int]
    n_input: int
    n_deduped: int
    n_inferred: int
    n_pre_resolution: int
    n_resolved: int
    n_conflicts: int
    rows_removed: int

    @property
    def retained_pct(self) -> float:
        if self.n_pre_resolution == 0:
            return 100.0
        return 100.0 * self.n_resolved / self.n_pre_resolution


@dataclass(frozen=True)
class PipelineResult:
    deduped: tuple[FindingRecord, ...]
    anchors: tuple[tuple[FindingRecord, str], ...]  # (record, matched diagnosis)
    expansions: tuple[tuple[str, FindingRecord], ...]  # (root diagnosis, record)
    conflicts: tuple[Conflict, ...]
    resolved: tuple[FindingRecord, ...]

    @property
    def pre_resolution(self) -> tuple[FindingRecord, ...]:
        return self.deduped + tuple(rec for _, rec in self.expansions)


def run_pipeline(
    records: Sequence[FindingRecord],
    dictionary: PathwayDictionary,
    provider: EmbeddingProvider | None = None,
    threshold: float = 0.9,
    blacklist: Sequence[BlacklistRule] = (),
    validate: bool = True,
) -> PipelineResult:
    """Dedup -> match -> expand -> resolve over a record set."""
    if validate:
        for rec in records:
            validate_record(rec)
    synonyms = dictionary.synonym_table
    deduped = deduplicate(records, provider, threshold, blacklist, synonyms)
    anchors: list[tuple[FindingRecord, str]] = []
    expansions: list[tuple[str, FindingRecord]] = []
    for rec in deduped:
        if not rec.status.is_positive:
            continue
        variant = match(rec, dictionary)
        if variant is None:
            continue
        anchors.append((rec, variant.diagnosis))
        for child in expand_finding(rec, variant, dictionary):
            expansions.append((variant.diagnosis, child))
    pre_resolution = list(deduped) + [rec for _, rec in expansions]
    conflicts = detect_conflicts(pre_resolution, synonyms)
    resolved = resolve_conflicts(pre_resolution, synonyms)
    return PipelineResult(
        deduped=tuple(deduped),
        anchors=tuple(anchors),
        expansions=tuple(expansions),
        conflicts=tuple(conflicts),
        resolved=tuple(resolved),
    )


def stats_from_result(
    result: PipelineResult, dictionary: PathwayDictionary, n_input: int | None = None
) -> CoverageStats:
    """Coverage and conflict statistics for one pipeline run."""
    structure = {s.diagnosis: s for s in dictionary_stats(dictionary)}
    expandable = Counter(diagnosis for _, diagnosis in result.anchors)
    inferred = Counter(diagnosis for diagnosis, _ in result.expansions)
    n_in = len(result.deduped) if n_input is None else n_input
    denom = max(n_in, 1)
    rows = [
        CoverageRow(
            diagnosis=diagnosis,
            variants=structure[diagnosis].variants,
            pathways=structure[diagnosis].pathways,
            depth=structure[diagnosis].depth,
            width=structure[diagnosis].width,
            expandable=expandable.get(diagnosis, 0),
            expandable_pct=100.0 * expandable.get(diagnosis, 0) / denom,
            inferred=inferred.get(diagnosis, 0),
            inferred_pct=100.0 * inferred.get(diagnosis, 0) / denom,
        )
        for diagnosis in sorted(structure)
    ]
    crosstab: Counter = Counter()
    for conflict in result.conflicts:
        crosstab[(conflict.type.value, conflict.source.value)] += 1
    n_pre = len(result.pre_resolution)
    return CoverageStats(
        rows=tuple(rows),
        crosstab=dict(crosstab),
        n_input=n_in,
        n_deduped=len(result.deduped),
        n_inferred=len(result.expansions),
        n_pre_resolution=n_pre,
        n_resolved=len(result.resolved),
        n_conflicts=len(result.conflicts),
        rows_removed=n_pre - len(result.resolved),
    )


def coverage_stats(
    before: Sequence[FindingRecord],
    after: Sequence[FindingRecord],
    dictionary: PathwayDictionary,
    provider: EmbeddingProvider | None = None,
    threshold: float = 0.9,
    blacklist: Sequence[BlacklistRule] = (),
) -> CoverageStats:
    """Statistics table for a dataset and its resolved expansion.

    Reruns the (deterministic) pipeline on ``before`` to recover the
    intermediate counts; ``after`` supplies the retained row count.
    """
    result = run_pipeline(before, dictionary, provider, threshold, blacklist)
    stats = stats_from_result(result, dictionary, n_input=len(before))
    n_pre = stats.n_pre_resolution
    return CoverageStats(
        rows=stats.rows,
        crosstab=stats.crosstab,
        n_input=len(before),
        n_deduped=stats.n_deduped,
        n_inferred=stats.n_inferred,
        n_pre_resolution=n_pre,
        n_resolved=len(after),
        n_conflicts=stats.n_conflicts,
        rows_removed=n_pre - len(after),
    )


def load_blacklist_rows(rows: Iterable[Mapping[str, str]]) -> list[BlacklistRule]:
    return [
        BlacklistRule(
            term_a=normalize(row["term_a"]),
            term_b=normalize(row["term_b"]),
            category=row.get("category", ""),
        )
        for row in rows
    ]

"""Diagnostic pathway DSL, dictionary, and finding-to-variant matching.

A pathway line is a set of branches joined by ``&&``; each branch is a chain of
``key: value`` segments joined by ``>`` with keys ``view``, ``ent``, ``status``,
``loc``, ``attr``. The ``view`` segment scopes the whole variant; every other
branch describes one expected child finding, asserted definitively positive
(``dp``) or definitively negative (``dn``).

Matching follows a three-stage filter (finding term, then location class /
trigger attributes / view compatibility) and returns at most one variant:
among compatible variants the most specific trigger signature wins, and any
remaining ambiguity yields no match.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .model import FindingRecord, Status

PROJECTIONS = ("ap", "pa", "lateral")
_DSL_KEYS = ("view", "ent", "status", "loc", "attr")


class PathwayDslError(Exception):
    """Base class for DSL parse failures."""


class EmptyLine(PathwayDslError):
    """Blank pathway line."""


class UnknownKey(PathwayDslError):
    """Segment key outside view/ent/status/loc/attr."""


class MissingEntity(PathwayDslError):
    """Branch without an ent segment."""


class MissingStatus(PathwayDslError):
    """Branch without a status segment."""


class InvalidStatus(PathwayDslError):
    """Pathway nodes assert definitive evidence only (dp or dn)."""


class DictionaryError(Exception):
    """Pathway dictionary failed validation at load time."""


def normalize(term: str, synonyms: Mapping[str, str] | None = None) -> str:
    """Lowercase, collapse whitespace, and resolve through the synonym table.

    Idempotent: synonym tables are flattened at load so values are never keys.
    Unknown terms pass through canonicalized.
    """
    canonical = " ".join(term.lower().split())
    if synonyms:
        return synonyms.get(canonical, canonical)
    return canonical


def flatten_synonyms(pairs: Iterable[tuple[str, str]]) -> dict[str, str]:
    """Canonicalize and transitively resolve a surface->normalized table."""
    table = {normalize(src): normalize(dst) for src, dst in pairs}
    flat: dict[str, str] = {}
    for src in table:
        dst = table[src]
        seen = {src}
        while dst in table and table[dst] != dst:
            if table[dst] in seen:
                raise DictionaryError(f"synonym cycle involving {src!r}")
            seen.add(dst)
            dst = table[dst]
        flat[src] = dst
    return flat


@dataclass(frozen=True)
class PathwayNode:
    """One expected child finding of a pathway variant."""

    finding: str
    status: Status
    location: str | None = None
    attributes: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.status not in (Status.DP, Status.DN):
            raise InvalidStatus(
                f"pathway node status must be dp or dn, got {self.status.value}"
            )


@dataclass(frozen=True)
class PathwayVariant:
    """A view/attribute/location-conditioned instantiation of a diagnosis pathway."""

    diagnosis: str = ""
    variant_name: str = ""
    views: frozenset[str] = field(default_factory=frozenset)
    trigger_attributes: frozenset[str] = field(default_factory=frozenset)
    trigger_location_class: str | None = None
    children: tuple[PathwayNode, ...] = ()

    @property
    def projections(self) -> frozenset[str]:
        return frozenset(v for v in self.views if v in PROJECTIONS)

    @property
    def orientations(self) -> frozenset[str]:
        return frozenset(v for v in self.views if v not in PROJECTIONS)

    def trigger_signature(self) -> tuple:
        return (
            tuple(sorted(self.views)),
            tuple(sorted(self.trigger_attributes)),
            self.trigger_location_class or "",
        )


def _parse_segment(segment: str, line: str) -> tuple[str, list[str]]:
    head, sep, tail = segment.partition(":")
    key = head.strip().lower()
    if not sep or key not in _DSL_KEYS:
        raise UnknownKey(f"unknown or malformed segment {segment.strip()!r} in {line!r}")
    values = [" ".join(v.split()) for v in tail.lower().split(",")]
    return key, [v for v in values if v]


def parse_pathway(
    line: str,
    diagnosis: str = "",
    variant_name: str = "",
    trigger_attributes: frozenset[str] = frozenset(),
    trigger_location_class: str | None = None,
) -> PathwayVariant:
    """Parse one DSL line into a variant; metadata fields are caller-supplied.

    Segment order within a branch is free: keys identify roles. A ``view``
    segment in any branch applies to the whole variant.
    """
    if not line.strip():
        raise EmptyLine("empty pathway line")
    views: set[str] = set()
    children: list[PathwayNode] = []
    for branch in line.split("&&"):
        fields: dict[str, list[str]] = {}
        for segment in branch.split(">"):
            if not segment.strip():
                continue
            key, values = _parse_segment(segment, line)
            if key == "view":
                views.update(values)
            else:
                fields.setdefault(key, []).extend(values)
        if not fields:
            continue  # view-only branch
        ent = fields.get("ent")
        if not ent:
            raise MissingEntity(f"branch without entity in {line!r}")
        status_values = fields.get("status")
        if not status_values:
            raise MissingStatus(f"branch for {ent[0]!r} lacks a status in {line!r}")
        try:
            status = Status(status_values[0])
        except ValueError as exc:
            raise InvalidStatus(
                f"bad status token {status_values[0]!r} in {line!r}"
            ) from exc
        location_values = fields.get("loc", [])
        children.append(
            PathwayNode(
                finding=ent[0],
                status=status,
                location=location_values[0] if location_values else None,
                attributes=frozenset(fields.get("attr", [])),
            )
        )
    if not children:
        raise MissingEntity(f"no child branches in {line!r}")
    return PathwayVariant(
        diagnosis=normalize(diagnosis),
        variant_name=normalize(variant_name),
        views=frozenset(views),
        trigger_attributes=trigger_attributes,
        trigger_location_class=trigger_location_class,
        children=tuple(children),
    )


def _ordered_views(views: frozenset[str]) -> list[str]:
    ordered = [p for p in PROJECTIONS if p in views]
    ordered.extend(sorted(v for v in views if v not in PROJECTIONS))
    return ordered


def serialize_pathway(variant: PathwayVariant) -> str:
    """Canonical DSL form: view segment first, then one branch per child."""
    branches = []
    for idx, node in enumerate(variant.children):
        segments = []
        if idx == 0 and variant.views:
            segments.append(f"view: {', '.join(_ordered_views(variant.views))}")
        segments.append(f"ent: {node.finding}")
        segments.append(f"status: {node.status.value}")
        if node.location:
            segments.append(f"loc: {node.location}")
        if node.attributes:
            segments.append(f"attr: {', '.join(sorted(node.attributes))}")
        branches.append(" > ".join(segments))
    return " && ".join(branches)


def _normalize_variant(variant: PathwayVariant, synonyms: Mapping[str, str]) -> PathwayVariant:
    return PathwayVariant(
        diagnosis=normalize(variant.diagnosis, synonyms),
        variant_name=normalize(variant.variant_name, synonyms),
        views=frozenset(normalize(v, synonyms) for v in variant.views),
        trigger_attributes=frozenset(
            normalize(a, synonyms) for a in variant.trigger_attributes
        ),
        trigger_location_class=variant.trigger_location_class,
        children=tuple(
            PathwayNode(
                finding=normalize(node.finding, synonyms),
                status=node.status,
                location=normalize(node.location, synonyms) if node.location else None,
                attributes=frozenset(normalize(a, synonyms) for a in node.attributes),
            )
            for node in variant.children
        ),
    )


@dataclass(frozen=True)
class PathwayDictionary:
    """Immutable set of pathway variants plus the normalization tables."""

    variants: tuple[PathwayVariant, ...]
    synonym_table: Mapping[str, str] = field(default_factory=dict)
    location_classes: Mapping[str, str] = field(default_factory=dict)

    @property
    def diagnosis_set(self) -> frozenset[str]:
        return frozenset(v.diagnosis for v in self.variants)

    def variants_of(self, diagnosis: str) -> tuple[PathwayVariant, ...]:
        return tuple(v for v in self.variants if v.diagnosis == diagnosis)

    def normalize_term(self, term: str) -> str:
        return normalize(term, self.synonym_table)


def build_dictionary(
    variants: Iterable[PathwayVariant],
    synonyms: Mapping[str, str] | None = None,
    location_classes: Mapping[str, str] | None = None,
) -> PathwayDictionary:
    """Normalize variants and enforce trigger-signature uniqueness per diagnosis."""
    synonyms = dict(synonyms or {})
    location_classes = {
        normalize(term, synonyms): " ".join(cls.lower().split())
        for term, cls in (location_classes or {}).items()
    }
    normalized = [_normalize_variant(v, synonyms) for v in variants]
    seen: dict[tuple, str] = {}
    for v in normalized:
        key = (v.diagnosis, v.trigger_signature())
        if key in seen:
            raise DictionaryError(
                f"duplicate trigger signature for diagnosis {v.diagnosis!r}: "
                f"variants {seen[key]!r} and {v.variant_name!r}"
            )
        seen[key] = v.variant_name
    return PathwayDictionary(
        variants=tuple(normalized),
        synonym_table=synonyms,
        location_classes=location_classes,
    )


def load_dictionary(
    pathway_csv: Path | str,
    synonyms_csv: Path | str | None = None,
    location_classes_csv: Path | str | None = None,
) -> PathwayDictionary:
    """Load and validate the dictionary from its CSV artifacts."""
    synonyms: dict[str, str] = {}
    if synonyms_csv is not None:
        with open(synonyms_csv, newline="", encoding="utf-8") as fh:
            synonyms = flatten_synonyms(
                (row["surface"], row["normalized"]) for row in csv.DictReader(fh)
            )
    location_classes: dict[str, str] = {}
    if location_classes_csv is not None:
        with open(location_classes_csv, newline="", encoding="utf-8") as fh:
            location_classes = {row["term"]: row["class"] for row in csv.DictReader(fh)}

    variants = []
    with open(pathway_csv, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            trigger_attrs = frozenset(
                normalize(a) for a in row["trigger_attributes"].split(";") if a.strip()
            )
            locclass = " ".join(row["trigger_location_class"].lower().split()) or None
            variant = parse_pathway(
                row["pathway_dsl"],
                diagnosis=row["diagnosis"],
                variant_name=row["variant"],
                trigger_attributes=trigger_attrs,
                trigger_location_class=locclass,
            )
            declared_views = frozenset(
                normalize(v) for v in row["views"].split(";") if v.strip()
            )
            if declared_views != variant.views:
                raise DictionaryError(
                    f"views column {sorted(declared_views)} disagrees with DSL views "
                    f"{sorted(variant.views)} for variant {row['variant']!r}"
                )
            variants.append(variant)
    return build_dictionary(variants, synonyms, location_classes)


def view_tokens(view: str | None, synonyms: Mapping[str, str] | None = None) -> frozenset[str]:
    """Split a view descriptor like ``"pa, erect"`` into normalized tokens."""
    if not view:
        return frozenset()
    raw = view.replace(";", ",").split(",")
    return frozenset(normalize(tok, synonyms) for tok in raw if tok.strip())


def _view_ok(variant: PathwayVariant, record_views: frozenset[str]) -> bool:
    # A variant restricting a view component requires the record to state it.
    record_proj = frozenset(v for v in record_views if v in PROJECTIONS)
    record_orient = frozenset(v for v in record_views if v not in PROJECTIONS)
    if variant.projections != frozenset(PROJECTIONS):
        if not record_proj or not record_proj <= variant.projections:
            return False
    if variant.orientations:
        if not record_orient or not record_orient <= variant.orientations:
            return False
    return True


def _loc_ok(
    variant: PathwayVariant, location: str | None, location_classes: Mapping[str, str]
) -> bool:
    if variant.trigger_location_class is None:
        return True
    if location is None:
        return False
    return location_classes.get(location) == variant.trigger_location_class


def _dominates(a: PathwayVariant, b: PathwayVariant) -> bool:
    """True when a's trigger signature is strictly more specific than b's.

    Attribute triggers take precedence (a strict superset wins outright, so an
    attribute-selected variant beats a merely view-conditioned sibling); with
    equal attribute triggers, stricter view restrictions and a required
    location class break the tie. Incomparable signatures dominate neither way.
    """
    if a.trigger_attributes > b.trigger_attributes:
        return True
    if a.trigger_attributes != b.trigger_attributes:
        return False
    loc_a = frozenset([a.trigger_location_class] if a.trigger_location_class else [])
    loc_b = frozenset([b.trigger_location_class] if b.trigger_location_class else [])
    at_least = (
        a.orientations >= b.orientations
        and a.projections <= b.projections
        and loc_a >= loc_b
    )
    strictly = (
        a.orientations != b.orientations
        or a.projections != b.projections
        or loc_a != loc_b
    )
    return at_least and strictly


def match(rec: FindingRecord, dictionary: PathwayDictionary) -> PathwayVariant | None:
    """Align a finding with at most one pathway variant, else None.

    Candidates share the normalized diagnosis term; compatibility then requires
    location class, trigger attributes (subset of the record's), and view all
    to hold. Among survivors the most specific trigger wins; residual ties are
    treated as ambiguous and yield no match.
    """
    synonyms = dictionary.synonym_table
    finding = normalize(rec.finding, synonyms)
    candidates = dictionary.variants_of(finding)
    if not candidates:
        return None
    location = normalize(rec.location, synonyms) if rec.location else None
    attrs = frozenset(normalize(a, synonyms) for a in rec.attributes)
    views = view_tokens(rec.view, synonyms)
    survivors = [
        v
        for v in candidates
        if _loc_ok(v, location, dictionary.location_classes)
        and v.trigger_attributes <= attrs
        and _view_ok(v, views)
    ]
    if not survivors:
        return None
    undominated = [
        v
        for v in survivors
        if not any(other is not v and _dominates(other, v) for other in survivors)
    ]
    if len(undominated) == 1:
        return undominated[0]
    return None


@dataclass(frozen=True)
class DiagnosisStats:
    diagnosis: str
    variants: int
    pathways: int
    depth: int
    width: int


def _closure_leaf_terms(
    diagnosis: str, dictionary: PathwayDictionary, seen: frozenset[str]
) -> frozenset[str]:
    if diagnosis in seen:
        return frozenset()
    terms: set[str] = set()
    for variant in dictionary.variants_of(diagnosis):
        for node in variant.children:
            if node.finding in dictionary.diagnosis_set:
                terms |= _closure_leaf_terms(
                    node.finding, dictionary, seen | {diagnosis}
                )
            else:
                terms.add(node.finding)
    return frozenset(terms)


def _diagnosis_depth(
    diagnosis: str, dictionary: PathwayDictionary, seen: frozenset[str]
) -> int:
    if diagnosis in seen:
        return 0
    depth = 0
    for variant in dictionary.variants_of(diagnosis):
        for node in variant.children:
            if node.finding in dictionary.diagnosis_set:
                depth = max(
                    depth,
                    1 + _diagnosis_depth(node.finding, dictionary, seen | {diagnosis}),
                )
            else:
                depth = max(depth, 1)
    return depth


def dictionary_stats(dictionary: PathwayDictionary) -> list[DiagnosisStats]:
    """Structure statistics per diagnosis: variant/pathway counts, depth, width.

    Depth counts the longest recursive expansion chain; width counts the
    distinct leaf finding terms reachable across all of a diagnosis's pathways.
    """
    stats = []
    for diagnosis in sorted(dictionary.diagnosis_set):
        variants = dictionary.variants_of(diagnosis)
        names = {v.variant_name for v in variants}
        dsl_forms = {
            serialize_pathway(
                PathwayVariant(views=v.views, children=v.children)
            )
            for v in variants
        }
        stats.append(
            DiagnosisStats(
                diagnosis=diagnosis,
                variants=len(names),
                pathways=len(dsl_forms),
                depth=_diagnosis_depth(diagnosis, dictionary, frozenset()),
                width=len(_closure_leaf_terms(diagnosis, dictionary, frozenset())),
            )
        )
    return stats

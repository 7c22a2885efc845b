"""Shared domain types for findings, ratings, comparisons, and hedging phrases."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace


class ModelError(Exception):
    """Base class for domain validation errors."""


class InvalidProbability(ModelError):
    """Probability outside [0, 1], or inconsistent with a definitive status."""


class MissingProbability(ModelError):
    """Tentative finding carries no probability."""


class SentenceOnExpansion(ModelError):
    """Inferred (expansion) records must not carry a source sentence."""


class Status(str, enum.Enum):
    """Finding status: polarity crossed with certainty.

    Resolution priority is total: dp > tp > tn > dn.
    """

    DP = "dp"  # definitive positive
    TP = "tp"  # tentative positive
    TN = "tn"  # tentative negative
    DN = "dn"  # definitive negative

    @property
    def priority(self) -> int:
        return _STATUS_PRIORITY[self]

    @property
    def is_positive(self) -> bool:
        return self in (Status.DP, Status.TP)

    @property
    def is_definitive(self) -> bool:
        return self in (Status.DP, Status.DN)

    def dominates(self, other: "Status") -> bool:
        return self.priority > other.priority


_STATUS_PRIORITY = {Status.DP: 3, Status.TP: 2, Status.TN: 1, Status.DN: 0}


class Source(str, enum.Enum):
    """Whether a record was stated in the report or inferred by expansion."""

    ORIGINAL = "original"
    EXPANSION = "expansion"


class Winner(str, enum.Enum):
    """Which side of a pairwise comparison conveyed greater certainty."""

    A = "A"
    B = "B"

    def flipped(self) -> "Winner":
        return Winner.B if self is Winner.A else Winner.A


@dataclass(frozen=True)
class Rating:
    """Gaussian belief over an item's position on the certainty spectrum."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class FindingRecord:
    """One structured finding row.

    ``attributes`` is a frozenset of normalized attribute terms; ``view`` is a
    free-form descriptor such as ``"pa, erect"``. Definitive statuses carry an
    implicit probability (dp -> 1.0, dn -> 0.0); ``prob`` is stored only for
    tentative findings.
    """

    study_id: str
    finding: str
    location: str | None = None
    attributes: frozenset[str] = field(default_factory=frozenset)
    view: str | None = None
    status: Status = Status.DP
    prob: float | None = None
    source: Source = Source.ORIGINAL
    sentence: str | None = None

    @property
    def effective_prob(self) -> float:
        """Probability used in resolution math; implicit for definitive rows."""
        if self.status is Status.DP:
            return 1.0
        if self.status is Status.DN:
            return 0.0
        return self.prob if self.prob is not None else 0.5

    def with_(self, **changes) -> "FindingRecord":
        return replace(self, **changes)


def validate_record(rec: FindingRecord) -> None:
    """Check the FindingRecord invariants, raising the first violation found.

    Raises:
        InvalidProbability: prob outside [0, 1], or a definitive row storing a
            probability other than its implicit value.
        MissingProbability: tentative row without prob.
        SentenceOnExpansion: expansion row carrying a sentence.
    """
    if rec.prob is not None and not 0.0 <= rec.prob <= 1.0:
        raise InvalidProbability(
            f"prob {rec.prob} outside [0, 1] for {rec.finding!r}"
        )
    if not rec.status.is_definitive and rec.prob is None:
        raise MissingProbability(
            f"status {rec.status.value} requires a probability for {rec.finding!r}"
        )
    if rec.status is Status.DP and rec.prob not in (None, 1.0):
        raise InvalidProbability(
            f"definitive positive implies prob 1.0, got {rec.prob}"
        )
    if rec.status is Status.DN and rec.prob not in (None, 0.0):
        raise InvalidProbability(
            f"definitive negative implies prob 0.0, got {rec.prob}"
        )
    if rec.source is Source.EXPANSION and rec.sentence is not None:
        raise SentenceOnExpansion(
            f"expansion record for {rec.finding!r} must not carry a sentence"
        )


@dataclass(frozen=True)
class ComparisonRecord:
    """One logged pairwise judgment between two phrase/sentence items."""

    item_a: str
    item_b: str
    sentence_a: str
    sentence_b: str
    judge: str
    winner: Winner

    def __post_init__(self) -> None:
        if self.item_a == self.item_b:
            raise ValueError(f"comparison items must differ, got {self.item_a!r}")


@dataclass(frozen=True)
class HedgingPhrase:
    """A hedging phrase with the finding/sentence contexts it was extracted from."""

    text: str
    occurrences: tuple[tuple[str, str], ...]  # (finding, sentence) pairs

    @property
    def count(self) -> int:
        return len(self.occurrences)

    @property
    def sentences(self) -> tuple[str, ...]:
        return tuple(sentence for _, sentence in self.occurrences)

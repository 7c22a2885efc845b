"""Agreement and rank-correlation statistics for validating rankings and judges."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence


class MetricsError(Exception):
    """Base class for agreement-statistic errors."""


class NoOverlap(MetricsError):
    """Two raters share no jointly rated items."""


class MissingEntries(MetricsError):
    """Fleiss' kappa needs a complete decision matrix."""


class InsufficientData(MetricsError):
    """Krippendorff's alpha needs at least one item with two codings."""


class ItemMismatch(MetricsError):
    """Spearman correlation needs identical item sets."""


CATEGORIES = ("A", "B")


@dataclass(frozen=True)
class DecisionMatrix:
    """Categorical outcomes per (item, rater); absent keys are missing entries."""

    items: tuple[str, ...]
    raters: tuple[str, ...]
    decisions: Mapping[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for (item, rater), value in self.decisions.items():
            if value not in CATEGORIES:
                raise ValueError(f"decision {value!r} for ({item}, {rater}) not in {CATEGORIES}")

    def get(self, item: str, rater: str) -> str | None:
        return self.decisions.get((item, rater))

    def column(self, rater: str) -> dict[str, str]:
        return {
            item: self.decisions[(item, rater)]
            for item in self.items
            if (item, rater) in self.decisions
        }


def pairwise_agreement(m: DecisionMatrix, rater_x: str, rater_y: str) -> float:
    """Fraction of jointly rated items on which the two raters concur."""
    if rater_x not in m.raters or rater_y not in m.raters:
        raise ValueError(f"raters must be in the matrix: {rater_x!r}, {rater_y!r}")
    col_x = m.column(rater_x)
    col_y = m.column(rater_y)
    joint = [item for item in m.items if item in col_x and item in col_y]
    if not joint:
        raise NoOverlap(f"{rater_x!r} and {rater_y!r} share no rated items")
    agree = sum(1 for item in joint if col_x[item] == col_y[item])
    return agree / len(joint)


def fleiss_kappa(m: DecisionMatrix) -> float:
    """Fleiss' kappa over the two outcome categories for a complete matrix."""
    if len(m.raters) < 2:
        raise ValueError("fleiss_kappa needs at least 2 raters")
    if not m.items:
        raise ValueError("fleiss_kappa needs at least 1 item")
    n_raters = len(m.raters)
    counts = []
    for item in m.items:
        row = {cat: 0 for cat in CATEGORIES}
        for rater in m.raters:
            value = m.get(item, rater)
            if value is None:
                raise MissingEntries(f"missing decision for ({item!r}, {rater!r})")
            row[value] += 1
        counts.append(row)

    n_items = len(m.items)
    p_item = [
        (sum(c * c for c in row.values()) - n_raters) / (n_raters * (n_raters - 1))
        for row in counts
    ]
    p_bar = sum(p_item) / n_items
    totals = {
        cat: sum(row[cat] for row in counts) / (n_items * n_raters) for cat in CATEGORIES
    }
    p_expected = sum(share * share for share in totals.values())
    if p_bar == 1.0:
        return 1.0
    return (p_bar - p_expected) / (1.0 - p_expected)


def krippendorff_alpha(m: DecisionMatrix) -> float:
    """Krippendorff's alpha with the nominal distance metric; tolerates missing cells."""
    if len(m.raters) < 2:
        raise ValueError("krippendorff_alpha needs at least 2 raters")
    coincidence = {(a, b): 0.0 for a in CATEGORIES for b in CATEGORIES}
    for item in m.items:
        values = [m.get(item, rater) for rater in m.raters]
        values = [v for v in values if v is not None]
        if len(values) < 2:
            continue
        m_u = len(values)
        for i, v_i in enumerate(values):
            for j, v_j in enumerate(values):
                if i != j:
                    coincidence[(v_i, v_j)] += 1.0 / (m_u - 1)
    total = sum(coincidence.values())
    if total == 0:
        raise InsufficientData("no item carries two or more codings")
    margins = {cat: sum(coincidence[(cat, other)] for other in CATEGORIES) for cat in CATEGORIES}
    observed_disagreement = sum(
        v for (a, b), v in coincidence.items() if a != b
    ) / total
    expected_disagreement = sum(
        margins[a] * margins[b] for a in CATEGORIES for b in CATEGORIES if a != b
    ) / (total * (total - 1))
    if expected_disagreement == 0.0:
        return 1.0
    return 1.0 - observed_disagreement / expected_disagreement


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman_rho(
    ranking_x: Sequence[tuple[str, float]], ranking_y: Sequence[tuple[str, float]]
) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    map_x = dict(ranking_x)
    map_y = dict(ranking_y)
    if len(map_x) != len(ranking_x) or len(map_y) != len(ranking_y):
        raise ItemMismatch("duplicate items in a ranking")
    if set(map_x) != set(map_y):
        raise ItemMismatch("rankings cover different item sets")
    items = sorted(map_x)
    if len(items) < 2:
        raise ValueError("spearman_rho needs at least 2 items")
    rx = _average_ranks([map_x[i] for i in items])
    ry = _average_ranks([map_y[i] for i in items])
    n = len(items)
    mean_x = sum(rx) / n
    mean_y = sum(ry) / n
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(rx, ry))
    var_x = sum((a - mean_x) ** 2 for a in rx)
    var_y = sum((b - mean_y) ** 2 for b in ry)
    if var_x == 0.0 or var_y == 0.0:
        raise ValueError("a ranking with all-tied ranks has no rank correlation")
    return cov / (var_x * var_y) ** 0.5


def ranks_from_scores(
    scores: Mapping[str, float], descending: bool = True
) -> list[tuple[str, float]]:
    """Turn a score table into (item, rank) pairs, rank 1 for the best score."""
    sign = -1.0 if descending else 1.0
    ranks = _average_ranks([sign * scores[item] for item in sorted(scores)])
    return list(zip(sorted(scores), ranks))

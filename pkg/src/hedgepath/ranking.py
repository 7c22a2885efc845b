"""Vocabulary building, reference ranking construction, rank fitting, and the
skill-to-probability map.

The reference ranking orders vocabulary hedging phrases by mean skill across
seeded replays of the comparison log. New finding-sentence pairs are fitted
into that frozen ranking by iteratively playing the most informative opponent
(highest draw probability) and updating only the target's rating.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .judges import Judge
from .model import ComparisonRecord, HedgingPhrase, Rating, Winner
from .rating import RatingConfig, draw_probability, update


class UnknownPhrase(Exception):
    """Comparison log references phrases outside the vocabulary."""

    def __init__(self, offenders: Sequence[str]):
        self.offenders = sorted(set(offenders))
        super().__init__(f"unknown phrases: {', '.join(self.offenders)}")


class ExhaustedOpponents(Exception):
    """All reference opponents hit their comparison cap before termination."""


class DegenerateAnchors(Exception):
    """Calibration anchors do not determine a strictly increasing sigmoid."""


def _canonical(text: str) -> str:
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class Vocabulary:
    """Hedging phrases admitted by the occurrence-count threshold."""

    phrases: tuple[HedgingPhrase, ...]
    threshold: int = 10

    def __contains__(self, phrase: str) -> bool:
        return any(p.text == phrase for p in self.phrases)

    def phrase_texts(self) -> tuple[str, ...]:
        return tuple(p.text for p in self.phrases)

    def sentence_pool(self) -> dict[str, tuple[str, ...]]:
        return {p.text: p.sentences for p in self.phrases}


def build_vocabulary(
    extractions: Sequence[tuple[str, str, str]], threshold: int = 10
) -> Vocabulary:
    """Admit every phrase extracted at least ``threshold`` times.

    ``extractions`` holds (phrase, finding, sentence) triples, one per
    extraction event. Phrases are canonicalized by lowercasing and whitespace
    collapse before counting. The result is ordered by count descending, ties
    by phrase.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    occurrences: dict[str, list[tuple[str, str]]] = {}
    for phrase, finding, sentence in extractions:
        occurrences.setdefault(_canonical(phrase), []).append((finding, sentence))
    admitted = [
        HedgingPhrase(text=text, occurrences=tuple(occ))
        for text, occ in occurrences.items()
        if len(occ) >= threshold
    ]
    admitted.sort(key=lambda p: (-p.count, p.text))
    return Vocabulary(phrases=tuple(admitted), threshold=threshold)


@dataclass(frozen=True)
class ReferenceRanking:
    """Phrases ordered by mean mu (descending) over per-seed rating runs."""

    entries: tuple[tuple[str, Rating], ...]
    seeds_used: int = 1
    per_seed_ratings: tuple[tuple[int, tuple[tuple[str, Rating], ...]], ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def phrases(self) -> tuple[str, ...]:
        return tuple(phrase for phrase, _ in self.entries)

    def rating_of(self, phrase: str) -> Rating:
        for name, rating in self.entries:
            if name == phrase:
                return rating
        raise KeyError(phrase)

    def rank_of_phrase(self, phrase: str) -> int:
        for idx, (name, _) in enumerate(self.entries):
            if name == phrase:
                return idx + 1
        raise KeyError(phrase)

    def without(self, phrase: str) -> "ReferenceRanking":
        return ReferenceRanking(
            entries=tuple(e for e in self.entries if e[0] != phrase),
            seeds_used=self.seeds_used,
        )


def build_reference_ranking(
    comparisons: Sequence[ComparisonRecord],
    cfg: RatingConfig,
    seeds: Sequence[int],
    phrases: Sequence[str] | None = None,
) -> ReferenceRanking:
    """Replay the comparison log once per seed and average the final ratings.

    Each seed shuffles the comparisons into a different order and applies them
    sequentially, updating both players. The published mu/sigma per phrase are
    arithmetic means across seeds; entries are sorted by mean mu descending
    with ties broken by phrase.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    if phrases is not None:
        known = set(phrases)
        offenders = [
            item
            for rec in comparisons
            for item in (rec.item_a, rec.item_b)
            if item not in known
        ]
        if offenders:
            raise UnknownPhrase(offenders)
        items: list[str] = sorted(known)
    else:
        items = sorted({i for rec in comparisons for i in (rec.item_a, rec.item_b)})

    per_seed: list[tuple[int, tuple[tuple[str, Rating], ...]]] = []
    for seed in seeds:
        ratings = {item: cfg.initial_rating() for item in items}
        order = list(comparisons)
        random.Random(seed).shuffle(order)
        for rec in order:
            if rec.winner is Winner.A:
                winner_id, loser_id = rec.item_a, rec.item_b
            else:
                winner_id, loser_id = rec.item_b, rec.item_a
            ratings[winner_id], ratings[loser_id] = update(
                ratings[winner_id], ratings[loser_id], cfg
            )
        per_seed.append((seed, tuple((item, ratings[item]) for item in items)))

    mean_entries = []
    n = len(per_seed)
    for idx, item in enumerate(items):
        mu = sum(table[idx][1].mu for _, table in per_seed) / n
        sigma = sum(table[idx][1].sigma for _, table in per_seed) / n
        mean_entries.append((item, Rating(mu, sigma)))
    mean_entries.sort(key=lambda e: (-e[1].mu, e[0]))
    return ReferenceRanking(
        entries=tuple(mean_entries),
        seeds_used=n,
        per_seed_ratings=tuple(per_seed),
    )


def rank_of(mu: float, ranking: ReferenceRanking) -> int:
    """1-based position ``mu`` would occupy in the mu-descending entry list."""
    if not ranking.entries:
        raise ValueError("ranking is empty")
    return 1 + sum(1 for _, rating in ranking.entries if rating.mu > mu)


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the rank-fitting loop.

    ``k_all_judges`` iterations use the full judge panel, after which a single
    judge is drawn per step; each opponent may be selected at most
    ``per_opponent_cap`` times.
    """

    k_all_judges: int = 10
    per_opponent_cap: int = 5
    max_steps: int = 100
    patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.k_all_judges > self.max_steps:
            raise ValueError("k_all_judges must not exceed max_steps")
        if self.per_opponent_cap < 1:
            raise ValueError("per_opponent_cap must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass(frozen=True)
class FitTarget:
    """The item being fitted: an id for judges plus the sentence they read."""

    item_id: str
    sentence: str
    finding: str = ""


@dataclass(frozen=True)
class FitStep:
    opponent: str
    outcomes: tuple[Winner, ...]
    rank_after: int


@dataclass(frozen=True)
class FitResult:
    rating: Rating
    steps_taken: int
    trace: tuple[FitStep, ...]

    def opponent_counts(self) -> Counter:
        return Counter(step.opponent for step in self.trace)


def fit_item(
    target: FitTarget,
    ranking: ReferenceRanking,
    judges: Sequence[Judge],
    fit_cfg: FitConfig,
    rating_cfg: RatingConfig,
    sentence_pool: Mapping[str, Sequence[str]] | None = None,
    opponent_strategy: str = "draw_probability",
) -> FitResult:
    """Fit one finding-sentence pair into a frozen reference ranking.

    Loop: pick the uncapped opponent with the highest draw probability (ties
    broken by lexicographically lowest phrase; the ``random`` strategy draws
    uniformly instead), sample one of its sentences, ask the judge panel, and
    update only the target's rating once per outcome. Terminates after
    ``patience`` consecutive steps with an unchanged rank or at ``max_steps``.
    """
    if not ranking.entries:
        raise ValueError("reference ranking is empty")
    if not judges:
        raise ValueError("at least one judge is required")
    if opponent_strategy not in ("draw_probability", "random"):
        raise ValueError(f"unknown opponent strategy {opponent_strategy!r}")

    rng = random.Random(fit_cfg.seed)
    rating = rating_cfg.initial_rating()
    counts: Counter = Counter()
    prev_rank = rank_of(rating.mu, ranking)
    stable = 0
    steps = 0
    trace: list[FitStep] = []

    while steps < fit_cfg.max_steps and stable < fit_cfg.patience:
        available = [
            (phrase, ref)
            for phrase, ref in ranking.entries
            if counts[phrase] < fit_cfg.per_opponent_cap
        ]
        if not available:
            raise ExhaustedOpponents(
                f"all {len(ranking)} opponents capped at {fit_cfg.per_opponent_cap} "
                f"after {steps} steps"
            )
        if opponent_strategy == "draw_probability":
            opp_phrase, opp_rating = min(
                available,
                key=lambda e: (-draw_probability(rating, e[1], rating_cfg), e[0]),
            )
        else:
            opp_phrase, opp_rating = available[rng.randrange(len(available))]
        counts[opp_phrase] += 1

        pool = sentence_pool.get(opp_phrase) if sentence_pool else None
        opp_sentence = pool[rng.randrange(len(pool))] if pool else opp_phrase

        if steps < fit_cfg.k_all_judges:
            panel: Sequence[Judge] = judges
        else:
            panel = (judges[rng.randrange(len(judges))],)

        outcomes = []
        for judge in panel:
            outcome = judge.compare(
                target.sentence, opp_sentence, target.item_id, opp_phrase
            )
            outcomes.append(outcome.winner)
            if outcome.winner is Winner.A:
                rating, _ = update(rating, opp_rating, rating_cfg)
            else:
                _, rating = update(opp_rating, rating, rating_cfg)

        rank = rank_of(rating.mu, ranking)
        stable = stable + 1 if rank == prev_rank else 0
        prev_rank = rank
        steps += 1
        trace.append(FitStep(opp_phrase, tuple(outcomes), rank))

    return FitResult(rating=rating, steps_taken=steps, trace=tuple(trace))


@dataclass(frozen=True)
class SigmoidMap:
    """p = 1 / (1 + exp(-alpha * (mu - mu0))); strictly increasing in mu."""

    alpha: float
    mu0: float

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def calibrate_sigmoid(
    anchor_low: tuple[float, float], anchor_high: tuple[float, float]
) -> SigmoidMap:
    """Solve logit(p) = alpha * (mu - mu0) at the two (mu, p) anchors."""
    mu_low, p_low = anchor_low
    mu_high, p_high = anchor_high
    if not (0.0 < p_low < 1.0 and 0.0 < p_high < 1.0):
        raise DegenerateAnchors("anchor probabilities must lie strictly in (0, 1)")
    if mu_low >= mu_high or p_low >= p_high:
        raise DegenerateAnchors(
            "anchors must satisfy mu_low < mu_high and p_low < p_high"
        )
    alpha = (_logit(p_high) - _logit(p_low)) / (mu_high - mu_low)
    mu0 = mu_low - _logit(p_low) / alpha
    return SigmoidMap(alpha=alpha, mu0=mu0)


def map_probability(mu: float, sigmoid: SigmoidMap) -> float:
    """Map a skill mean onto the open interval (0, 1) through the sigmoid."""
    z = sigmoid.alpha * (mu - sigmoid.mu0)
    if z >= 0:
        p = 1.0 / (1.0 + math.exp(-min(z, 700.0)))
    else:
        p = 1.0 - 1.0 / (1.0 + math.exp(min(z, 700.0)))
    # keep the contract open-interval even where exp underflows
    if p <= 0.0:
        return math.nextafter(0.0, 1.0)
    if p >= 1.0:
        return math.nextafter(1.0, 0.0)
    return p

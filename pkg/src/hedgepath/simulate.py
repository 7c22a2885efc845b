"""Leave-one-out refitting experiments and hyperparameter sweeps.

Each vocabulary phrase is removed from the reference ranking and fitted back in
with a chosen opponent-selection strategy; the per-iteration distance between
the estimated rank and the phrase's original rank measures how quickly and how
stably the fitting loop recovers known positions. Synthetic judges driven by
the ranking's own mu values serve as the default oracle.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from statistics import mean, pstdev
from typing import Callable, Sequence

from .judges import Judge, synthetic_panel
from .ranking import FitConfig, FitTarget, ReferenceRanking, fit_item
from .rating import RatingConfig

JudgeFactory = Callable[[int], Sequence[Judge]]


@dataclass(frozen=True)
class StrategyConfig:
    """One experiment configuration.

    ``judge_mode`` is either ``"all"`` (full panel for the first K steps, then
    one at random, as in the production fitting loop) or ``"single:<name>"``
    to pin every comparison to one judge.
    """

    strategy: str = "draw_probability"
    judge_mode: str = "all"
    seeds: tuple[int, ...] = (0,)
    fit: FitConfig = field(default_factory=FitConfig)
    rating: RatingConfig = field(default_factory=RatingConfig)

    def __post_init__(self) -> None:
        if self.strategy not in ("draw_probability", "random"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.judge_mode != "all" and not self.judge_mode.startswith("single:"):
            raise ValueError(f"unknown judge mode {self.judge_mode!r}")


@dataclass(frozen=True)
class RankTrace:
    """Per-iteration |estimated rank - true rank| for one (phrase, seed) cell.

    Distances are carried forward after convergence so every trace has length
    ``max_steps``.
    """

    phrase: str
    seed: int
    true_rank: int
    converged_step: int
    distances: tuple[int, ...]

    @property
    def final_distance(self) -> int:
        return self.distances[-1]


def derive_seed(*parts: object) -> int:
    """Stable 63-bit seed from arbitrary labels; independent of hash randomization."""
    digest = hashlib.sha256("|".join(repr(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _select_panel(judges: Sequence[Judge], mode: str) -> Sequence[Judge]:
    if mode == "all":
        return judges
    wanted = mode.split(":", 1)[1]
    selected = [j for j in judges if j.name == wanted]
    if not selected:
        raise ValueError(f"judge {wanted!r} not in panel {[j.name for j in judges]}")
    return selected


def default_judge_factory(
    ranking: ReferenceRanking, n_judges: int = 4, noise_scale: float = 4.0
) -> JudgeFactory:
    """Synthetic judges whose latent skills are the reference mu values."""
    latent = {phrase: rating.mu for phrase, rating in ranking.entries}

    def factory(seed: int) -> Sequence[Judge]:
        return synthetic_panel(latent, n_judges=n_judges, noise_scale=noise_scale, seed=seed)

    return factory


def synthetic_ranking(
    n_phrases: int = 42,
    mu_range: tuple[float, float] = (7.0, 43.5),
    sigma: float = 1.0,
) -> ReferenceRanking:
    """Evenly spaced ranking of named phrases, highest mu first."""
    from .model import Rating

    if n_phrases < 2:
        raise ValueError("a ranking needs at least 2 phrases")
    low, high = mu_range
    step = (high - low) / (n_phrases - 1)
    entries = tuple(
        (f"phrase-{i:02d}", Rating(high - i * step, sigma)) for i in range(n_phrases)
    )
    return ReferenceRanking(entries=entries)


def leave_one_out(
    ranking: ReferenceRanking,
    judges: JudgeFactory | Sequence[Judge],
    cfg: StrategyConfig,
    phrases: Sequence[str] | None = None,
) -> list[RankTrace]:
    """Refit every phrase into the ranking that excludes it, per seed.

    ``phrases`` restricts which entries get excluded and refitted (all by
    default; an empty sequence yields an empty trace list). Cells are
    independent: judges are built fresh per (phrase, seed) when a factory is
    given, and all randomness derives from (seed, phrase), so the result is
    reproducible regardless of execution order.
    """
    if len(ranking) < 2:
        raise ValueError("leave-one-out needs at least 2 ranking entries")
    selected = set(ranking.phrases() if phrases is None else phrases)
    unknown = selected - set(ranking.phrases())
    if unknown:
        raise ValueError(f"phrases not in ranking: {sorted(unknown)}")
    traces: list[RankTrace] = []
    for true_rank, (phrase, _) in enumerate(ranking.entries, start=1):
        if phrase not in selected:
            continue
        reduced = ranking.without(phrase)
        for seed in cfg.seeds:
            if callable(judges):
                panel = judges(derive_seed("judges", seed, phrase))
            else:
                panel = judges
            panel = _select_panel(panel, cfg.judge_mode)
            fit_cfg = replace(cfg.fit, seed=derive_seed("fit", seed, phrase))
            result = fit_item(
                FitTarget(item_id=phrase, sentence=phrase),
                reduced,
                panel,
                fit_cfg,
                cfg.rating,
                opponent_strategy=cfg.strategy,
            )
            distances = [abs(step.rank_after - true_rank) for step in result.trace]
            last = distances[-1]
            distances.extend([last] * (cfg.fit.max_steps - len(distances)))
            traces.append(
                RankTrace(
                    phrase=phrase,
                    seed=seed,
                    true_rank=true_rank,
                    converged_step=result.steps_taken,
                    distances=tuple(distances),
                )
            )
    return traces


@dataclass(frozen=True)
class TraceSummary:
    mean_final_distance: float
    std_final_distance: float
    mean_converged_step: float

    @classmethod
    def of(cls, traces: Sequence[RankTrace]) -> "TraceSummary":
        finals = [t.final_distance for t in traces]
        return cls(
            mean_final_distance=mean(finals),
            std_final_distance=pstdev(finals),
            mean_converged_step=mean(t.converged_step for t in traces),
        )


def mean_distance_curve(traces: Sequence[RankTrace]) -> list[float]:
    """Average distance per iteration across all traces."""
    if not traces:
        return []
    steps = len(traces[0].distances)
    return [mean(t.distances[i] for t in traces) for i in range(steps)]


@dataclass(frozen=True)
class SweepPoint:
    value: int
    mean_final_distance: float
    std_final_distance: float


def sweep(
    param: str,
    values: Sequence[int],
    base: StrategyConfig,
    ranking: ReferenceRanking,
    judges: JudgeFactory | Sequence[Judge],
) -> list[SweepPoint]:
    """Leave-one-out summaries across a grid of K or N values."""
    if param not in ("K", "N"):
        raise ValueError(f"sweep parameter must be K or N, got {param!r}")
    if not values:
        raise ValueError("sweep needs at least one value")
    points = []
    for value in values:
        if param == "K":
            fit = replace(base.fit, k_all_judges=value)
        else:
            fit = replace(base.fit, per_opponent_cap=value)
        cfg = replace(base, fit=fit)
        traces = leave_one_out(ranking, judges, cfg)
        summary = TraceSummary.of(traces)
        points.append(
            SweepPoint(
                value=value,
                mean_final_distance=summary.mean_final_distance,
                std_final_distance=summary.std_final_distance,
            )
        )
    return points

"""Pairwise-comparison judges: replayed logs, a synthetic model, and a remote endpoint.

Every judge answers the same question: which of two sentences conveys greater
certainty that the finding is present. Replay and synthetic judges make the
pipeline hermetic; the remote judge posts a rendered prompt to an HTTP service.
"""

from __future__ import annotations

import math
import random
import threading
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import requests

from .model import ComparisonRecord, Winner


class JudgeError(Exception):
    """Base class for judge failures."""


class ReplayMiss(JudgeError):
    """No remaining logged outcome for the requested pair."""


class RemoteFailure(JudgeError):
    """Transport error or a response that is not one of the two legal labels."""


class MissingLatentSkill(JudgeError):
    """Synthetic judge asked about an item without a latent skill entry."""


class EmptyOutcomeList(JudgeError):
    """Consensus requires at least one outcome."""


@dataclass(frozen=True)
class JudgeOutcome:
    winner: Winner
    judge: str


class Judge(Protocol):
    name: str

    def compare(
        self, sentence_a: str, sentence_b: str, item_a: str, item_b: str
    ) -> JudgeOutcome: ...


@dataclass
class SyntheticJudgeConfig:
    """Logistic noise model over latent item skills, used as a test oracle."""

    latent_skill: dict[str, float]
    noise_scale: float = 4.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.noise_scale > 0:
            raise ValueError("noise_scale must be positive")


class SyntheticJudge:
    """Declares A the winner with probability logistic((skill_a - skill_b)/scale)."""

    def __init__(self, config: SyntheticJudgeConfig, name: str = "synthetic"):
        self.name = name
        self._config = config
        self._rng = random.Random(config.seed)

    def win_probability(self, item_a: str, item_b: str) -> float:
        skills = self._config.latent_skill
        try:
            gap = skills[item_a] - skills[item_b]
        except KeyError as exc:
            raise MissingLatentSkill(f"no latent skill for item {exc.args[0]!r}") from exc
        z = gap / self._config.noise_scale
        # logistic with a clamped exponent to stay finite for tiny noise scales
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-min(z, 700.0)))
        return 1.0 - 1.0 / (1.0 + math.exp(min(z, 700.0)))

    def compare(
        self, sentence_a: str, sentence_b: str, item_a: str, item_b: str
    ) -> JudgeOutcome:
        p_a = self.win_probability(item_a, item_b)
        winner = Winner.A if self._rng.random() < p_a else Winner.B
        return JudgeOutcome(winner=winner, judge=self.name)


class ReplayJudge:
    """Replays logged comparisons keyed by (unordered item pair, judge).

    Repeated comparisons of the same pair are consumed in log order, so the
    repetition index is implicit. Sentences are carried in the log but are not
    part of the key: sentence sampling is seed-controlled upstream.
    """

    def __init__(self, records: Iterable[ComparisonRecord], name: str):
        self.name = name
        self._queues: dict[tuple[str, str], deque[ComparisonRecord]] = defaultdict(deque)
        for rec in records:
            if rec.judge != name:
                continue
            self._queues[self._key(rec.item_a, rec.item_b)].append(rec)

    @staticmethod
    def _key(item_a: str, item_b: str) -> tuple[str, str]:
        return (item_a, item_b) if item_a <= item_b else (item_b, item_a)

    def remaining(self) -> int:
        return sum(len(q) for q in self._queues.values())

    def compare(
        self, sentence_a: str, sentence_b: str, item_a: str, item_b: str
    ) -> JudgeOutcome:
        queue = self._queues.get(self._key(item_a, item_b))
        if not queue:
            raise ReplayMiss(
                f"no logged outcome for pair ({item_a!r}, {item_b!r}) and judge {self.name!r}"
            )
        rec = queue.popleft()
        winner = rec.winner if rec.item_a == item_a else rec.winner.flipped()
        return JudgeOutcome(winner=winner, judge=self.name)


_LEGAL_LABELS = {"sentence_1": Winner.A, "sentence_2": Winner.B}


@dataclass
class RemoteJudgeConfig:
    url: str
    prompt_template: str
    timeout: float = 30.0
    retries: int = 2
    token: str | None = None


class RemoteJudge:
    """Posts {"prompt": ...} to an HTTP endpoint and expects {"text": ...} back.

    The response text must be exactly one of the two sentence labels (quotes
    and whitespace tolerated); anything else raises RemoteFailure rather than
    being coerced. Requests on one instance are serialized.
    """

    def __init__(self, config: RemoteJudgeConfig, name: str = "remote"):
        self.name = name
        self._config = config
        self._session = requests.Session()
        self._lock = threading.Lock()

    def _post(self, prompt: str) -> str:
        headers = {}
        if self._config.token:
            headers["Authorization"] = f"Bearer {self._config.token}"
        last_error: Exception | None = None
        for _ in range(self._config.retries + 1):
            try:
                with self._lock:
                    resp = self._session.post(
                        self._config.url,
                        json={"prompt": prompt},
                        headers=headers,
                        timeout=self._config.timeout,
                    )
                resp.raise_for_status()
                body = resp.json()
                return str(body["text"])
            except (requests.RequestException, ValueError, KeyError) as exc:
                last_error = exc
        raise RemoteFailure(f"remote judge request failed: {last_error}") from last_error

    def compare(
        self, sentence_a: str, sentence_b: str, item_a: str, item_b: str
    ) -> JudgeOutcome:
        prompt = self._config.prompt_template.format(
            sentence_1=sentence_a, sentence_2=sentence_b
        )
        text = self._post(prompt).strip().strip('"').strip("'").strip().lower()
        if text not in _LEGAL_LABELS:
            raise RemoteFailure(f"illegal judge response {text!r}")
        return JudgeOutcome(winner=_LEGAL_LABELS[text], judge=self.name)


@dataclass
class RecordingJudge:
    """Wraps a judge and logs every outcome as a ComparisonRecord."""

    inner: Judge
    log: list[ComparisonRecord] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.inner.name

    def compare(
        self, sentence_a: str, sentence_b: str, item_a: str, item_b: str
    ) -> JudgeOutcome:
        outcome = self.inner.compare(sentence_a, sentence_b, item_a, item_b)
        self.log.append(
            ComparisonRecord(
                item_a=item_a,
                item_b=item_b,
                sentence_a=sentence_a,
                sentence_b=sentence_b,
                judge=outcome.judge,
                winner=outcome.winner,
            )
        )
        return outcome


def consensus(outcomes: Sequence[JudgeOutcome], seed: int = 0) -> Winner:
    """Majority winner over the outcomes; ties broken by a seeded uniform pick."""
    if not outcomes:
        raise EmptyOutcomeList("consensus over an empty outcome list")
    votes_a = sum(1 for o in outcomes if o.winner is Winner.A)
    votes_b = len(outcomes) - votes_a
    if votes_a > votes_b:
        return Winner.A
    if votes_b > votes_a:
        return Winner.B
    return random.Random(seed).choice((Winner.A, Winner.B))


def synthetic_panel(
    latent_skill: dict[str, float],
    n_judges: int = 4,
    noise_scale: float = 4.0,
    seed: int = 0,
) -> list[SyntheticJudge]:
    """A panel of independent synthetic judges sharing one latent-skill table."""
    return [
        SyntheticJudge(
            SyntheticJudgeConfig(
                latent_skill=latent_skill, noise_scale=noise_scale, seed=seed * 1009 + i
            ),
            name=f"synthetic-{i}",
        )
        for i in range(n_judges)
    ]

"""Regenerate the packaged sample data under src/hedgepath/data/samples/.

Deterministic: reruns produce byte-identical files. The comparison log is
produced by seeded synthetic judges over a fixed latent ordering of twelve
hedging phrases, so the sample pipeline is fully reproducible offline.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from hedgepath.dataio import write_comparisons, write_records
from hedgepath.judges import synthetic_panel
from hedgepath.model import ComparisonRecord, FindingRecord, Source, Status

SAMPLES = Path(__file__).resolve().parent.parent / "src" / "hedgepath" / "data" / "samples"

PHRASE_LATENTS = {
    "most likely": 40.0,
    "likely": 37.0,
    "probably": 34.0,
    "suspected": 31.0,
    "suggesting": 28.0,
    "may represent": 25.0,
    "may": 22.0,
    "possible": 19.0,
    "questionable": 16.0,
    "cannot be excluded": 13.0,
    "unlikely": 10.0,
    "less likely": 7.0,
}

RARE_PHRASES = {"conceivable": 3, "borderline": 7}

FINDINGS = ("pleural effusion", "pneumonia", "atelectasis", "pulmonary edema", "opacity")

TEMPLATES = (
    "{phrase} {finding} at the left base",
    "findings {phrase} reflect {finding}",
    "there is {phrase} {finding} in the right lung",
    "appearance is {phrase} due to {finding}",
    "{finding} is {phrase} given the clinical history",
    "subtle change {phrase} representing {finding}",
)


def make_extractions() -> list[dict]:
    rng = random.Random(20240501)
    rows = []
    for phrase in PHRASE_LATENTS:
        for i in range(10 + rng.randrange(5)):
            finding = FINDINGS[rng.randrange(len(FINDINGS))]
            template = TEMPLATES[rng.randrange(len(TEMPLATES))]
            rows.append(
                {
                    "phrase": phrase,
                    "finding": finding,
                    "sentence": template.format(phrase=phrase, finding="<finding>"),
                }
            )
    for phrase, count in RARE_PHRASES.items():
        for i in range(count):
            finding = FINDINGS[rng.randrange(len(FINDINGS))]
            template = TEMPLATES[rng.randrange(len(TEMPLATES))]
            rows.append(
                {
                    "phrase": phrase,
                    "finding": finding,
                    "sentence": template.format(phrase=phrase, finding="<finding>"),
                }
            )
    return rows


def make_comparisons(extractions: list[dict]) -> list[ComparisonRecord]:
    rng = random.Random(20240502)
    sentences: dict[str, list[str]] = {}
    for row in extractions:
        sentences.setdefault(row["phrase"], []).append(row["sentence"])
    judges = synthetic_panel(PHRASE_LATENTS, n_judges=2, noise_scale=3.0, seed=7)
    phrases = list(PHRASE_LATENTS)
    records = []
    for i, a in enumerate(phrases):
        for b in phrases[i + 1 :]:
            for _ in range(2):
                sent_a = rng.choice(sentences[a])
                sent_b = rng.choice(sentences[b])
                for judge in judges:
                    outcome = judge.compare(sent_a, sent_b, a, b)
                    records.append(
                        ComparisonRecord(
                            item_a=a,
                            item_b=b,
                            sentence_a=sent_a,
                            sentence_b=sent_b,
                            judge=outcome.judge,
                            winner=outcome.winner,
                        )
                    )
    return records


def make_dataset() -> list[FindingRecord]:
    def rec(study, finding, loc=None, attrs=(), view=None, status=Status.DP,
            prob=None, sentence=None):
        return FindingRecord(
            study_id=study,
            finding=finding,
            location=loc,
            attributes=frozenset(attrs),
            view=view,
            status=status,
            prob=prob,
            source=Source.ORIGINAL,
            sentence=sentence,
        )

    return [
        rec("s01", "CHF", view="ap", status=Status.TP, prob=0.6,
            sentence="heart failure is probable given interval worsening"),
        rec("s02", "pneumonia", view="pa", status=Status.DN, sentence="no pneumonia"),
        rec("s02", "support devices", loc="right chest", view="pa",
            sentence="right chest port unchanged"),
        rec("s03", "fracture", loc="rib", attrs=("acute",), view="pa",
            sentence="acute rib fracture on the left"),
        rec("s03", "fracture", loc="pacemaker lead", view="ap",
            sentence="fractured pacemaker lead"),
        rec("s04", "pulmonary edema", view="pa", status=Status.DN,
            sentence="pulmonary edema has resolved"),
        rec("s04", "CHF", view="pa", status=Status.TP, prob=0.75,
            sentence="chf cannot be excluded"),
        rec("s05", "atelectasis", view="ap", sentence="bibasilar atelectasis"),
        rec("s05", "consolidation", loc="right lower lobe", view="ap",
            sentence="dense consolidation in the right lower lobe"),
        rec("s06", "pulmonary edema", view="ap", status=Status.TP, prob=0.75,
            sentence="pulmonary edema is likely"),
        rec("s06", "pneumonia", attrs=("lobar",), view="ap", status=Status.TP, prob=0.5,
            sentence="findings may represent lobar pneumonia"),
        rec("s07", "opacity", loc="RUL", view="ap", status=Status.TP, prob=0.55,
            sentence="hazy opacity in the rul may be present"),
        rec("s07", "opacity", loc="right upper lung", view="ap", status=Status.TP,
            prob=0.35, sentence="possible right upper lung opacity"),
        rec("s08", "pleural effusion", attrs=("loculated",), view="pa, erect",
            status=Status.TP, prob=0.8, sentence="loculated pleural effusion is likely"),
        rec("s09", "pneumothorax", attrs=("tension",), view="ap",
            sentence="tension pneumothorax"),
        rec("s10", "pneumothorax", view="pa", status=Status.TN, prob=0.3,
            sentence="pneumothorax is unlikely"),
    ]


def make_latents() -> dict:
    latent = dict(PHRASE_LATENTS)
    latent.update(
        {
            "s01:CHF": 28.0,
            "s04:CHF": 20.0,
            "s06:pulmonary edema": 30.0,
            "s06:pneumonia": 22.0,
            "s07:opacity": 18.0,
            "s08:pleural effusion": 33.0,
            "s10:pneumothorax": 12.0,
        }
    )
    return {"latent_skill": latent, "noise_scale": 4.0, "judges": 4, "seed": 0}


def main() -> None:
    SAMPLES.mkdir(parents=True, exist_ok=True)
    extractions = make_extractions()
    with open(SAMPLES / "extraction_log.jsonl", "w", encoding="utf-8") as fh:
        for row in extractions:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    write_comparisons(SAMPLES / "comparison_log.jsonl", make_comparisons(extractions))
    write_records(SAMPLES / "dataset.csv", make_dataset())
    (SAMPLES / "latents.json").write_text(
        json.dumps(make_latents(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"sample data written to {SAMPLES}")


if __name__ == "__main__":
    main()

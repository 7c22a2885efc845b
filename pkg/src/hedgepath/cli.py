"""Command-line surface: build-vocab, build-ranking, fit, expand, simulate.

Every command echoes its effective configuration into the output directory and
is reproducible: identical inputs, config, and seeds yield byte-identical
primary outputs. Row-level errors never abort batch commands; configuration
and dictionary errors abort before any processing.

Exit codes: 0 success, 1 usage/config error, 2 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path
from typing import Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import dataio, expand as expand_mod, simulate as simulate_mod
from .judges import Judge, RemoteJudge, RemoteJudgeConfig, ReplayJudge, synthetic_panel
from .pathway import DictionaryError, load_dictionary
from .ranking import (
    FitConfig,
    FitTarget,
    SigmoidMap,
    UnknownPhrase,
    build_reference_ranking,
    build_vocabulary,
    calibrate_sigmoid,
    fit_item,
    map_probability,
)
from .rating import RatingConfig
from .simulate import StrategyConfig, derive_seed

JUDGE_URL_ENV = "HEDGEPATH_JUDGE_URL"
JUDGE_TOKEN_ENV = "HEDGEPATH_JUDGE_TOKEN"

DEFAULT_ANCHOR_LOW = (7.07, 0.170)
DEFAULT_ANCHOR_HIGH = (43.44, 0.839)
DEFAULT_SEEDS = tuple(range(10))


class UsageError(Exception):
    """Bad invocation or configuration; exit code 1."""


class DataError(Exception):
    """Input data failed to parse or validate; exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse default exits with 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"FileNotFound: config file {path!r}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config file {path!r} does not parse: {exc}") from exc


def _rating_config(config: dict) -> RatingConfig:
    section = config.get("rating", {})
    try:
        return RatingConfig(
            mu0=float(section.get("mu0", 25.0)),
            sigma0=float(section.get("sigma0", 25.0 / 3.0)),
            beta_sq=float(section.get("beta_sq", 25.0 / 6.0)),
            tau=float(section.get("tau", 25.0 / 3.0 / 100.0)),
            draw_probability=float(section.get("draw_probability", 0.10)),
        )
    except ValueError as exc:
        raise UsageError(f"bad [rating] config: {exc}") from exc


def _fit_config(config: dict, seed: int) -> FitConfig:
    section = config.get("fit", {})
    try:
        return FitConfig(
            k_all_judges=int(section.get("k_all_judges", 10)),
            per_opponent_cap=int(section.get("per_opponent_cap", 5)),
            max_steps=int(section.get("max_steps", 100)),
            patience=int(section.get("patience", 10)),
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(f"bad [fit] config: {exc}") from exc


def _sigmoid(config: dict) -> SigmoidMap:
    section = config.get("sigmoid", {})
    low = tuple(section.get("anchor_low", DEFAULT_ANCHOR_LOW))
    high = tuple(section.get("anchor_high", DEFAULT_ANCHOR_HIGH))
    try:
        return calibrate_sigmoid((low[0], low[1]), (high[0], high[1]))
    except Exception as exc:
        raise UsageError(f"bad sigmoid anchors: {exc}") from exc


def _seeds(args, config: dict) -> tuple[int, ...]:
    if getattr(args, "seeds", None):
        return tuple(args.seeds)
    if "seeds" in config:
        return tuple(int(s) for s in config["seeds"])
    return DEFAULT_SEEDS


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_file(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"FileNotFound: {what} {str(p)!r}")
    return p


def _snapshot(out: Path, payload: dict) -> None:
    (out / "config.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n",
        encoding="utf-8",
    )


def _sentence_hash(sentence: str) -> str:
    return hashlib.sha256(sentence.encode("utf-8")).hexdigest()[:12]


def cmd_build_vocab(args) -> int:
    config = _load_config(args.config)
    path = _require_file(args.extractions, "extraction log")
    try:
        extractions = dataio.read_extractions(path)
    except (ValueError, KeyError) as exc:
        raise DataError(f"extraction log {str(path)!r} does not parse: {exc}") from exc
    vocab = build_vocabulary(extractions, threshold=args.threshold)
    out = _out_dir(args)
    dataio.write_vocabulary(out / "vocabulary.csv", out / "occurrences.jsonl", vocab)
    _snapshot(
        out,
        {
            "command": "build-vocab",
            "extractions": str(path),
            "threshold": args.threshold,
            "config": config,
            "phrases": len(vocab.phrases),
        },
    )
    print(f"vocabulary: {len(vocab.phrases)} phrases (threshold {args.threshold})")
    return 0


def cmd_build_ranking(args) -> int:
    config = _load_config(args.config)
    rating_cfg = _rating_config(config)
    seeds = _seeds(args, config)
    log_path = _require_file(args.comparisons, "comparison log")
    try:
        comparisons = dataio.read_comparisons(log_path)
    except (ValueError, KeyError) as exc:
        raise DataError(f"comparison log {str(log_path)!r} does not parse: {exc}") from exc
    phrases = None
    if args.vocab:
        vocab_csv = _require_file(args.vocab, "vocabulary CSV")
        occurrences = _require_file(args.occurrences, "occurrences sidecar")
        phrases = dataio.read_vocabulary(vocab_csv, occurrences).phrase_texts()
    try:
        ranking = build_reference_ranking(comparisons, rating_cfg, seeds, phrases)
    except UnknownPhrase as exc:
        raise DataError(str(exc)) from exc
    out = _out_dir(args)
    dataio.write_ranking(out / "ranking.csv", ranking)
    dataio.write_per_seed_ratings(out / "per_seed.csv", ranking)
    _snapshot(
        out,
        {
            "command": "build-ranking",
            "comparisons": str(log_path),
            "seeds": list(seeds),
            "rating": asdict(rating_cfg),
            "config": config,
            "entries": len(ranking),
        },
    )
    print(f"ranking: {len(ranking)} phrases over {len(seeds)} seeds")
    return 0


def _build_judges(spec: str, prompt_template: str | None):
    """Returns (per_row_factory, parallel_safe).

    Synthetic panels are rebuilt per row from the row seed so fits stay
    independent; replay judges consume a shared log sequentially and therefore
    disallow parallel rows; remote judges serialize their own requests.
    """
    kind, _, arg = spec.partition(":")
    if kind == "replay":
        path = _require_file(arg, "replay log")
        records = dataio.read_comparisons(path)
        names = sorted({rec.judge for rec in records})
        if not names:
            raise DataError(f"replay log {arg!r} holds no records")
        judges: list[Judge] = [ReplayJudge(records, name) for name in names]
        return (lambda row_seed: judges), False
    if kind == "synthetic":
        path = _require_file(arg, "synthetic judge spec")
        spec_obj = json.loads(path.read_text(encoding="utf-8"))
        latent = {k: float(v) for k, v in spec_obj["latent_skill"].items()}
        n_judges = int(spec_obj.get("judges", 4))
        noise_scale = float(spec_obj.get("noise_scale", 4.0))
        base_seed = int(spec_obj.get("seed", 0))

        def make(row_seed: int) -> list[Judge]:
            return list(
                synthetic_panel(
                    latent,
                    n_judges=n_judges,
                    noise_scale=noise_scale,
                    seed=derive_seed("panel", base_seed, row_seed),
                )
            )

        return make, True
    if kind == "remote":
        url = arg or os.environ.get(JUDGE_URL_ENV, "")
        if not url:
            raise UsageError(f"remote judge needs a URL (flag or {JUDGE_URL_ENV})")
        template_path = (
            Path(prompt_template) if prompt_template else dataio.data_path("comparison_prompt.txt")
        )
        template = _require_file(template_path, "prompt template").read_text(encoding="utf-8")
        token = os.environ.get(JUDGE_TOKEN_ENV)
        remote = [
            RemoteJudge(RemoteJudgeConfig(url=url, prompt_template=template, token=token))
        ]
        return (lambda row_seed: remote), True
    raise UsageError(f"unknown judge spec {spec!r} (expected replay:/synthetic:/remote)")


def cmd_fit(args) -> int:
    config = _load_config(args.config)
    rating_cfg = _rating_config(config)
    fit_cfg = _fit_config(config, seed=args.seed)
    sigmoid = _sigmoid(config)
    ranking = dataio.read_ranking(_require_file(args.ranking, "ranking CSV"))
    if not ranking.entries:
        raise DataError("ranking CSV holds no entries")
    dataset_path = _require_file(args.dataset, "dataset CSV")
    try:
        records = dataio.read_records(dataset_path)
    except (ValueError, KeyError) as exc:
        raise DataError(f"dataset {str(dataset_path)!r} does not parse: {exc}") from exc
    sentence_pool = None
    if args.vocab:
        vocab_csv = _require_file(args.vocab, "vocabulary CSV")
        occurrences = _require_file(args.occurrences, "occurrences sidecar")
        sentence_pool = dataio.read_vocabulary(vocab_csv, occurrences).sentence_pool()
    judges_for_row, parallel_safe = _build_judges(args.judge, args.prompt_template)

    tentative = [
        (idx, rec)
        for idx, rec in enumerate(records)
        if not rec.status.is_definitive and rec.sentence
    ]

    def fit_row(item: tuple[int, object]) -> dict:
        idx, rec = item
        sentence_hash = _sentence_hash(rec.sentence)
        row = {
            "index": idx,
            "study_id": rec.study_id,
            "finding": rec.finding,
            "sentence_hash": sentence_hash,
            "mu": "",
            "steps": "",
            "prob": "",
            "error": "",
        }
        target = FitTarget(
            item_id=f"{rec.study_id}:{rec.finding}",
            sentence=rec.sentence,
            finding=rec.finding,
        )
        row_seed = derive_seed("fit-row", args.seed, rec.study_id, rec.finding, sentence_hash)
        try:
            result = fit_item(
                target,
                ranking,
                judges_for_row(row_seed),
                replace(fit_cfg, seed=row_seed),
                rating_cfg,
                sentence_pool=sentence_pool,
            )
        except Exception as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            return row
        prob = map_probability(result.rating.mu, sigmoid)
        row["mu"] = repr(result.rating.mu)
        row["steps"] = str(result.steps_taken)
        row["prob"] = repr(prob)
        return row

    jobs = args.jobs if parallel_safe else 1
    if jobs > 1 and tentative:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fit_rows = list(pool.map(fit_row, tentative))
    else:
        fit_rows = [fit_row(item) for item in tentative]

    updated = list(records)
    for row in fit_rows:
        if not row["error"]:
            idx = row["index"]
            updated[idx] = updated[idx].with_(prob=float(row["prob"]))

    out = _out_dir(args)
    dataio.write_csv(
        out / "fits.csv",
        ["study_id", "finding", "sentence_hash", "mu", "steps", "prob", "error"],
        [
            [r["study_id"], r["finding"], r["sentence_hash"], r["mu"], r["steps"], r["prob"], r["error"]]
            for r in fit_rows
        ],
    )
    dataio.write_records(out / "dataset.csv", updated)
    _snapshot(
        out,
        {
            "command": "fit",
            "dataset": str(dataset_path),
            "ranking": str(args.ranking),
            "judge": args.judge,
            "seed": args.seed,
            "jobs": args.jobs,
            "rating": asdict(rating_cfg),
            "fit": asdict(fit_cfg),
            "sigmoid": {"alpha": sigmoid.alpha, "mu0": sigmoid.mu0},
            "config": config,
        },
    )
    failed = sum(1 for r in fit_rows if r["error"])
    print(f"fitted {len(fit_rows) - failed}/{len(fit_rows)} tentative rows ({failed} errors)")
    return 0


def cmd_expand(args) -> int:
    config = _load_config(args.config)
    paths = config.get("paths", {})
    dictionary_csv = args.dictionary or paths.get("dictionary") or dataio.data_path("dx_pathway.csv")
    synonyms_csv = args.synonyms or paths.get("synonyms") or dataio.data_path("synonyms.csv")
    classes_csv = (
        args.location_classes
        or paths.get("location_classes")
        or dataio.data_path("location_classes.csv")
    )
    blacklist_csv = args.blacklist or paths.get("blacklist") or dataio.data_path("blacklist.csv")
    threshold = args.threshold if args.threshold is not None else float(
        config.get("dedup", {}).get("threshold", 0.9)
    )
    try:
        dictionary = load_dictionary(
            _require_file(dictionary_csv, "pathway dictionary"),
            _require_file(synonyms_csv, "synonym table"),
            _require_file(classes_csv, "location classes"),
        )
    except DictionaryError as exc:
        raise DataError(f"pathway dictionary invalid: {exc}") from exc
    blacklist = dataio.read_blacklist(_require_file(blacklist_csv, "blacklist"))
    dataset_path = _require_file(args.dataset, "dataset CSV")
    try:
        records = dataio.read_records(dataset_path)
    except (ValueError, KeyError) as exc:
        raise DataError(f"dataset {str(dataset_path)!r} does not parse: {exc}") from exc
    try:
        result = expand_mod.run_pipeline(
            records, dictionary, threshold=threshold, blacklist=blacklist
        )
    except expand_mod.CycleDetected as exc:
        raise DataError(str(exc)) from exc
    except Exception as exc:
        raise DataError(f"expansion failed: {exc}") from exc
    stats = expand_mod.stats_from_result(result, dictionary, n_input=len(records))

    out = _out_dir(args)
    dataio.write_records(out / "expanded_raw.csv", result.pre_resolution)
    dataio.write_records(out / "resolved.csv", result.resolved)
    dataio.write_csv(
        out / "stats.csv",
        [
            "diagnosis",
            "variants",
            "pathways",
            "depth",
            "width",
            "expandable",
            "expandable_pct",
            "inferred",
            "inferred_pct",
        ],
        [
            [
                r.diagnosis,
                r.variants,
                r.pathways,
                r.depth,
                r.width,
                r.expandable,
                f"{r.expandable_pct:.1f}",
                r.inferred,
                f"{r.inferred_pct:.1f}",
            ]
            for r in stats.rows
        ]
        + [
            [
                "total",
                sum(r.variants for r in stats.rows),
                sum(r.pathways for r in stats.rows),
                f"{sum(r.depth for r in stats.rows) / len(stats.rows):.1f}",
                f"{sum(r.width for r in stats.rows) / len(stats.rows):.1f}",
                sum(r.expandable for r in stats.rows),
                f"{sum(r.expandable_pct for r in stats.rows):.1f}",
                sum(r.inferred for r in stats.rows),
                f"{sum(r.inferred_pct for r in stats.rows):.1f}",
            ]
        ],
    )
    types = [t.value for t in expand_mod.ConflictType]
    sources = [s.value for s in expand_mod.ConflictSource]
    dataio.write_csv(
        out / "conflicts.csv",
        ["type"] + sources + ["total"],
        [
            [t]
            + [stats.crosstab.get((t, s), 0) for s in sources]
            + [sum(stats.crosstab.get((t, s), 0) for s in sources)]
            for t in sorted(types)
        ]
        + [
            ["total"]
            + [
                sum(stats.crosstab.get((t, s), 0) for t in types)
                for s in sources
            ]
            + [stats.n_conflicts]
        ],
    )
    _snapshot(
        out,
        {
            "command": "expand",
            "dataset": str(dataset_path),
            "dictionary": str(dictionary_csv),
            "synonyms": str(synonyms_csv),
            "location_classes": str(classes_csv),
            "blacklist": str(blacklist_csv),
            "threshold": threshold,
            "config": config,
            "rows_in": len(records),
            "rows_inferred": stats.n_inferred,
            "rows_resolved": stats.n_resolved,
            "conflicts": stats.n_conflicts,
        },
    )
    print(
        f"expanded {len(records)} rows: +{stats.n_inferred} inferred, "
        f"{stats.n_conflicts} conflicts, {stats.n_resolved} retained"
    )
    return 0


def cmd_simulate(args) -> int:
    experiment = _load_config(args.experiment)
    if not experiment:
        raise UsageError("simulate requires an experiment config file")
    seeds = tuple(int(s) for s in experiment.get("seeds", DEFAULT_SEEDS))
    fit_section = {"fit": experiment.get("fit", {})}
    fit_cfg = _fit_config(fit_section, seed=0)
    rating_cfg = _rating_config(experiment)
    if args.ranking:
        ranking = dataio.read_ranking(_require_file(args.ranking, "ranking CSV"))
    else:
        n = int(experiment.get("phrases", 42))
        ranking = simulate_mod.synthetic_ranking(n)
    factory = simulate_mod.default_judge_factory(
        ranking,
        n_judges=int(experiment.get("judges", 4)),
        noise_scale=float(experiment.get("noise_scale", 4.0)),
    )
    judge_mode = experiment.get("judge_mode", "all")
    if args.strategy:
        strategies = [args.strategy]
    else:
        strategies = experiment.get("strategies", ["draw_probability", "random"])
    out = _out_dir(args)

    sweep_section = experiment.get("sweep")
    if sweep_section:
        param = sweep_section["param"]
        values = [int(v) for v in sweep_section["values"]]
        base = StrategyConfig(
            strategy=strategies[0],
            judge_mode=judge_mode,
            seeds=seeds,
            fit=fit_cfg,
            rating=rating_cfg,
        )
        points = simulate_mod.sweep(param, values, base, ranking, factory)
        dataio.write_csv(
            out / "sweep.csv",
            [param, "mean_final_distance", "std_final_distance"],
            [[p.value, repr(p.mean_final_distance), repr(p.std_final_distance)] for p in points],
        )
        from .svg import write_line_chart

        write_line_chart(
            out / "sweep.svg",
            {f"{param} sweep": [p.mean_final_distance for p in points]},
            title=f"Mean final rank distance vs {param}",
            x_label=param,
            y_label="mean final distance",
            x_values=[p.value for p in points],
        )
    else:
        curves = {}
        summary_rows = []
        trace_rows = []
        for strategy in strategies:
            cfg = StrategyConfig(
                strategy=strategy,
                judge_mode=judge_mode,
                seeds=seeds,
                fit=fit_cfg,
                rating=rating_cfg,
            )
            traces = simulate_mod.leave_one_out(ranking, factory, cfg)
            summary = simulate_mod.TraceSummary.of(traces)
            curves[strategy] = simulate_mod.mean_distance_curve(traces)
            summary_rows.append(
                [
                    strategy,
                    repr(summary.mean_final_distance),
                    repr(summary.std_final_distance),
                    repr(summary.mean_converged_step),
                ]
            )
            for trace in traces:
                for iteration, distance in enumerate(trace.distances):
                    trace_rows.append(
                        [strategy, trace.phrase, trace.seed, trace.true_rank, iteration, distance]
                    )
        dataio.write_csv(
            out / "traces.csv",
            ["strategy", "phrase", "seed", "true_rank", "iteration", "distance"],
            trace_rows,
        )
        dataio.write_csv(
            out / "summary.csv",
            ["strategy", "mean_final_distance", "std_final_distance", "mean_converged_step"],
            summary_rows,
        )
        from .svg import write_line_chart

        write_line_chart(
            out / "distance.svg",
            curves,
            title="Mean distance to true rank per iteration",
            x_label="iteration",
            y_label="mean |rank - true rank|",
        )
    _snapshot(
        out,
        {"command": "simulate", "experiment": str(args.experiment), "config": experiment},
    )
    print(f"simulation outputs written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hedgepath", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="build the hedging-phrase vocabulary")
    p.add_argument("--extractions", required=True, help="extraction log (JSONL)")
    p.add_argument("--threshold", type=int, default=10)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("build-ranking", help="build the reference ranking")
    p.add_argument("--comparisons", required=True, help="comparison log (JSONL)")
    p.add_argument("--vocab", default=None, help="vocabulary CSV for phrase validation")
    p.add_argument("--occurrences", default=None, help="occurrences JSONL sidecar")
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_ranking)

    p = sub.add_parser("fit", help="fit tentative rows into a reference ranking")
    p.add_argument("--dataset", required=True)
    p.add_argument("--ranking", required=True)
    p.add_argument("--judge", required=True, help="replay:PATH | synthetic:PATH | remote[:URL]")
    p.add_argument("--vocab", default=None)
    p.add_argument("--occurrences", default=None)
    p.add_argument("--prompt-template", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("expand", help="run the pathway expansion pipeline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--dictionary", default=None)
    p.add_argument("--synonyms", default=None)
    p.add_argument("--location-classes", dest="location_classes", default=None)
    p.add_argument("--blacklist", default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("simulate", help="leave-one-out experiments and sweeps")
    p.add_argument("--experiment", required=True, help="experiment config (TOML)")
    p.add_argument("--ranking", default=None, help="reference ranking CSV (else synthetic)")
    p.add_argument(
        "--strategy", default=None, choices=["draw_probability", "random"],
        help="override the experiment's strategy list",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

from __future__ import annotations

import json

import pytest

from hedgepath import dataio
from hedgepath.cli import main
from hedgepath.dataio import data_path

SAMPLES = data_path("samples")


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture
def vocab_dir(tmp_path):
    out = tmp_path / "vocab"
    code = run(
        "build-vocab", "--extractions", SAMPLES / "extraction_log.jsonl", "--out", out
    )
    assert code == 0
    return out


@pytest.fixture
def ranking_dir(tmp_path, vocab_dir):
    out = tmp_path / "ranking"
    code = run(
        "build-ranking",
        "--comparisons", SAMPLES / "comparison_log.jsonl",
        "--vocab", vocab_dir / "vocabulary.csv",
        "--occurrences", vocab_dir / "occurrences.jsonl",
        "--seeds", *range(4),
        "--out", out,
    )
    assert code == 0
    return out


def test_build_vocab_outputs(vocab_dir):
    assert (vocab_dir / "vocabulary.csv").is_file()
    assert (vocab_dir / "occurrences.jsonl").is_file()
    assert (vocab_dir / "config.json").is_file()
    vocab = dataio.read_vocabulary(
        vocab_dir / "vocabulary.csv", vocab_dir / "occurrences.jsonl"
    )
    assert len(vocab.phrases) == 12  # the two rare sample phrases fall below 10
    assert all(p.count >= 10 for p in vocab.phrases)


def test_build_vocab_missing_input_exits_1(tmp_path, capsys):
    code = run("build-vocab", "--extractions", tmp_path / "nope.jsonl", "--out", tmp_path / "o")
    assert code == 1
    assert "FileNotFound" in capsys.readouterr().err


def test_build_ranking_outputs_and_order(ranking_dir):
    ranking = dataio.read_ranking(ranking_dir / "ranking.csv")
    assert len(ranking) == 12
    mus = {phrase: rating.mu for phrase, rating in ranking.entries}
    # latent extremes of the sample generator recovered at the ends
    assert mus["most likely"] > mus["may"] > mus["less likely"]
    assert (ranking_dir / "per_seed.csv").is_file()


def test_build_ranking_rejects_foreign_phrases(tmp_path, vocab_dir, capsys):
    log = tmp_path / "log.jsonl"
    log.write_text(
        json.dumps(
            {
                "item_a": "not in vocab",
                "item_b": "likely",
                "sentence_a": "a",
                "sentence_b": "b",
                "judge": "j",
                "winner": "A",
            }
        )
        + "\n",
        encoding="utf-8",
    )
    code = run(
        "build-ranking",
        "--comparisons", log,
        "--vocab", vocab_dir / "vocabulary.csv",
        "--occurrences", vocab_dir / "occurrences.jsonl",
        "--out", tmp_path / "r",
    )
    assert code == 2
    assert "not in vocab" in capsys.readouterr().err


def test_fit_with_synthetic_judges(tmp_path, ranking_dir, vocab_dir):
    out = tmp_path / "fit"
    code = run(
        "fit",
        "--dataset", SAMPLES / "dataset.csv",
        "--ranking", ranking_dir / "ranking.csv",
        "--judge", f"synthetic:{SAMPLES / 'latents.json'}",
        "--vocab", vocab_dir / "vocabulary.csv",
        "--occurrences", vocab_dir / "occurrences.jsonl",
        "--out", out,
    )
    assert code == 0
    fits = (out / "fits.csv").read_text().strip().splitlines()
    assert fits[0] == "study_id,finding,sentence_hash,mu,steps,prob,error"
    assert len(fits) == 1 + 8  # eight tentative rows in the sample dataset
    assert all(row.rsplit(",", 1)[1] == "" for row in fits[1:])  # no row errors
    updated = dataio.read_records(out / "dataset.csv")
    tentative = [r for r in updated if not r.status.is_definitive]
    assert all(r.prob is not None for r in tentative)
    definitive = [r for r in updated if r.status.is_definitive]
    assert all(r.prob is None for r in definitive)  # untouched


def test_fit_is_byte_identical_across_reruns(tmp_path, ranking_dir):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = run(
            "fit",
            "--dataset", SAMPLES / "dataset.csv",
            "--ranking", ranking_dir / "ranking.csv",
            "--judge", f"synthetic:{SAMPLES / 'latents.json'}",
            "--out", out,
        )
        assert code == 0
        outs.append(out)
    for name in ("fits.csv", "dataset.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_fit_replay_miss_is_row_error_not_abort(tmp_path, ranking_dir):
    log = tmp_path / "empty.jsonl"
    log.write_text(
        json.dumps(
            {
                "item_a": "likely",
                "item_b": "may",
                "sentence_a": "a",
                "sentence_b": "b",
                "judge": "j1",
                "winner": "A",
            }
        )
        + "\n",
        encoding="utf-8",
    )
    out = tmp_path / "fit"
    code = run(
        "fit",
        "--dataset", SAMPLES / "dataset.csv",
        "--ranking", ranking_dir / "ranking.csv",
        "--judge", f"replay:{log}",
        "--out", out,
    )
    assert code == 0
    rows = (out / "fits.csv").read_text().strip().splitlines()[1:]
    assert all("ReplayMiss" in row for row in rows)
    # rows with errors keep their original (absent) probability
    updated = dataio.read_records(out / "dataset.csv")
    assert dataio.read_records(SAMPLES / "dataset.csv") == updated


def test_fit_jobs_flag_gives_identical_outputs(tmp_path, ranking_dir):
    outs = []
    for name, jobs in (("serial", 1), ("parallel", 4)):
        out = tmp_path / name
        code = run(
            "fit",
            "--dataset", SAMPLES / "dataset.csv",
            "--ranking", ranking_dir / "ranking.csv",
            "--judge", f"synthetic:{SAMPLES / 'latents.json'}",
            "--jobs", jobs,
            "--out", out,
        )
        assert code == 0
        outs.append(out)
    assert (outs[0] / "fits.csv").read_bytes() == (outs[1] / "fits.csv").read_bytes()


def test_expand_fixture_corpus(tmp_path):
    out = tmp_path / "expand"
    code = run("expand", "--dataset", SAMPLES / "dataset.csv", "--out", out)
    assert code == 0
    resolved = dataio.read_records(out / "resolved.csv")
    assert len(resolved) == 49
    raw = dataio.read_records(out / "expanded_raw.csv")
    assert len(raw) == 55
    stats = (out / "stats.csv").read_text().splitlines()
    assert stats[0].startswith("diagnosis,variants,pathways,depth,width")
    assert stats[-1].startswith("total,98,33,")
    conflicts = (out / "conflicts.csv").read_text().splitlines()
    assert conflicts[0] == (
        "type,original_vs_expansion,original_vs_original,expansion_vs_expansion,total"
    )
    assert conflicts[-1].endswith(",5")


def test_expand_is_byte_identical_across_reruns(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("expand", "--dataset", SAMPLES / "dataset.csv", "--out", out) == 0
        outs.append(out)
    for name in ("resolved.csv", "expanded_raw.csv", "stats.csv", "conflicts.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_expand_rejects_invalid_dictionary(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    header = "diagnosis,variant,views,trigger_attributes,trigger_location_class,pathway_dsl\n"
    row = 'cardiomegaly,v{},ap;pa,,,"view: ap, pa > ent: heart size > status: dp"\n'
    bad.write_text(header + row.format(1) + row.format(2), encoding="utf-8")
    code = run(
        "expand",
        "--dataset", SAMPLES / "dataset.csv",
        "--dictionary", bad,
        "--out", tmp_path / "out",
    )
    assert code == 2
    assert "duplicate trigger signature" in capsys.readouterr().err


def test_simulate_leave_one_out_and_sweep(tmp_path):
    exp = tmp_path / "exp.toml"
    exp.write_text(
        """
phrases = 6
seeds = [0, 1]
judges = 2
noise_scale = 2.0
strategies = ["draw_probability", "random"]

[fit]
k_all_judges = 2
per_opponent_cap = 5
max_steps = 15
patience = 4
""",
        encoding="utf-8",
    )
    out = tmp_path / "sim"
    assert run("simulate", "--experiment", exp, "--out", out) == 0
    assert (out / "traces.csv").is_file()
    assert (out / "summary.csv").is_file()
    svg = (out / "distance.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg

    sweep_exp = tmp_path / "sweep.toml"
    sweep_exp.write_text(
        """
phrases = 5
seeds = [0]
judges = 2
strategies = ["draw_probability"]

[fit]
k_all_judges = 1
per_opponent_cap = 4
max_steps = 10
patience = 3

[sweep]
param = "N"
values = [2, 4]
""",
        encoding="utf-8",
    )
    sweep_out = tmp_path / "sweep"
    assert run("simulate", "--experiment", sweep_exp, "--out", sweep_out) == 0
    lines = (sweep_out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "N,mean_final_distance,std_final_distance"
    assert len(lines) == 3


def test_simulate_outputs_are_byte_identical(tmp_path):
    exp = tmp_path / "exp.toml"
    exp.write_text(
        "phrases = 5\nseeds = [0]\njudges = 2\n"
        'strategies = ["draw_probability"]\n\n'
        "[fit]\nk_all_judges = 1\nper_opponent_cap = 5\nmax_steps = 10\npatience = 3\n",
        encoding="utf-8",
    )
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("simulate", "--experiment", exp, "--out", out) == 0
        outs.append(out)
    for name in ("traces.csv", "summary.csv", "distance.svg"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_fit_probs_follow_the_default_anchor_map(tmp_path, ranking_dir):
    from hedgepath.ranking import calibrate_sigmoid, map_probability

    out = tmp_path / "fit"
    code = run(
        "fit",
        "--dataset", SAMPLES / "dataset.csv",
        "--ranking", ranking_dir / "ranking.csv",
        "--judge", f"synthetic:{SAMPLES / 'latents.json'}",
        "--out", out,
    )
    assert code == 0
    sigmoid = calibrate_sigmoid((7.07, 0.170), (43.44, 0.839))
    rows = (out / "fits.csv").read_text().strip().splitlines()[1:]
    for row in rows:
        _, _, _, mu, _, prob, err = row.split(",")
        assert err == ""
        assert float(prob) == pytest.approx(map_probability(float(mu), sigmoid), abs=1e-12)


def test_fit_honors_config_file(tmp_path, ranking_dir):
    config = tmp_path / "config.toml"
    config.write_text(
        """
[fit]
k_all_judges = 2
per_opponent_cap = 3
max_steps = 20
patience = 4

[sigmoid]
anchor_low = [10.0, 0.2]
anchor_high = [40.0, 0.9]
""",
        encoding="utf-8",
    )
    out = tmp_path / "fit"
    code = run(
        "fit",
        "--dataset", SAMPLES / "dataset.csv",
        "--ranking", ranking_dir / "ranking.csv",
        "--judge", f"synthetic:{SAMPLES / 'latents.json'}",
        "--config", config,
        "--out", out,
    )
    assert code == 0
    snapshot = json.loads((out / "config.json").read_text())
    assert snapshot["fit"]["k_all_judges"] == 2
    assert snapshot["fit"]["max_steps"] == 20
    from hedgepath.ranking import calibrate_sigmoid, map_probability

    sigmoid = calibrate_sigmoid((10.0, 0.2), (40.0, 0.9))
    rows = (out / "fits.csv").read_text().strip().splitlines()[1:]
    for row in rows:
        _, _, _, mu, steps, prob, err = row.split(",")
        assert err == ""
        assert int(steps) <= 20
        assert float(prob) == pytest.approx(map_probability(float(mu), sigmoid), abs=1e-12)


def test_fit_skips_tentative_rows_without_sentences(tmp_path, ranking_dir):
    from hedgepath.model import FindingRecord, Status

    dataset = tmp_path / "dataset.csv"
    dataio.write_records(
        dataset,
        [
            FindingRecord("s1", "opacity", status=Status.TP, prob=None,
                          sentence="may be an opacity"),
            FindingRecord("s1", "edema", status=Status.TP, prob=None, sentence=None),
            FindingRecord("s1", "pneumonia", status=Status.DN),
        ],
    )
    out = tmp_path / "fit"
    code = run(
        "fit",
        "--dataset", dataset,
        "--ranking", ranking_dir / "ranking.csv",
        "--judge", f"synthetic:{tmp_path / 'latents.json'}",
        "--out", out,
    )
    # synthetic judge spec needs latents for the one fittable row
    assert code == 1  # latents file missing -> usage error

    (tmp_path / "latents.json").write_text(
        json.dumps({"latent_skill": {"s1:opacity": 20.0} | {
            p: 20.0 for p in _ranking_phrases(ranking_dir)
        }}),
        encoding="utf-8",
    )
    code = run(
        "fit",
        "--dataset", dataset,
        "--ranking", ranking_dir / "ranking.csv",
        "--judge", f"synthetic:{tmp_path / 'latents.json'}",
        "--out", out,
    )
    assert code == 0
    rows = (out / "fits.csv").read_text().strip().splitlines()
    assert len(rows) == 2  # header + the single finding-sentence pair
    updated = dataio.read_records(out / "dataset.csv")
    assert updated[1].prob is None  # sentence-less tentative row passes through


def _ranking_phrases(ranking_dir):
    return [p for p, _ in dataio.read_ranking(ranking_dir / "ranking.csv").entries]


def test_unknown_judge_spec_is_usage_error(tmp_path, ranking_dir, capsys):
    code = run(
        "fit",
        "--dataset", SAMPLES / "dataset.csv",
        "--ranking", ranking_dir / "ranking.csv",
        "--judge", "oracle:none",
        "--out", tmp_path / "out",
    )
    assert code == 1


def test_remote_judge_without_url_is_usage_error(tmp_path, ranking_dir, monkeypatch, capsys):
    monkeypatch.delenv("HEDGEPATH_JUDGE_URL", raising=False)
    code = run(
        "fit",
        "--dataset", SAMPLES / "dataset.csv",
        "--ranking", ranking_dir / "ranking.csv",
        "--judge", "remote",
        "--out", tmp_path / "out",
    )
    assert code == 1
    assert "HEDGEPATH_JUDGE_URL" in capsys.readouterr().err


def test_simulate_strategy_flag_overrides_experiment(tmp_path):
    exp = tmp_path / "exp.toml"
    exp.write_text(
        "phrases = 5\nseeds = [0]\njudges = 2\n"
        'strategies = ["draw_probability", "random"]\n\n'
        "[fit]\nk_all_judges = 1\nper_opponent_cap = 5\nmax_steps = 10\npatience = 3\n",
        encoding="utf-8",
    )
    out = tmp_path / "sim"
    assert run("simulate", "--experiment", exp, "--strategy", "random", "--out", out) == 0
    summary = (out / "summary.csv").read_text().splitlines()
    assert len(summary) == 2
    assert summary[1].startswith("random,")


def test_bad_flag_is_usage_error(capsys):
    assert main(["expand", "--no-such-flag"]) == 1


def test_config_snapshot_written_everywhere(tmp_path, vocab_dir):
    snapshot = json.loads((vocab_dir / "config.json").read_text())
    assert snapshot["command"] == "build-vocab"
    assert snapshot["threshold"] == 10

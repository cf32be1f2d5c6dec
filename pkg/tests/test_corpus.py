import io
import json
import math
import random
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from spaceval.corpus import (
    ClimatologyIndex,
    CorpusError,
    EmptyStratumError,
    MetricSummary,
    UnknownSampleError,
    aggregate_stats,
    climatology_baseline,
    dump_jsonl,
    evaluate_corpus,
    read_predictions,
    read_samples,
    split_by_year,
)
from spaceval.extraction import builtin_config
from spaceval.ingest import Sample, SchemaError, default_stations, pair_to_cycle
from spaceval.synth import Geography, flip, make_mention, synthetic_corpus

UTC = timezone.utc
CONFIGS = (builtin_config("pressure"), builtin_config("temperature"))


@pytest.mark.parametrize(
    "values,mean,sem",
    [([1, 2, 3], 2.0, 1 / math.sqrt(3)), ([0.4] * 5, 0.4, 0.0), ([0, 1], 0.5, 0.5), ([0.7], 0.7, None)],
)
def test_aggregate_stats(values, mean, sem):
    m, s = aggregate_stats(values)
    assert m == pytest.approx(mean, abs=1e-12)
    assert s == (None if sem is None else pytest.approx(sem, abs=1e-12))


def test_aggregate_stats_empty():
    with pytest.raises(ValueError):
        aggregate_stats([])


@given(st.lists(st.floats(0, 1), min_size=2, max_size=50))
def test_aggregate_stats_bounds(values):
    m, s = aggregate_stats(values)
    assert min(values) - 1e-12 <= m <= max(values) + 1e-12
    assert s >= 0


def test_metric_summary_counts_undefined():
    m = MetricSummary.of([1.0, None, 0.0])
    assert (m.mean, m.n, m.undefined) == (0.5, 2, 1)
    assert MetricSummary.of([None]).to_dict() == {"mean": None, "sem": None, "n": 0, "undefined": 1}


# ---------------------------------------------------------------------------
# splits and climatology
# ---------------------------------------------------------------------------


def _s(sid, station, when, text="ref"):
    return Sample(sid, station, when, pair_to_cycle(when), text)


def test_split_by_year():
    samples = [_s(str(y), "BOU", datetime(y, 6, 1, tzinfo=UTC)) for y in (2015, 2016, 2022, 2023, 2024, 2025)]
    out = split_by_year(samples)
    assert [s.sample_id for s in out["train"]] == ["2016", "2022"]
    assert [s.sample_id for s in out["val"]] == ["2023"]
    assert [s.sample_id for s in out["test"]] == ["2024", "2025"]


POOL = [
    _s(f"BOU-{m}-{i}", "BOU", datetime(2018 + i, m, 10, 18, tzinfo=UTC), f"BOU month {m} year {i}")
    for m in (1, 2) for i in range(4)
] + [_s("TWC-1-0", "TWC", datetime(2019, 1, 10, 18, tzinfo=UTC), "TWC only")]


def test_climatology_single_member_stratum():
    test = _s("t", "TWC", datetime(2024, 1, 5, 18, tzinfo=UTC))
    for seed in range(5):
        assert climatology_baseline(test, POOL, seed) == "TWC only"


@given(st.integers(0, 10**6), st.sampled_from([1, 2]), st.integers(1, 28))
def test_climatology_stratum_and_determinism(seed, month, day):
    test = _s(f"t{day}", "BOU", datetime(2024, month, day, 18, tzinfo=UTC))
    a = climatology_baseline(test, POOL, seed)
    assert a == climatology_baseline(test, list(reversed(POOL)), seed)
    assert a.startswith(f"BOU month {month} ")


def test_climatology_uses_local_month():
    # 03Z Feb 1 is still Jan 31 in Denver
    s = Sample("t", "BOU", datetime(2024, 2, 1, 3, tzinfo=UTC), "2024020100", "x", issue_local="2024-01-31T20:00:00-07:00")
    assert climatology_baseline(s, POOL, 0).startswith("BOU month 1 ")


def test_climatology_empty_stratum():
    test = _s("t", "BOU", datetime(2024, 7, 1, 18, tzinfo=UTC))
    with pytest.raises(EmptyStratumError, match="07"):
        ClimatologyIndex(POOL).draw(test, 0)


def test_climatology_seed_varies():
    idx = ClimatologyIndex(POOL)
    test = _s("t", "BOU", datetime(2024, 1, 5, 18, tzinfo=UTC))
    assert len({idx.draw(test, seed) for seed in range(50)}) > 1


# ---------------------------------------------------------------------------
# JSONL
# ---------------------------------------------------------------------------


def test_read_samples_schema_line():
    good = json.dumps(_s("a", "BOU", datetime(2024, 1, 1, tzinfo=UTC)).to_dict())
    stream = io.StringIO(good + "\n\n" + json.dumps({"sample_id": "b"}) + "\n")
    with pytest.raises(SchemaError) as exc:
        read_samples(stream)
    assert exc.value.line == 3


def test_read_samples_bad_json():
    with pytest.raises(SchemaError) as exc:
        read_samples(io.StringIO("{not json\n"))
    assert exc.value.line == 1


def test_predictions_round_trip():
    buf = io.StringIO()
    dump_jsonl([{"sample_id": "a", "predicted_text": "x"}, {"sample_id": "b", "predicted_text": "y"}], buf)
    assert read_predictions(io.StringIO(buf.getvalue())) == {"a": "x", "b": "y"}
    with pytest.raises(SchemaError, match="duplicate"):
        read_predictions(io.StringIO(buf.getvalue() * 2))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def corpus():
    return synthetic_corpus(n_samples=60, seed=3)


def _means(report, model):
    return {k: v.mean for k, v in report.rows[model].items()}


def test_identity_scores_one(corpus, hierarchy):
    samples, _ = corpus
    refs = {s.sample_id: s.reference_text for s in samples}
    report, _ = evaluate_corpus(samples, {"oracle": refs}, CONFIGS, hierarchy)
    for metric, mean in _means(report, "oracle").items():
        assert mean == pytest.approx(1.0), metric


def test_phase_inverted_scores_zero(hierarchy):
    rng = random.Random(11)
    geo = Geography(hierarchy)
    stations = default_stations()
    samples, preds = [], {}
    base = datetime(2024, 3, 1, 12, tzinfo=UTC)
    for i, office in enumerate(sorted(stations)[:30]):
        phase = "HL"[(i // 5) % 2]  # one phase per forecast
        mentions = []
        while len(mentions) < 3:
            m = make_mention(rng, geo, stations[office].node)
            if m.phase != phase:
                m = flip(m, rng)
            mentions.append(m)
        when = base + timedelta(hours=6 * (i // 5))
        sid = f"{office}-{i}"
        samples.append(Sample(sid, office, when, pair_to_cycle(when), " ".join(m.render() for m in mentions)))
        preds[sid] = " ".join(flip(m, rng).render() for m in mentions)
    report, _ = evaluate_corpus(samples, {"inverted": preds}, CONFIGS, hierarchy)
    means = _means(report, "inverted")
    for metric in ("space_local_pressure", "space_local_temperature", "space_aggregate_pressure", "space_aggregate_temperature"):
        assert means[metric] == pytest.approx(0.0), metric


def test_unknown_prediction_id(corpus, hierarchy):
    samples, preds = corpus
    with pytest.raises(UnknownSampleError, match="NOPE-1"):
        evaluate_corpus(samples, {"m": {**preds, "NOPE-1": "x"}}, CONFIGS, hierarchy)


def test_unknown_station(hierarchy):
    s = _s("a", "XXX", datetime(2024, 1, 1, tzinfo=UTC))
    with pytest.raises(CorpusError, match="XXX"):
        evaluate_corpus([s], {"m": {"a": "x"}}, CONFIGS, hierarchy)


def test_missing_predictions_skipped(corpus, hierarchy):
    samples, preds = corpus
    partial = dict(list(preds.items())[:10])
    report, _ = evaluate_corpus(samples, {"m": partial}, CONFIGS, hierarchy)
    assert report.rows["m"]["rouge_l"].n == 10


def test_jobs_deterministic(corpus, hierarchy):
    samples, preds = corpus
    r1, rec1 = evaluate_corpus(samples, {"m": preds}, CONFIGS, hierarchy, jobs=1)
    r2, rec2 = evaluate_corpus(samples, {"m": preds}, CONFIGS, hierarchy, jobs=3)
    assert r1.to_json() == r2.to_json()
    assert rec1 == rec2


def test_no_cross_sample_leakage(corpus, hierarchy):
    samples, preds = corpus
    target = samples[7]
    changed = {**preds, target.sample_id: "High pressure will build over the region tonight."}
    _, before = evaluate_corpus(samples, {"m": preds}, CONFIGS, hierarchy, modes=("local",))
    _, after = evaluate_corpus(samples, {"m": changed}, CONFIGS, hierarchy, modes=("local",))
    assert len(before) == len(after)
    for a, b in zip(before, after):
        if a["sample_id"] != target.sample_id:
            assert a == b


def test_report_layout(corpus, hierarchy):
    samples, preds = corpus
    report, records = evaluate_corpus(samples, {"b": preds, "a": preds}, CONFIGS, hierarchy, seed=5)
    d = json.loads(report.to_json())
    assert d["schema_version"] == "1"
    assert d["metadata"]["seed"] == 5 and d["metadata"]["n_samples"] == 60
    assert d["rows"]["a"] == d["rows"]["b"]
    assert [r["model"] for r in records][0] == "a"
    table = report.to_table().splitlines()
    assert table[0].split() == ["model", "metric", "mean", "sem", "n", "undefined"]
    modes = {r.get("mode") for r in records}
    assert {"local", "aggregate", "text"} <= modes

"""Corpus evaluation, climatology baseline and report emission."""

from __future__ import annotations

import hashlib
import json
import math
import random
import statistics
from collections.abc import Iterable, Iterator, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO

from . import SCHEMA_VERSION, __version__
from .extraction import PhenomenonConfig
from .hierarchy import LocationHierarchy
from .ingest import Sample, SchemaError, Station, default_stations
from .scoring import Counting, space_aggregate, space_local
from .textmetrics import rouge_l, token_f1, tokenize


class CorpusError(ValueError):
    pass


class UnknownSampleError(CorpusError, KeyError):
    def __str__(self) -> str:
        return self.args[0]


class EmptyStratumError(CorpusError):
    pass


# ---------------------------------------------------------------------------
# JSONL I/O
# ---------------------------------------------------------------------------


def iter_jsonl(stream: Iterable[str]) -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from None


def read_samples(stream: Iterable[str]) -> list[Sample]:
    return [Sample.from_dict(d, lineno) for lineno, d in iter_jsonl(stream)]


def read_predictions(stream: Iterable[str]) -> dict[str, str]:
    """``{"sample_id", "predicted_text"}`` records keyed by sample id."""
    out: dict[str, str] = {}
    for lineno, d in iter_jsonl(stream):
        if not isinstance(d, dict) or not d.get("sample_id") or not isinstance(d.get("predicted_text"), str):
            raise SchemaError("prediction needs string fields sample_id and predicted_text", lineno)
        if d["sample_id"] in out:
            raise SchemaError(f"duplicate prediction for {d['sample_id']!r}", lineno)
        out[d["sample_id"]] = d["predicted_text"]
    return out


def dump_jsonl(records: Iterable[dict], out: IO[str]) -> None:
    for r in records:
        out.write(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def aggregate_stats(values: Sequence[float]) -> tuple[float, float | None]:
    """Mean and standard error (sample sd over sqrt(n)); no SEM below n = 2."""
    if not values:
        raise ValueError("aggregate_stats needs at least one value")
    mean = statistics.fmean(values)
    if len(values) < 2:
        return mean, None
    return mean, statistics.stdev(values) / math.sqrt(len(values))


# ---------------------------------------------------------------------------
# Splits and climatology
# ---------------------------------------------------------------------------

SPLITS = {"train": (2016, 2022), "val": (2023, 2023), "test": (2024, 2025)}


def split_by_year(samples: Iterable[Sample]) -> dict[str, list[Sample]]:
    out: dict[str, list[Sample]] = {k: [] for k in SPLITS}
    for s in samples:
        for name, (lo, hi) in SPLITS.items():
            if lo <= s.issue_time.year <= hi:
                out[name].append(s)
    return out


def _month(s: Sample) -> int:
    return s.local_time.month


class ClimatologyIndex:
    """Training references bucketed by (station, calendar month)."""

    def __init__(self, training_pool: Iterable[Sample]):
        strata: dict[tuple[str, int], list[Sample]] = {}
        for s in training_pool:
            strata.setdefault((s.station, _month(s)), []).append(s)
        self.strata = {k: sorted(v, key=lambda s: s.sample_id) for k, v in strata.items()}

    def draw(self, test_sample: Sample, seed: int) -> str:
        key = (test_sample.station, _month(test_sample))
        pool = self.strata.get(key)
        if not pool:
            raise EmptyStratumError(f"no training samples for station {key[0]} in month {key[1]:02d}")
        rng = random.Random(f"{seed}:{test_sample.sample_id}")
        return rng.choice(pool).reference_text


def climatology_baseline(test_sample: Sample, training_pool: Iterable[Sample], seed: int) -> str:
    """Reference text of a seeded random training sample from the same station and month."""
    return ClimatologyIndex(training_pool).draw(test_sample, seed)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class MetricSummary:
    mean: float | None
    sem: float | None
    n: int
    undefined: int = 0

    @classmethod
    def of(cls, values: Sequence[float | None]) -> MetricSummary:
        defined = [v for v in values if v is not None]
        undefined = len(values) - len(defined)
        if not defined:
            return cls(None, None, 0, undefined)
        mean, sem = aggregate_stats(defined)
        return cls(mean, sem, len(defined), undefined)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "sem": self.sem, "n": self.n, "undefined": self.undefined}


@dataclass
class Report:
    rows: dict[str, dict[str, MetricSummary]]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "metadata": self.metadata,
            "rows": {m: {k: v.to_dict() for k, v in metrics.items()} for m, metrics in self.rows.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_table(self) -> str:
        header = ("model", "metric", "mean", "sem", "n", "undefined")
        body = []
        for model in sorted(self.rows):
            for metric in sorted(self.rows[model]):
                v = self.rows[model][metric]
                body.append(
                    (
                        model,
                        metric,
                        "-" if v.mean is None else f"{v.mean:.4f}",
                        "-" if v.sem is None else f"{v.sem:.4f}",
                        str(v.n),
                        str(v.undefined),
                    )
                )
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
        lines = []
        for r in [header, *body]:
            cells = [c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))]
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines) + "\n"


def corpus_hash(samples: Sequence[Sample], predictions: Mapping[str, Mapping[str, str]]) -> str:
    h = hashlib.sha256()
    for s in sorted(samples, key=lambda s: s.sample_id):
        h.update(json.dumps(s.to_dict(), sort_keys=True).encode())
        h.update(b"\n")
    for model in sorted(predictions):
        for sid in sorted(predictions[model]):
            h.update(json.dumps([model, sid, predictions[model][sid]]).encode())
            h.update(b"\n")
    return h.hexdigest()


# worker state, installed once per process
_CTX: dict = {}


def _init_worker(hierarchy: LocationHierarchy, configs: Sequence[PhenomenonConfig], counting: str) -> None:
    _CTX.update(hierarchy=hierarchy, configs=tuple(configs), counting=counting)


def _local_task(item: tuple[str, str, str]) -> tuple[list[dict], tuple[float, float]]:
    station, pred, ref = item
    h, counting = _CTX["hierarchy"], _CTX["counting"]
    scores = [space_local(pred, ref, station, cfg, h, counting).to_record() for cfg in _CTX["configs"]]
    tp, tr = tokenize(pred), tokenize(ref)
    return scores, (rouge_l(tp, tr), token_f1(tp, tr))


def _aggregate_task(item: tuple[list[tuple[str, str]], list[tuple[str, str]]]) -> list[dict]:
    pred, ref = item
    h, counting = _CTX["hierarchy"], _CTX["counting"]
    return [space_aggregate(pred, ref, cfg, h, counting).to_record() for cfg in _CTX["configs"]]


def _run(tasks: list, fn, jobs: int, init_args: tuple) -> list:
    if jobs <= 1 or len(tasks) < 2:
        _init_worker(*init_args)
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=init_args) as pool:
        # map preserves input order, so the reduction below is deterministic
        return list(pool.map(fn, tasks, chunksize=chunk))


def evaluate_corpus(
    samples: Sequence[Sample],
    predictions: Mapping[str, Mapping[str, str]],
    configs: Sequence[PhenomenonConfig],
    hierarchy: LocationHierarchy,
    *,
    modes: Sequence[str] = ("local", "aggregate"),
    counting: Counting | str = Counting.OBJECT,
    stations: Mapping[str, Station] | None = None,
    jobs: int = 1,
    seed: int | None = None,
) -> tuple[Report, list[dict]]:
    """Score every model's predictions against the sample references.

    ``predictions`` maps model name -> sample_id -> predicted text.  Samples
    a model has no prediction for are skipped for that model.  Returns the
    report and the per-sample records (local SPACE, text metrics, then one
    aggregate record per forecast).
    """
    counting = Counting(counting).value
    stations = default_stations() if stations is None else stations
    node: dict[str, str] = {}
    for s in samples:
        st = stations.get(s.station)
        if st is None:
            raise CorpusError(f"sample {s.sample_id!r}: station {s.station!r} is not in the station registry")
        if st.node not in hierarchy:
            raise CorpusError(f"station {s.station!r}: home node {st.node!r} is not in the hierarchy")
        node[s.station] = st.node
    by_id = {s.sample_id: s for s in samples}
    if len(by_id) != len(samples):
        raise CorpusError("duplicate sample_id in samples")
    for model, preds in predictions.items():
        missing = sorted(set(preds) - set(by_id))
        if missing:
            raise UnknownSampleError(f"model {model!r}: prediction for unknown sample_id {missing[0]!r}")

    init = (hierarchy, tuple(configs), counting)
    rows: dict[str, dict[str, MetricSummary]] = {}
    records: list[dict] = []
    for model in sorted(predictions):
        preds = predictions[model]
        scored = [s for s in samples if s.sample_id in preds]
        metrics: dict[str, list] = {}

        local_out = _run([(node[s.station], preds[s.sample_id], s.reference_text) for s in scored], _local_task, jobs, init)
        for s, (space_recs, (rl, f1)) in zip(scored, local_out):
            for rec in space_recs:
                rec.update(sample_id=s.sample_id, forecast_id=s.forecast_id, station=s.station, model=model)
                if "local" in modes:
                    metrics.setdefault(f"space_local_{rec['phenomenon']}", []).append(rec["s"])
                    records.append(rec)
            metrics.setdefault("rouge_l", []).append(rl)
            metrics.setdefault("token_f1", []).append(f1)
            records.append(
                {
                    "sample_id": s.sample_id,
                    "forecast_id": s.forecast_id,
                    "station": s.station,
                    "model": model,
                    "mode": "text",
                    "rouge_l": rl,
                    "token_f1": f1,
                }
            )

        if "aggregate" in modes:
            forecasts: dict[str, list[Sample]] = {}
            for s in scored:
                if s.forecast_id:
                    forecasts.setdefault(s.forecast_id, []).append(s)
            fids = sorted(forecasts)
            tasks = [
                (
                    [(node[s.station], preds[s.sample_id]) for s in forecasts[f]],
                    [(node[s.station], s.reference_text) for s in forecasts[f]],
                )
                for f in fids
            ]
            for fid, recs in zip(fids, _run(tasks, _aggregate_task, jobs, init)):
                for rec in recs:
                    rec.update(forecast_id=fid, model=model)
                    metrics.setdefault(f"space_aggregate_{rec['phenomenon']}", []).append(rec["s"])
                    records.append(rec)

        rows[model] = {k: MetricSummary.of(v) for k, v in metrics.items()}

    metadata = {
        "tool_version": __version__,
        "phenomena": [c.name for c in configs],
        "modes": sorted(modes),
        "counting": counting,
        "corpus_hash": corpus_hash(samples, predictions),
        "n_samples": len(samples),
        "aggregate_sem_over": "forecasts",
        "token_f1_variant": "multiset",
        "tokenizer": "lowercase, [a-z0-9]+ runs",
    }
    if seed is not None:
        metadata["seed"] = seed
    return Report(rows, metadata), records


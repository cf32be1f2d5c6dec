"""Command-line entry point.

Settings resolve in order: command-line flags, then ``SPACEVAL_<NAME>``
environment variables, then the ``[<subcommand>]`` and ``[spaceval]``
sections of an INI file given by ``--config`` (or ``SPACEVAL_CONFIG``).

Exit status: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from collections.abc import Sequence
from contextlib import contextmanager
from datetime import date
from pathlib import Path

from . import SCHEMA_VERSION, __version__
from .corpus import ClimatologyIndex, CorpusError, dump_jsonl, evaluate_corpus, read_predictions, read_samples
from .extraction import ConfigError, PhenomenonConfig, UnknownStationError, builtin_config, parse_phenomenon_config
from .hierarchy import STOP_TERMS, HierarchyError, LocationHierarchy, default_hierarchy, load_hierarchy
from .ingest import (
    DEFAULT_ENDPOINT,
    AfdArchiveClient,
    HttpTransport,
    IngestError,
    RecordingTransport,
    ReplayTransport,
    SchemaError,
    default_stations,
    parse_stations,
    samples_from_products,
)
from .preprocess import RulesError, default_rules, parse_filter_rules, preprocess_samples, quality_control
from .scoring import space_local

log = logging.getLogger("spaceval")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# name -> (type, built-in default)
SETTINGS = {
    "endpoint": (str, DEFAULT_ENDPOINT),
    "fixtures": (str, None),
    "workers": (int, 1),
    "rate": (float, None),
    "retries": (int, 4),
    "rules": (str, None),
    "hierarchy": (str, None),
    "stations": (str, None),
    "phenomenon": (str, "both"),
    "mode": (str, "both"),
    "counting": (str, "object"),
    "jobs": (int, 1),
    "seed": (int, 0),
}
CHOICES = {
    "phenomenon": ("pressure", "temperature", "both"),
    "mode": ("local", "aggregate", "both"),
    "counting": ("object", "group"),
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _settings_flags(p: argparse.ArgumentParser, *names: str) -> None:
    helps = {
        "endpoint": "archive base URL",
        "fixtures": "replay recorded responses from this directory instead of the network",
        "workers": "stations fetched concurrently",
        "rate": "global request cap, requests per second",
        "retries": "retries for transient failures",
        "rules": "filter rules file (default: bundled rules)",
        "hierarchy": "hierarchy definition file (default: bundled)",
        "stations": "station registry file (default: bundled)",
        "phenomenon": "pressure, temperature or both",
        "mode": "local, aggregate or both",
        "counting": "matched-object counting: object or group",
        "jobs": "worker processes",
        "seed": "random seed",
    }
    p.set_defaults(_parser=p)
    for name in names:
        p.add_argument(f"--{name}", default=None, help=f"{helps[name]} [env SPACEVAL_{name.upper()}]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spaceval", description="Phase- and location-aware AFD evaluation.")
    parser.add_argument("--version", action="version", version=f"spaceval {__version__} (schema {SCHEMA_VERSION})")
    parser.add_argument("--config", help="INI file with [spaceval] / [<subcommand>] defaults [env SPACEVAL_CONFIG]")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("ingest", help="fetch AFDs and write raw sample JSONL")
    p.add_argument("--station", dest="station_ids", required=True, help="comma-separated office ids, e.g. BOU,TWC")
    p.add_argument("--start", required=True, type=_date, help="first UTC day, YYYY-MM-DD")
    p.add_argument("--end", required=True, type=_date, help="last UTC day, YYYY-MM-DD")
    p.add_argument("-o", "--out", default="-", help="output JSONL (default stdout)")
    _settings_flags(p, "endpoint", "fixtures", "workers", "rate", "retries", "stations")

    p = sub.add_parser("preprocess", help="filter raw samples and apply quality control")
    p.add_argument("-i", "--in", dest="input", default="-", help="raw sample JSONL (default stdin)")
    p.add_argument("-o", "--out", default="-", help="filtered sample JSONL (default stdout)")
    p.add_argument("--summary", help="write the drop-count summary JSON here (default stderr)")
    p.add_argument("--no-qc", action="store_true", help="skip quality control")
    _settings_flags(p, "rules", "stations")

    p = sub.add_parser("score", help="score one predicted/reference pair")
    p.add_argument("--pred", required=True, help="predicted discussion text file")
    p.add_argument("--ref", required=True, help="reference discussion text file")
    p.add_argument("--station", dest="station_id", required=True, help="office id or hierarchy node id")
    p.add_argument("--phenomenon-file", help="custom phenomenon config (phase|phrase lines)")
    p.add_argument("--pretty", action="store_true", help="human-readable output")
    _settings_flags(p, "phenomenon", "counting", "hierarchy", "stations")

    p = sub.add_parser("evaluate", help="score a corpus and write a report")
    p.add_argument("--samples", required=True, help="sample JSONL with reference texts")
    p.add_argument(
        "--predictions",
        required=True,
        action="append",
        metavar="[NAME=]FILE",
        help="prediction JSONL; repeat for several models (name defaults to the file stem)",
    )
    p.add_argument("--report", default="-", help="report JSON (default stdout)")
    p.add_argument("--scores", help="per-sample score JSONL")
    p.add_argument("--pretty", action="store_true", help="print an aligned table instead of JSON")
    _settings_flags(p, "phenomenon", "mode", "counting", "hierarchy", "stations", "seed", "jobs")

    p = sub.add_parser("baseline", help="baseline predictions")
    bsub = p.add_subparsers(dest="baseline", metavar="KIND")
    bsub.required = True
    b = bsub.add_parser("climatology", help="same-station, same-month random training discussion")
    b.add_argument("--train", required=True, help="training sample JSONL")
    b.add_argument("--test", required=True, help="test sample JSONL")
    b.add_argument("-o", "--out", default="-", help="prediction JSONL (default stdout)")
    _settings_flags(b, "seed")

    p = sub.add_parser("fixtures", help="record or replay archive responses")
    fsub = p.add_subparsers(dest="action", metavar="ACTION")
    fsub.required = True
    for action, text in (("record", "fetch from the archive and store response bodies"), ("replay", "ingest from stored bodies")):
        f = fsub.add_parser(action, help=text)
        f.add_argument("--dir", required=True, help="fixture directory")
        f.add_argument("--station", dest="station_ids", required=True, help="comma-separated office ids")
        f.add_argument("--start", required=True, type=_date)
        f.add_argument("--end", required=True, type=_date)
        f.add_argument("-o", "--out", default="-", help="sample JSONL (default stdout)")
        _settings_flags(f, "endpoint", "rate", "retries", "stations")
    return parser


def _date(value: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {value!r}") from None


def resolve_settings(args: argparse.Namespace, env: dict, config: configparser.ConfigParser | None) -> None:
    section = args.command
    for name, (typ, default) in SETTINGS.items():
        if not hasattr(args, name):
            continue
        raw = getattr(args, name)
        if raw is None:
            raw = env.get(f"SPACEVAL_{name.upper()}")
        if raw is None and config is not None:
            raw = config.get(section, name, fallback=None)
            if raw is None:
                raw = config.get("spaceval", name, fallback=None)
        if raw is None:
            setattr(args, name, default)
            continue
        try:
            setattr(args, name, typ(raw))
        except ValueError:
            raise UsageError(f"bad value for {name}: {raw!r}") from None
    for name, allowed in CHOICES.items():
        if hasattr(args, name) and getattr(args, name) not in allowed:
            raise UsageError(f"--{name} must be one of {', '.join(allowed)}, got {getattr(args, name)!r}")
    for name in ("jobs", "workers"):
        if getattr(args, name, 1) < 1:
            raise UsageError(f"--{name} must be >= 1")


def _load_config(path: str | None) -> configparser.ConfigParser | None:
    if not path:
        return None
    cfg = configparser.ConfigParser()
    if not cfg.read(path):
        raise UsageError(f"cannot read config file {path}")
    return cfg


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------


@contextmanager
def _open_in(path: str):
    if path == "-":
        yield sys.stdin
    else:
        with open(path, encoding="utf-8") as fh:
            yield fh


@contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _hierarchy(args) -> LocationHierarchy:
    if not args.hierarchy:
        return default_hierarchy()
    return load_hierarchy(Path(args.hierarchy).read_text(encoding="utf-8"), STOP_TERMS)


def _stations(args):
    if not args.stations:
        return default_stations()
    return parse_stations(Path(args.stations).read_text(encoding="utf-8"))


def _configs(phenomenon: str) -> list[PhenomenonConfig]:
    names = ("pressure", "temperature") if phenomenon == "both" else (phenomenon,)
    return [builtin_config(n) for n in names]


def _station_ids(args) -> list[str]:
    ids = [s.strip().upper() for s in args.station_ids.split(",") if s.strip()]
    registry = _stations(args)
    unknown = [s for s in ids if s not in registry]
    if unknown:
        raise DataError(f"unknown station(s): {', '.join(unknown)}")
    if args.end < args.start:
        raise UsageError("--end is before --start")
    return ids


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _ingest(args, transport) -> int:
    ids = _station_ids(args)
    client = AfdArchiveClient(args.endpoint, transport, max_retries=args.retries, requests_per_second=args.rate)
    texts = client.fetch_many(ids, args.start, args.end, workers=getattr(args, "workers", 1))
    samples = [s for st in ids for s in samples_from_products(st, texts[st])]
    with _open_out(args.out) as out:
        dump_jsonl((s.to_dict() for s in samples), out)
    log.info("wrote %d samples", len(samples))
    return 0


def cmd_ingest(args) -> int:
    transport = ReplayTransport(args.fixtures) if args.fixtures else HttpTransport()
    return _ingest(args, transport)


def cmd_fixtures(args) -> int:
    if args.action == "record":
        return _ingest(args, RecordingTransport(HttpTransport(), args.dir))
    if not Path(args.dir, "index.json").exists():
        raise DataError(f"{args.dir} has no index.json")
    return _ingest(args, ReplayTransport(args.dir))


def cmd_preprocess(args) -> int:
    rules = parse_filter_rules(Path(args.rules).read_text(encoding="utf-8")) if args.rules else default_rules()
    with _open_in(args.input) as fh:
        samples = read_samples(fh)
    kept, summary = preprocess_samples(samples, rules)
    report = {"filter": summary.to_dict()}
    if not args.no_qc:
        qc = quality_control(kept, _stations(args))
        kept = qc.kept
        report["qc"] = qc.counts
    report["samples_out"] = len(kept)
    with _open_out(args.out) as out:
        dump_jsonl((s.to_dict() for s in kept), out)
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.summary:
        Path(args.summary).write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)
    return 0


def cmd_score(args) -> int:
    h = _hierarchy(args)
    station = args.station_id
    registry = _stations(args)
    if station.upper() in registry:
        station = registry[station.upper()].node
    if args.phenomenon_file:
        path = Path(args.phenomenon_file)
        configs = [parse_phenomenon_config(path.read_text(encoding="utf-8"), path.stem)]
    else:
        configs = _configs(args.phenomenon)
    pred = Path(args.pred).read_text(encoding="utf-8")
    ref = Path(args.ref).read_text(encoding="utf-8")
    records = [space_local(pred, ref, station, cfg, h, args.counting).to_record(station=args.station_id) for cfg in configs]
    if args.pretty:
        for r in records:
            s = "undefined" if r["s"] is None else f"{r['s']:.4f} (s_m {r['s_m']:.4f}, r_c {r['r_c']:.4f})"
            print(f"{r['phenomenon']:<12} s = {s}  n_L={r['n_L']} n_H={r['n_H']}")
    else:
        dump_jsonl(records, sys.stdout)
    return 0


def _prediction_sources(values: Sequence[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for v in values:
        name, sep, path = v.partition("=")
        if not sep:
            name, path = Path(v).stem, v
        if name in out:
            raise UsageError(f"model name {name!r} given twice")
        out[name] = path
    return out


def cmd_evaluate(args) -> int:
    h = _hierarchy(args)
    stations = _stations(args)
    with _open_in(args.samples) as fh:
        samples = read_samples(fh)
    predictions = {}
    for name, path in _prediction_sources(args.predictions).items():
        with _open_in(path) as fh:
            predictions[name] = read_predictions(fh)
    modes = ("local", "aggregate") if args.mode == "both" else (args.mode,)
    report, records = evaluate_corpus(
        samples,
        predictions,
        _configs(args.phenomenon),
        h,
        modes=modes,
        counting=args.counting,
        stations=stations,
        jobs=args.jobs,
        seed=args.seed,
    )
    if args.scores:
        with _open_out(args.scores) as out:
            dump_jsonl(records, out)
    with _open_out(args.report) as out:
        out.write(report.to_table() if args.pretty else report.to_json())
    return 0


def cmd_baseline(args) -> int:
    with _open_in(args.train) as fh:
        index = ClimatologyIndex(read_samples(fh))
    with _open_in(args.test) as fh:
        test = read_samples(fh)
    preds = [{"sample_id": s.sample_id, "predicted_text": index.draw(s, args.seed)} for s in test]
    with _open_out(args.out) as out:
        dump_jsonl(preds, out)
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "preprocess": cmd_preprocess,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
    "baseline": cmd_baseline,
    "fixtures": cmd_fixtures,
}

DATA_ERRORS = (
    DataError,
    CorpusError,
    SchemaError,
    IngestError,
    HierarchyError,
    ConfigError,
    RulesError,
    UnknownStationError,
    OSError,
)


def main(argv: Sequence[str] | None = None, env: dict | None = None) -> int:
    env = dict(os.environ if env is None else env)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    try:
        resolve_settings(args, env, _load_config(args.config or env.get("SPACEVAL_CONFIG")))
        return COMMANDS[args.command](args)
    except UsageError as exc:
        args._parser.print_help(sys.stderr)
        print(f"spaceval {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except DATA_ERRORS as exc:
        print(f"spaceval {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Regenerate the bundled test data.

    python3 scripts/build_test_data.py            # fixtures and corpus
    python3 scripts/build_test_data.py --golden   # also refreeze golden outputs

Golden files are compared byte-for-byte by the test suite, so only refreeze
them after reviewing the diff.
"""

from __future__ import annotations

import argparse
import shutil
import subprocess
import sys
import tempfile
from datetime import timedelta
from pathlib import Path

from spaceval.corpus import dump_jsonl
from spaceval.synth import FIXTURE_DAYS, FIXTURE_START, FIXTURE_STATIONS, build_archive_fixtures, synthetic_corpus

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "tests" / "data"
ARCHIVE = DATA / "archive"
CORPUS = DATA / "corpus"


def build_inputs() -> None:
    shutil.rmtree(ARCHIVE, ignore_errors=True)
    n = build_archive_fixtures(ARCHIVE)
    print(f"recorded {n} products into {ARCHIVE}")

    CORPUS.mkdir(parents=True, exist_ok=True)
    samples, preds = synthetic_corpus(200, seed=0)
    with open(CORPUS / "samples.jsonl", "w") as fh:
        dump_jsonl((s.to_dict() for s in samples), fh)
    with open(CORPUS / "predictions.jsonl", "w") as fh:
        dump_jsonl(({"sample_id": s.sample_id, "predicted_text": preds[s.sample_id]} for s in samples), fh)
    print(f"wrote {len(samples)} corpus samples into {CORPUS}")


def spaceval(*args: str) -> None:
    subprocess.run([sys.executable, "-m", "spaceval", *args], check=True, cwd=ROOT)


def build_golden(tmp: Path) -> None:
    end = FIXTURE_START + timedelta(days=FIXTURE_DAYS - 1)
    raw = tmp / "raw.jsonl"
    spaceval(
        "fixtures", "replay", "--dir", str(ARCHIVE), "--station", ",".join(FIXTURE_STATIONS),
        "--start", FIXTURE_START.isoformat(), "--end", end.isoformat(), "-o", str(raw),
    )
    spaceval("preprocess", "-i", str(raw), "-o", str(tmp / "filtered.jsonl"), "--summary", str(DATA / "golden_preprocess_summary.json"))
    spaceval(
        "evaluate", "--samples", str(CORPUS / "samples.jsonl"), "--predictions", f"synthetic={CORPUS / 'predictions.jsonl'}",
        "--report", str(DATA / "golden_report.json"), "--seed", "0",
    )
    print("refroze golden_preprocess_summary.json and golden_report.json")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--golden", action="store_true", help="refreeze golden outputs")
    args = ap.parse_args()
    build_inputs()
    if args.golden:
        with tempfile.TemporaryDirectory() as tmp:
            build_golden(Path(tmp))


if __name__ == "__main__":
    main()

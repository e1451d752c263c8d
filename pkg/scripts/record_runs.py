#!/usr/bin/env python3
"""Replay the scripted case studies and save their run records under
fixtures/recorded/ for the gateway property tests and the console UI's
snapshot tests."""

import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from protlab.events import render_record
from protlab.orchestrator import Session, load_fixture_config

OUT = ROOT / "fixtures" / "recorded"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name in ("case_study_1", "case_study_2", "case_study_3"):
        with tempfile.TemporaryDirectory() as td:
            objective, config = load_fixture_config(ROOT / "fixtures" / name, td)
            session = Session(objective, config)
            state = session.start()
            assert state.phase.value == "Done", (name, state.failure_reason)
            record = render_record(session.recorder.snapshot())
        (OUT / f"{name}.ndjson").write_text(record)
        print(f"recorded {name}: {len(record.splitlines())} events")


if __name__ == "__main__":
    main()

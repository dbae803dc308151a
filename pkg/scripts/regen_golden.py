"""Regenerate scenarios/golden/*.json from the committed scenario fixtures.

Run after an intentional change to report contents, then review the diff.
"""

import contextlib
import io
import json
from pathlib import Path

from qobs.cli import main

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
GOLDEN = SCENARIOS / "golden"
COMMANDS = ("check-pr", "solve", "coherent")


def run(command, path):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main([command, str(path)])
    return code, json.loads(buf.getvalue())


def regenerate():
    GOLDEN.mkdir(exist_ok=True)
    for path in sorted(SCENARIOS.glob("*.json")):
        for command in COMMANDS:
            code, report = run(command, path)
            out = GOLDEN / f"{path.stem}.{command}.json"
            out.write_text(json.dumps({"exit_code": code, "report": report}, indent=2) + "\n")
            print(f"{out.relative_to(ROOT)}: exit {code}")


if __name__ == "__main__":
    regenerate()

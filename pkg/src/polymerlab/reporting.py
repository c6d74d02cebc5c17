"""Report writers.  Every output file carries the full run configuration,
the seed, and a version stamp, so any result can be reproduced from the
file alone."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from . import __version__


def run_stamp(config: dict, seed: int | None) -> dict:
    return {"tool": f"polymerlab {__version__}", "seed": seed,
            "config": config}


def write_json(path, payload: dict, config: dict, seed: int | None) -> None:
    doc = {"meta": run_stamp(config, seed)}
    doc.update(payload)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False,
                                     default=str) + "\n")


def render_csv(header, rows, config: dict, seed: int | None) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(run_stamp(config, seed), default=str) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_csv(path, header, rows, config: dict, seed: int | None) -> None:
    Path(path).write_text(render_csv(header, rows, config, seed))


def read_csv_report(path):
    """Read back a report CSV: returns (meta dict, header, rows-as-strings)."""
    lines = Path(path).read_text().splitlines()
    meta = json.loads(lines[0].lstrip("# "))
    rows = list(csv.reader(lines[1:]))
    return meta, rows[0], rows[1:]

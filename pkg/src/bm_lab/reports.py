"""JSON and CSV serialization of verifier results.

Documents carry a versioned ``schema`` key, use sorted keys and contain no
timings, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable

SCHEMA = "bm-lab/report/1"
SCAN_COLUMNS = ("s", "value", "chord", "second_difference")

__all__ = ["SCHEMA", "SCAN_COLUMNS", "dumps", "document", "write_json", "scan_csv", "write_text", "summary_line"]


def _clean(obj):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def document(command: str, config: dict, items: Iterable[dict]) -> dict:
    return {"schema": SCHEMA, "command": command, "config": config, "items": list(items)}


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def write_json(path, doc: dict) -> Path:
    return write_text(path, dumps(doc))


def scan_csv(table: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in table:
        w.writerow({k: ("" if row[k] is None else repr(float(row[k]))) for k in SCAN_COLUMNS})
    return buf.getvalue()


def summary_line(verdicts: Iterable[str]) -> str:
    v = list(verdicts)
    return (f"SUMMARY pass={v.count('pass')} fail={v.count('fail') + v.count('error')} "
            f"inconclusive={v.count('inconclusive')}")

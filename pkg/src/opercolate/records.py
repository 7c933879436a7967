"""Canonical machine-readable records and CSV emission.

The JSON form is canonical: sorted keys, two-space indent, trailing newline.
Parsing a record and re-serializing it reproduces the bytes exactly, which
the CLI relies on for reproducible pipelines.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json


def canonical_json(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def record_hash(record: dict) -> str:
    return hashlib.sha256(canonical_json(record).encode()).hexdigest()


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()

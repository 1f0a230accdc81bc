"""CSV helpers: UTF-8, LF line endings, mandatory header row."""

from __future__ import annotations

import csv
import io

from ..errors import FormatError


def format_value(v) -> str:
    # repr keeps floats round-trippable
    return repr(v) if isinstance(v, float) else str(v)


def emit_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(emit_csv(header, rows))


def parse_csv(text: str, expected_header=None) -> list[dict[str, str]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("CSV has no header row", 0) from None
    if expected_header is not None and header != list(expected_header):
        raise FormatError(f"unexpected CSV header {header}, expected {list(expected_header)}", 0)
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise FormatError(f"line {lineno}: {len(row)} fields, header has {len(header)}")
        rows.append(dict(zip(header, row)))
    return rows


def read_csv(path, expected_header=None) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as f:
        return parse_csv(f.read(), expected_header)

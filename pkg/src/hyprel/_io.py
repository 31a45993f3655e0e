"""CSV/JSON helpers shared by the modules and the CLI."""

import csv
import json


def format_number(v) -> str:
    if isinstance(v, (bool, str)):
        return str(v)
    return format(float(v), ".17g")


def write_csv(path, header, rows) -> None:
    """Comma-separated, header row, 17 significant digits, Unix newlines."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([format_number(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        return header, [row for row in rd if row]


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=True)
        fh.write("\n")

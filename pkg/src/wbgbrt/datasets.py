"""Converters from the public datasets' raw layouts to header-led CSV.

The raw files are fetched separately (see ``scripts/fetch_datasets.sh``);
these functions only reshape them into the canonical layout that
``load_delimited`` reads: an ISO timestamp column, target column(s), and
numeric covariate columns.
"""

from __future__ import annotations

import csv
import os
from datetime import datetime, timedelta

from .core_data import parse_duration
from .errors import DataError

PRSA_WIND_DIRECTIONS = ("NE", "NW", "SE", "cv")
PRSA_NUMERIC = ("DEWP", "TEMP", "PRES", "Iws", "Is", "Ir")


def convert_matrix_txt(src: str | os.PathLike, dst: str | os.PathLike, start: str, sample_rate: str,
                       rows: int | None = None) -> int:
    """Header-less comma-separated matrix (one column per series) to wide CSV.

    This is the layout of the exchange-rate, electricity, traffic and solar
    files distributed with the LSTNet benchmark.  Timestamps are
    synthesized from ``start`` at ``sample_rate``.  Returns the row count.
    """
    step = timedelta(seconds=int(parse_duration(sample_rate).astype(int)))
    t = datetime.fromisoformat(start)
    count = 0
    with open(src, newline="", encoding="utf-8") as fin, open(dst, "w", newline="", encoding="utf-8") as fout:
        reader = csv.reader(fin)
        writer = csv.writer(fout, lineterminator="\n")
        width = None
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if width is None:
                width = len(row)
                writer.writerow(["timestamp"] + [f"s{i}" for i in range(width)])
            elif len(row) != width:
                raise DataError(f"{src}:{lineno}: ragged row with {len(row)} fields, expected {width}")
            writer.writerow([t.isoformat(sep=" ")] + [c.strip() for c in row])
            t += step
            count += 1
            if rows is not None and count >= rows:
                break
    return count


def convert_prsa(src: str | os.PathLike, dst: str | os.PathLike) -> int:
    """Beijing PM2.5 (PRSA) file to canonical CSV.

    Output columns: ``timestamp``, ``pm2.5`` (target, empty when missing),
    the six meteorological readings, ``year``, and a one-hot encoding of
    the combined wind direction ``cbwd``.
    """
    count = 0
    with open(src, newline="", encoding="utf-8") as fin, open(dst, "w", newline="", encoding="utf-8") as fout:
        reader = csv.DictReader(fin)
        need = {"year", "month", "day", "hour", "pm2.5", "cbwd", *PRSA_NUMERIC}
        missing = need - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{src}: not a PRSA file, missing columns {sorted(missing)}")
        writer = csv.writer(fout, lineterminator="\n")
        writer.writerow(["timestamp", "pm2.5", *PRSA_NUMERIC, "year", *(f"cbwd_{d}" for d in PRSA_WIND_DIRECTIONS)])
        for lineno, row in enumerate(reader, start=2):
            try:
                ts = datetime(int(row["year"]), int(row["month"]), int(row["day"]), int(row["hour"]))
            except ValueError as exc:
                raise DataError(f"{src}:{lineno}: bad date fields ({exc})") from None
            pm = row["pm2.5"].strip()
            wind = row["cbwd"].strip()
            if wind not in PRSA_WIND_DIRECTIONS:
                raise DataError(f"{src}:{lineno}: unknown wind direction {wind!r}")
            writer.writerow(
                [ts.isoformat(sep=" "), "" if pm in ("NA", "") else pm]
                + [row[c].strip() for c in PRSA_NUMERIC]
                + [row["year"].strip()]
                + [int(wind == d) for d in PRSA_WIND_DIRECTIONS]
            )
            count += 1
    return count


CONVERTERS = {"matrix": convert_matrix_txt, "prsa": convert_prsa}

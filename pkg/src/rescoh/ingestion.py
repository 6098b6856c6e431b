"""FRED CSV parsing, date alignment, preprocessing and an optional HTTP client."""

from __future__ import annotations

import csv
import datetime as dt
import io
import os
import re
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import AlignmentError, FetchError, InvalidInputError, OfflineError, ParseError
from .timeseries import Series, center, difference

FRED_CSV_URL = "https://fred.stlouisfed.org/graph/fredgraph.csv"

#: Default FRED identifiers for the four volatility indices.
SERIES_IDS = {
    "VIX": "VIXCLS",
    "RVX": "RVXCLS",
    "OVX": "OVXCLS",
    "GVX": "GVZCLS",
}

OFFLINE_ENV = "RESCOH_OFFLINE"
PROXY_ENV = "RESCOH_HTTP_PROXY"

_ID = re.compile(r"^[A-Za-z0-9_]{1,64}$")


@dataclass(frozen=True, eq=False)
class DatedSeries:
    """A FRED series: strictly increasing dates, values with NaN for missing."""

    id: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not self.id:
            raise InvalidInputError("series id must be nonempty")
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or dates.ndim != 1:
            raise InvalidInputError("dates and values must be one-dimensional and equally long")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise InvalidInputError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.dates.size

    def __eq__(self, other):
        if not isinstance(other, DatedSeries):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None

    @property
    def observations(self) -> List[Tuple[dt.date, Optional[float]]]:
        return [
            (d.item(), None if np.isnan(v) else float(v)) for d, v in zip(self.dates, self.values)
        ]

    @property
    def missing(self) -> int:
        return int(np.count_nonzero(np.isnan(self.values)))

    def to_csv(self) -> str:
        """Serialise in FRED layout, writing missing values as ``"."``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["DATE", self.id])
        for d, v in zip(self.dates, self.values):
            w.writerow([str(d), "." if np.isnan(v) else repr(float(v))])
        return buf.getvalue()


def parse_fred_csv(text: str, id: Optional[str] = None) -> DatedSeries:
    """Parse a two-column FRED CSV (date, value).

    Values ``"."`` or empty are missing.  The series id defaults to the value
    column header.

    Raises
    ------
    ParseError
        On a malformed header, date or number; the message carries the line.
    """
    rows = csv.reader(io.StringIO(text.lstrip("﻿")))
    try:
        header = next(rows)
    except StopIteration:
        raise ParseError("empty file, expected a header row", line=1) from None
    header = [h.strip() for h in header]
    if len(header) != 2 or not header[0] or not header[1]:
        raise ParseError(f"expected header 'DATE,<SERIES>', got {','.join(header)!r}", line=1)
    dates, values = [], []
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
        ds, vs = row[0].strip(), row[1].strip()
        try:
            d = dt.date.fromisoformat(ds)
        except ValueError:
            raise ParseError(f"bad date {ds!r}", line=lineno) from None
        if vs in ("", "."):
            v = np.nan
        else:
            try:
                v = float(vs)
            except ValueError:
                raise ParseError(f"bad number {vs!r}", line=lineno) from None
            if not np.isfinite(v):
                raise ParseError(f"non-finite value {vs!r}", line=lineno)
        if dates and d <= dates[-1]:
            raise ParseError(f"date {ds} is not after {dates[-1]}", line=lineno)
        dates.append(d)
        values.append(v)
    return DatedSeries(id or header[1], np.array(dates, dtype="datetime64[D]"), np.array(values, dtype=float))


def read_fred_csv(path, id: Optional[str] = None) -> DatedSeries:
    with open(path, encoding="utf-8") as fh:
        return parse_fred_csv(fh.read(), id)


def align_drop_missing(series: Sequence[DatedSeries]) -> Tuple[List[Series], np.ndarray]:
    """Restrict every series to the dates observed (non-missing) in all of them.

    Returns the aligned values as undated :class:`Series` named by id, in the
    given order, together with the shared dates.
    """
    if not series:
        raise AlignmentError("nothing to align")
    common = None
    for s in series:
        ok = s.dates[~np.isnan(s.values)]
        common = ok if common is None else np.intersect1d(common, ok)
    if common.size == 0:
        raise AlignmentError("the series share no observed dates")
    out = []
    for s in series:
        idx = np.searchsorted(s.dates, common)
        out.append(Series(s.values[idx], name=s.id))
    return out, common


def preprocess(s) -> Series:
    """First difference, then centre at zero."""
    return center(difference(s))


def _offline(flag: Optional[bool]) -> bool:
    if flag is not None:
        return flag
    return os.environ.get(OFFLINE_ENV, "").strip().lower() in ("1", "true", "yes", "on")


def fetch_series(
    id: str,
    start: dt.date,
    end: dt.date,
    offline: Optional[bool] = None,
    session=None,
    timeout: float = 30.0,
    backoff: float = 1.0,
) -> str:
    """Download one series from FRED's public CSV endpoint.

    The body is returned unmodified.  A connection failure or 5xx response
    is retried once after ``backoff`` seconds.  The proxy in
    ``RESCOH_HTTP_PROXY`` is used when set; ``RESCOH_OFFLINE=1`` or
    ``offline=True`` refuses to touch the network.
    """
    if not _ID.match(id or ""):
        raise InvalidInputError(f"invalid series id {id!r}")
    if end < start:
        raise InvalidInputError("end date precedes start date")
    if _offline(offline):
        raise OfflineError(f"offline mode: refusing to fetch {id}")
    if session is None:
        import requests

        session = requests.Session()
    proxy = os.environ.get(PROXY_ENV)
    kwargs = {"timeout": timeout}
    if proxy:
        kwargs["proxies"] = {"http": proxy, "https": proxy}
    params = {"id": id, "cosd": start.isoformat(), "coed": end.isoformat()}
    last = None
    for attempt in range(2):
        try:
            resp = session.get(FRED_CSV_URL, params=params, **kwargs)
        except Exception as exc:  # connection-level failure
            last = FetchError(f"request for {id} failed: {exc}")
        else:
            status = getattr(resp, "status_code", None)
            if status is not None and status >= 500:
                last = FetchError(f"FRED returned HTTP {status} for {id}", status=status)
            elif status is not None and status >= 400:
                raise FetchError(f"FRED returned HTTP {status} for {id}", status=status)
            else:
                return resp.text
        if attempt == 0:
            time.sleep(backoff)
    raise last

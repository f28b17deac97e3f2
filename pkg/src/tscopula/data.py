"""Observed samples, CSV round-trips and the CNB daily exchange-rate feed."""

import csv
import datetime as dt
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, NetworkError, ParseError, SchemaError

log = logging.getLogger(__name__)

__all__ = [
    "TimeSeriesSample", "ingest_csv", "write_csv", "FxSeries", "parse_cnb_year",
    "ingest_cnb", "CNB_URL",
]


@dataclass(frozen=True, eq=False)
class TimeSeriesSample:
    """Two response series with the covariate used for each of them.

    ``covariates[j]`` is an (n, d) array; for a shared exogenous covariate
    both entries are the same array.
    """

    y1: np.ndarray
    y2: np.ndarray
    covariates: tuple

    def __post_init__(self):
        y1 = np.asarray(self.y1, dtype=float).ravel()
        y2 = np.asarray(self.y2, dtype=float).ravel()
        covs = tuple(np.asarray(c, dtype=float).reshape(y1.size, -1) for c in self.covariates)
        if y1.size != y2.size or len(covs) != 2:
            raise ValueError("need two equally long series and two covariate arrays")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y2", y2)
        object.__setattr__(self, "covariates", covs)

    @property
    def n(self):
        return self.y1.size

    def series(self, j):
        """(covariate, response) for series ``j`` in {1, 2}."""
        if j not in (1, 2):
            raise ValueError("series must be 1 or 2")
        return self.covariates[j - 1], (self.y1 if j == 1 else self.y2)

    @classmethod
    def shared(cls, y1, y2, x):
        x = np.asarray(x, dtype=float)
        return cls(y1, y2, (x, x))

    @classmethod
    def lagged(cls, series1, series2):
        """Each series regressed on its own first lag; drops the first time point."""
        s1 = np.asarray(series1, dtype=float).ravel()
        s2 = np.asarray(series2, dtype=float).ravel()
        if s1.size != s2.size or s1.size < 3:
            raise ValueError("lagged sample needs two equally long series of length >= 3")
        return cls(s1[1:], s2[1:], (s1[:-1], s2[:-1]))


def write_csv(sample, path):
    """Write ``sample`` with columns y1, y2, x1_*, x2_* (full float precision)."""
    c1, c2 = sample.covariates
    header = ["y1", "y2"] + [f"x1_{k}" for k in range(c1.shape[1])] + \
        [f"x2_{k}" for k in range(c2.shape[1])]
    rows = np.column_stack([sample.y1, sample.y2, c1, c2])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def ingest_csv(path, y1="y1", y2="y2", x1=None, x2=None, lag=False):
    """Read a sample from CSV.

    ``x1``/``x2`` name covariate columns (string or list).  With ``lag=True``
    covariates are the lagged responses and ``x1``/``x2`` are ignored.  When
    ``x1``/``x2`` are None and the file was written by :func:`write_csv`, the
    ``x1_*``/``x2_*`` columns are used.  Rows with a missing value in a
    selected column are dropped (with a warning); any other non-numeric cell
    raises :class:`ParseError`.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = list(reader)

    def cols(spec, prefix):
        if spec is None:
            found = [h for h in header if h.startswith(prefix)]
            return found
        return [spec] if isinstance(spec, str) else list(spec)

    wanted = [y1, y2]
    if not lag:
        c1 = cols(x1, "x1_")
        c2 = cols(x2, "x2_") if x2 is not None or any(h.startswith("x2_") for h in header) else c1
        if not c1:
            raise SchemaError("no covariate columns selected (pass x1/x2 or lag=True)")
        wanted += c1 + c2
    missing = [c for c in wanted if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    index = {c: header.index(c) for c in set(wanted)}

    values = []
    dropped = 0
    for r, row in enumerate(rows, start=2):
        rec = {}
        skip = False
        for c in set(wanted):
            cell = row[index[c]].strip() if index[c] < len(row) else ""
            if cell in ("", "NA", "NaN", "nan"):
                skip = True
                continue
            try:
                rec[c] = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {r}, column {c!r}: cannot parse {cell!r}",
                                 row=r, column=c) from None
        if skip:
            dropped += 1
            continue
        values.append(rec)
    if dropped:
        log.warning("%s: dropped %d row(s) with missing values", path, dropped)
    a1 = np.array([v[y1] for v in values])
    a2 = np.array([v[y2] for v in values])
    if lag:
        return TimeSeriesSample.lagged(a1, a2)
    x1a = np.array([[v[c] for c in c1] for v in values]).reshape(len(values), -1)
    x2a = np.array([[v[c] for c in c2] for v in values]).reshape(len(values), -1)
    return TimeSeriesSample(a1, a2, (x1a, x2a))


# ---------------------------------------------------------------------------
# Czech National Bank daily fixing


CNB_URL = ("https://www.cnb.cz/en/financial-markets/foreign-exchange-market/"
           "central-bank-exchange-rate-fixing/central-bank-exchange-rate-fixing/"
           "year.txt?year={year}")


@dataclass(frozen=True, eq=False)
class FxSeries:
    currency: str
    dates: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        rates = np.asarray(self.rates, dtype=float)
        if dates.size != rates.size:
            raise ValueError("dates and rates differ in length")
        if dates.size > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "rates", rates)

    @property
    def log_returns(self):
        return np.diff(np.log(self.rates))


def _parse_date(text):
    for fmt in ("%d.%m.%Y", "%d %b %Y", "%d.%b %Y", "%Y-%m-%d"):
        try:
            return dt.datetime.strptime(text.strip(), fmt).date()
        except ValueError:
            pass
    raise FormatError(f"unrecognised CNB date {text!r}")


def parse_cnb_year(text, currency):
    """Parse one CNB ``year.txt`` payload into {date: CZK per 1 unit}.

    Header lines look like ``Date|1 AUD|...|100 JPY|...``; they may repeat
    within a year when the currency list changes.  Rates quoted per 100 (or
    any other amount) are divided by the amount.
    """
    currency = currency.upper()
    out = {}
    column = None
    amount = None
    saw_header = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split("|")
        if parts[0].strip().lower() in ("date", "datum"):
            saw_header = True
            column = None
            for k, head in enumerate(parts[1:], start=1):
                bits = head.split()
                if len(bits) == 2 and bits[1].upper() == currency:
                    column = k
                    try:
                        amount = float(bits[0])
                    except ValueError:
                        raise FormatError(f"line {lineno}: bad amount in header {head!r}") from None
            continue
        if not saw_header:
            raise FormatError(f"line {lineno}: data before any header")
        if column is None:
            continue
        if len(parts) <= column:
            raise FormatError(f"line {lineno}: expected at least {column + 1} fields")
        cell = parts[column].strip().replace(",", ".")
        if not cell:
            continue
        try:
            rate = float(cell)
        except ValueError:
            raise FormatError(f"line {lineno}: bad rate {cell!r}") from None
        out[_parse_date(parts[0])] = rate / amount
    if not saw_header:
        raise FormatError("no header line found in CNB payload")
    return out


def _atomic_write(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fetch(url, timeout=30):
    import urllib.request

    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read().decode("utf-8")


def default_cache_dir():
    return Path(os.environ.get("TSCOPULA_CACHE", Path.home() / ".cache" / "tscopula"))


def ingest_cnb(currency, date_from, date_to, cache_dir=None, fetch=_fetch, offline=False):
    """Daily CNB fixing of ``currency`` against CZK between two dates (inclusive).

    Raw yearly payloads are cached under ``cache_dir`` (atomic writes) so
    analyses can be re-run offline.  ``fetch(url) -> str`` is injectable.
    """
    date_from = _to_date(date_from)
    date_to = _to_date(date_to)
    if date_to < date_from:
        raise ValueError(f"empty date window: {date_from} .. {date_to}")
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    rates = {}
    for year in range(date_from.year, date_to.year + 1):
        path = cache / f"cnb_{year}.txt"
        if path.exists():
            text = path.read_text(encoding="utf-8")
        else:
            if offline:
                raise NetworkError(f"offline and no cached CNB payload at {path}")
            url = CNB_URL.format(year=year)
            try:
                text = fetch(url)
            except Exception as exc:  # urllib raises a zoo of types
                raise NetworkError(f"cannot download {url} ({exc}); cache miss at {path}") from exc
            parse_cnb_year(text, currency)  # validate before caching
            _atomic_write(path, text)
        rates.update(parse_cnb_year(text, currency))
    days = sorted(d for d in rates if date_from <= d <= date_to)
    if not days:
        raise ValueError(f"no {currency} quotes between {date_from} and {date_to}")
    return FxSeries(currency.upper(), np.array(days, dtype="datetime64[D]"),
                    np.array([rates[d] for d in days]))


def _to_date(x):
    if isinstance(x, dt.datetime):
        return x.date()
    if isinstance(x, dt.date):
        return x
    return dt.date.fromisoformat(str(x))


def fx_sample(usd, other):
    """Lag-1 sample of two aligned FX log-return series (common dates only)."""
    common = np.intersect1d(usd.dates, other.dates)
    if common.size < 3:
        raise ValueError("too few common dates")
    r1 = np.log(usd.rates[np.isin(usd.dates, common)])
    r2 = np.log(other.rates[np.isin(other.dates, common)])
    return TimeSeriesSample.lagged(np.diff(r1), np.diff(r2))


def expected_count_report(series, expected=758):
    diff = series.rates.size - expected
    if diff:
        msg = (f"{series.currency}: {series.rates.size} observations, expected {expected} "
               f"(difference {diff:+d}; feed vintage)")
        if abs(diff) > 2:
            log.warning(msg)
        else:
            log.info(msg)
        return msg
    return ""


"""Daily temperature ingestion, cleaning, normalisation and windowing.

The input CSV has the eight columns Region, Country, State, City, Month, Day,
Year, AvgTemperature (header match is case-insensitive, any order). Missing
observations are encoded in-band as large negative numbers; anything at or
below ``DEFAULT_SENTINEL`` is treated as missing.
"""

import csv
import datetime as dt
import hashlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (EmptyFileError, EmptySeriesError, FractionRangeError, MissingColumnError,
                     SeriesTooShortError, UnknownCityError, UnparsableRowsError,
                     ZeroVarianceError)

FIELDS = ("Region", "Country", "State", "City", "Month", "Day", "Year", "AvgTemperature")
DEFAULT_SENTINEL = -90.0
MAX_BAD_FRACTION = 0.10


@dataclass(slots=True)
class RawRecord:
    region: str
    country: str
    state: str
    city: str
    month: int
    day: int
    year: int
    avg_temperature: float

    @property
    def key(self):
        return (self.region, self.country, self.state, self.city)


@dataclass
class IngestStats:
    rows: int
    cities: int
    year_min: int
    year_max: int
    missing_count: int
    bad_rows: list = field(default_factory=list)

    def to_dict(self):
        return {"rows": self.rows, "cities": self.cities, "year_min": self.year_min,
                "year_max": self.year_max, "missing_count": self.missing_count}


def _to_int(text, name):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        f = float(text)
    except ValueError:
        f = None
    if f is None or not f.is_integer():
        raise ValueError(f"{name} is not an integer: {text!r}")
    return int(f)


def _to_temp(text):
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"AvgTemperature is not a number: {text!r}") from None
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError(f"AvgTemperature is not finite: {text!r}")
    return value


def parse_csv(path, sentinel=DEFAULT_SENTINEL):
    """Read the temperature CSV into records plus ingestion statistics.

    Rows that fail to parse are skipped and reported in ``stats.bad_rows`` as
    ``(line_number, reason)``; more than 10% bad rows raises
    UnparsableRowsError.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFileError(f"{path}: no header row")
        lookup = {h.strip().lower(): i for i, h in enumerate(header)}
        missing = [f for f in FIELDS if f.lower() not in lookup]
        if missing:
            raise MissingColumnError(missing)
        cols = [lookup[f.lower()] for f in FIELDS]

        records, bad = [], []
        keys = {}
        total = 0
        for row in reader:
            if not row or not any(cell.strip() for cell in row):
                continue
            total += 1
            try:
                region, country, state, city, month, day, year, temp = (
                    row[i].strip() for i in cols)
                rec_key = keys.get((region, country, state, city))
                if rec_key is None:
                    rec_key = tuple(sys.intern(s) for s in (region, country, state, city))
                    keys[rec_key] = rec_key
                records.append(RawRecord(*rec_key, _to_int(month, "Month"),
                                         _to_int(day, "Day"), _to_int(year, "Year"),
                                         _to_temp(temp)))
            except (IndexError, ValueError) as exc:
                reason = "too few columns" if isinstance(exc, IndexError) else str(exc)
                bad.append((reader.line_num, reason))

    if total == 0:
        raise EmptyFileError(f"{path}: header present but no data rows")
    if len(bad) > MAX_BAD_FRACTION * total:
        raise UnparsableRowsError(bad, total)
    years = [r.year for r in records]
    stats = IngestStats(
        rows=len(records),
        cities=len(keys),
        year_min=min(years) if years else 0,
        year_max=max(years) if years else 0,
        missing_count=sum(1 for r in records if r.avg_temperature <= sentinel),
        bad_rows=bad,
    )
    return records, stats


def city_keys(records):
    return sorted({r.key for r in records})


def resolve_city(records, query):
    """Match ``query`` against city keys.

    Accepts a key tuple, a bare city name, or a ``/``-joined suffix of
    ``Region/Country/State/City`` (e.g. ``"US/Texas/Austin"``).
    """
    keys = city_keys(records)
    if isinstance(query, tuple):
        if query in keys:
            return query
        raise UnknownCityError(f"no records for city {query!r}")
    parts = [p.strip().lower() for p in str(query).split("/")]
    hits = [k for k in keys if [s.lower() for s in k[-len(parts):]] == parts]
    if not hits:
        raise UnknownCityError(f"no city matches {query!r}")
    if len(hits) > 1:
        shown = ", ".join("/".join(k) for k in hits[:5])
        raise UnknownCityError(f"{query!r} is ambiguous ({len(hits)} matches: {shown}); "
                               "qualify it as Country/State/City")
    return hits[0]


@dataclass
class CitySeries:
    key: tuple
    dates: list
    values: np.ndarray

    def __len__(self):
        return len(self.values)


def clean_series(records, city, policy="interpolate", sentinel=DEFAULT_SENTINEL):
    """Build a date-ordered, gap-free-of-sentinels series for one city.

    Invalid calendar dates are dropped and duplicate dates collapse to the
    mean of their valid readings. With ``policy="interpolate"`` a missing
    reading is filled linearly (in days) from its valid neighbours; missing
    readings before the first or after the last valid one are dropped since
    they have only one neighbour. ``policy="drop"`` removes them all.
    """
    if policy not in ("interpolate", "drop"):
        raise ValueError(f"policy must be 'interpolate' or 'drop', got {policy!r}")
    key = resolve_city(records, city)
    by_date = {}
    for r in records:
        if r.key != key:
            continue
        try:
            day = dt.date(r.year, r.month, r.day)
        except ValueError:
            continue
        by_date.setdefault(day, []).append(r.avg_temperature)

    dates = sorted(by_date)
    values = np.full(len(dates), np.nan)
    for i, d in enumerate(dates):
        good = [v for v in by_date[d] if v > sentinel]
        if good:
            values[i] = math.fsum(good) / len(good)  # exact, so row order cannot matter
    ok = ~np.isnan(values)
    if not ok.any():
        raise EmptySeriesError(f"no valid readings for {'/'.join(key)} after cleaning")

    if policy == "interpolate":
        first, last = np.flatnonzero(ok)[[0, -1]]
        dates = dates[first:last + 1]
        values, ok = values[first:last + 1], ok[first:last + 1]
        if not ok.all():
            ordinal = np.array([d.toordinal() for d in dates], dtype=np.float64)
            values[~ok] = np.interp(ordinal[~ok], ordinal[ok], values[ok])
    else:
        dates = [d for d, keep in zip(dates, ok) if keep]
        values = values[ok]
    return CitySeries(key=key, dates=list(dates), values=values)


@dataclass(frozen=True)
class NormStats:
    mean: float
    std: float

    def apply(self, values):
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def invert(self, values):
        return np.asarray(values, dtype=np.float64) * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean, "std": self.std}


def _values(obj):
    return np.asarray(obj.values if isinstance(obj, CitySeries) else obj, dtype=np.float64)


def normalize(series, train_fraction=1.0):
    """Z-score a series with statistics from its first ``train_fraction`` part.

    Returns ``(normalized_values, NormStats)``. The default fits on every
    value, which is what callers want after :func:`chronological_split` has
    already isolated the training slice.
    """
    values = _values(series)
    if not 0.0 < train_fraction <= 1.0:
        raise FractionRangeError(f"train_fraction must be in (0, 1], got {train_fraction}")
    n_fit = int(np.floor(train_fraction * len(values)))
    if n_fit < 2:
        raise SeriesTooShortError(f"need at least 2 values to normalise, got {n_fit}")
    fit = values[:n_fit]
    mean = float(fit.mean())
    std = float(fit.std())
    if std == 0.0:
        raise ZeroVarianceError("series is constant over the fitting slice")
    stats = NormStats(mean, std)
    return stats.apply(values), stats


def denormalize(values, stats):
    return stats.invert(values)


@dataclass
class WindowedDataset:
    """Sliding-window pairs: ``inputs`` (W, window, 1) and ``targets`` (W, 1).

    Both are stored in normalised units when ``normalization`` is set;
    :meth:`target_values` gives the targets in data units.
    """

    inputs: np.ndarray
    targets: np.ndarray
    normalization: NormStats = None
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.targets)

    @property
    def window(self):
        return self.inputs.shape[1]

    def target_values(self):
        if self.normalization is None:
            return self.targets
        return self.normalization.invert(self.targets)

    def subset(self, idx):
        return WindowedDataset(self.inputs[idx], self.targets[idx], self.normalization,
                               dict(self.provenance))

    def content_hash(self):
        h = hashlib.sha256()
        for arr in (self.inputs, self.targets):
            h.update(str(arr.shape).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def make_windows(values, window=60, horizon=1, normalization=None, provenance=None):
    """Slide a ``window``-step input over ``values``; the target is ``horizon`` steps on."""
    v = _values(values)
    if window < 1 or horizon < 1:
        raise ValueError("window and horizon must be positive")
    count = len(v) - window - horizon + 1
    if count < 1:
        raise SeriesTooShortError(
            f"series of length {len(v)} is too short for window {window} and horizon {horizon}")
    inputs = np.lib.stride_tricks.sliding_window_view(v, window)[:count]
    targets = v[window + horizon - 1:window + horizon - 1 + count]
    return WindowedDataset(
        inputs=np.ascontiguousarray(inputs)[:, :, None],
        targets=targets.reshape(-1, 1).copy(),
        normalization=normalization,
        provenance=dict(provenance or {}),
    )


def chronological_split(obj, train_fraction=0.8):
    """Split into the earliest ``floor(fraction * L)`` items and the rest, unshuffled."""
    if not 0.0 < train_fraction < 1.0:
        raise FractionRangeError(f"train_fraction must be strictly between 0 and 1, "
                                 f"got {train_fraction}")
    n = len(obj)
    cut = int(np.floor(train_fraction * n))
    if cut == 0 or cut == n:
        raise SeriesTooShortError(f"cannot split {n} items at fraction {train_fraction}")
    if isinstance(obj, CitySeries):
        return (CitySeries(obj.key, obj.dates[:cut], obj.values[:cut]),
                CitySeries(obj.key, obj.dates[cut:], obj.values[cut:]))
    if isinstance(obj, WindowedDataset):
        return obj.subset(slice(0, cut)), obj.subset(slice(cut, None))
    arr = np.asarray(obj, dtype=np.float64)
    return arr[:cut], arr[cut:]


def prepare_datasets(series, window=60, train_fraction=0.8, horizon=1):
    """Split, fit z-score statistics on the training part, then window each part."""
    train, test = chronological_split(series, train_fraction)
    train_z, stats = normalize(train)
    test_z = stats.apply(test.values)

    def prov(part):
        return {"city": "/".join(part.key), "start": part.dates[0].isoformat(),
                "end": part.dates[-1].isoformat(), "length": len(part)}

    return (make_windows(train_z, window, horizon, stats, prov(train)),
            make_windows(test_z, window, horizon, stats, prov(test)))


def synthesize_series(kind="sinusoid+trend+noise", length=2000, seed=0, noise_std=0.0,
                      amplitude=15.0, period=365.0, trend=0.001, level=0.0,
                      start=dt.date(2000, 1, 1)):
    """``level + amplitude*sin(2*pi*t/period) + trend*t + noise``, one value per day."""
    if kind != "sinusoid+trend+noise":
        raise ValueError(f"unknown synthetic kind {kind!r}")
    if length < 1:
        raise ValueError("length must be positive")
    t = np.arange(length, dtype=np.float64)
    values = level + amplitude * np.sin(2.0 * np.pi * t / period) + trend * t
    if noise_std > 0:
        values = values + np.random.default_rng(seed).normal(0.0, noise_std, size=length)
    dates = [start + dt.timedelta(days=i) for i in range(length)]
    return CitySeries(key=("Synthetic", "Synthetic", "", f"sinusoid-{seed}"), dates=dates,
                      values=values)


def write_csv(path, series_list):
    """Write CitySeries back out in the eight-column layout."""
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(FIELDS)
        for s in series_list:
            for d, v in zip(s.dates, s.values):
                w.writerow([*s.key, d.month, d.day, d.year, repr(float(v))])

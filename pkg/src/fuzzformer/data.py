"""Data pipeline: ingest series, align calendars, scale, window, split.

Every series arrives as a two-column CSV (``date,value``, ISO-8601
calendar days).  Channels are aligned onto the main series' calendar
with forward fill, min-max scaled per channel on training-range rows
only, and sliced into (look-back, horizon) samples split 80/10/10
chronologically by window origin.  Samples whose target range would
bleed into a later split's input region are embargoed (dropped), so no
training target overlaps evaluation inputs.
"""

import datetime as dt
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import container
from .exceptions import DataError, FetchError

DATASET_FORMAT_VERSION = 1
SPLIT_NAMES = ("train", "valid", "test")
SPLIT_RATIOS = (0.8, 0.1, 0.1)


@dataclass
class RawSeries:
    """One named series of (ISO date, finite value) observations."""

    name: str
    dates: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.dates) != self.values.size:
            raise DataError(f"{self.name}: {len(self.dates)} dates vs {self.values.size} values")

    def __len__(self):
        return self.values.size


def _parse_date(text, context):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataError(f"{context}: bad date {text!r} ({exc})") from exc


def load_csv(path, name=None) -> RawSeries:
    """Parse a ``date,value`` CSV; sorts rows, rejects duplicates/NaN."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"series file not found: {path}")
    name = name or path.stem
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().lower()
        if header.replace(" ", "") != "date,value":
            raise DataError(f"{path}:1: expected header 'date,value', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'date,value', got {line!r}")
            day = _parse_date(parts[0], f"{path}:{lineno}")
            try:
                value = float(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad value {parts[1]!r}") from exc
            if not np.isfinite(value):
                raise DataError(f"{path}:{lineno}: non-finite value {parts[1]!r}")
            rows.append((day, value))
    if not rows:
        raise DataError(f"{path}: no observations")
    rows.sort(key=lambda r: r[0])
    for (d1, _), (d2, _) in zip(rows, rows[1:]):
        if d1 == d2:
            raise DataError(f"{path}: duplicate date {d1.isoformat()}")
    return RawSeries(
        name=name,
        dates=[d.isoformat() for d, _ in rows],
        values=np.array([v for _, v in rows]),
    )


def fetch_http(url, cache_dir, name=None, timeout=30.0) -> RawSeries:
    """Download a ``date,value`` CSV, caching by URL hash for offline reruns."""
    import requests

    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = hashlib.sha256(url.encode("utf-8")).hexdigest()[:24]
    cache_file = cache_dir / f"{key}.csv"
    if not cache_file.exists():
        try:
            resp = requests.get(url, timeout=timeout)
        except requests.RequestException as exc:
            raise FetchError(
                f"could not fetch {url}: {exc}. Download the CSV manually and "
                "pass the local file instead."
            ) from exc
        if resp.status_code != 200:
            raise FetchError(f"fetch of {url} failed with HTTP {resp.status_code}")
        tmp = cache_file.with_suffix(".part")
        tmp.write_bytes(resp.content)
        tmp.rename(cache_file)
    return load_csv(cache_file, name=name or url)


def align(series_list):
    """Stack channels onto the main (first) series' calendar.

    Other channels are forward-filled onto that calendar; leading dates
    where any channel has no value yet are dropped.  Returns
    (matrix (T, D), calendar, names).
    """
    if not series_list:
        raise DataError("align: need at least one series")
    main = series_list[0]
    calendar = list(main.dates)
    columns = [np.asarray(main.values, dtype=np.float64)]
    for series in series_list[1:]:
        lookup = dict(zip(series.dates, series.values))
        col = np.empty(len(calendar))
        have = np.zeros(len(calendar), dtype=bool)
        last = np.nan
        filled = False
        for i, day in enumerate(calendar):
            if day in lookup:
                last = lookup[day]
                filled = True
            col[i] = last
            have[i] = filled
        columns.append(col)
        if not np.any(have):
            raise DataError(f"align: series {series.name!r} does not overlap the main calendar")
    matrix = np.stack(columns, axis=1)
    good = np.all(np.isfinite(matrix), axis=1)
    first_good = int(np.argmax(good)) if np.any(good) else len(calendar)
    if first_good >= len(calendar):
        raise DataError("align: empty calendar intersection")
    matrix = matrix[first_good:]
    calendar = calendar[first_good:]
    names = [s.name for s in series_list]
    return matrix, calendar, names


@dataclass
class MinMaxScaler:
    """Per-channel affine map onto [0, 1] using training-range statistics."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=np.float64)
        self.maxs = np.asarray(self.maxs, dtype=np.float64)

    def transform(self, matrix):
        return (np.asarray(matrix, dtype=np.float64) - self.mins) / (self.maxs - self.mins)

    def inverse(self, matrix, channel=None):
        matrix = np.asarray(matrix, dtype=np.float64)
        if channel is None:
            return matrix * (self.maxs - self.mins) + self.mins
        return matrix * (self.maxs[channel] - self.mins[channel]) + self.mins[channel]


def fit_minmax(matrix, fit_rows: int) -> MinMaxScaler:
    """Fit per-channel min/max on the first ``fit_rows`` rows only."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if fit_rows < 1 or fit_rows > matrix.shape[0]:
        raise DataError(f"scaler fit range {fit_rows} out of bounds for {matrix.shape[0]} rows")
    sub = matrix[:fit_rows]
    mins = sub.min(axis=0)
    maxs = sub.max(axis=0)
    constant = np.nonzero(maxs <= mins)[0]
    if constant.size:
        raise DataError(f"constant channel(s) in scaler fit range: {constant.tolist()}")
    return MinMaxScaler(mins, maxs)


def fit_apply_minmax(matrix, fit_rows: int):
    """Fit on the leading training rows, scale the whole matrix.

    Returns (scaled matrix, scaler); values outside the fit range may
    leave [0, 1] (no clipping), and ``scaler.inverse`` undoes the map.
    """
    scaler = fit_minmax(matrix, fit_rows)
    return scaler.transform(matrix), scaler


@dataclass
class Batch:
    x: np.ndarray          # (B, N, D) scaled windows
    y_target: np.ndarray   # (B, H) scaled main-series continuation
    y_history: np.ndarray  # (B, hist) trailing main values up to the origin
    origins: np.ndarray    # (B,) origin row index of each sample


@dataclass
class WindowedDataset:
    """Scaled matrix plus window origins, split labels, and the scaler.

    A sample with origin k covers input rows [k-N+1, k] and target rows
    [k+1, k+H].  Split labels: 0 train, 1 valid, 2 test.
    """

    matrix: np.ndarray
    calendar: list
    channel_names: list
    lookback: int
    horizon: int
    stride: int
    origins: np.ndarray
    labels: np.ndarray
    scaler: MinMaxScaler
    fit_rows: int
    main_channel: int = 0

    def origins_for(self, split) -> np.ndarray:
        idx = SPLIT_NAMES.index(split) if isinstance(split, str) else int(split)
        return self.origins[self.labels == idx]

    def counts(self) -> dict:
        return {name: int(np.sum(self.labels == i)) for i, name in enumerate(SPLIT_NAMES)}

    def batch(self, origins, history: int) -> Batch:
        origins = np.asarray(origins, dtype=np.int64)
        n = self.lookback
        rows = origins[:, None] + np.arange(-n + 1, 1)[None, :]
        x = self.matrix[rows]
        tgt_rows = origins[:, None] + np.arange(1, self.horizon + 1)[None, :]
        y_target = self.matrix[tgt_rows, self.main_channel]
        hist_rows = origins[:, None] + np.arange(-history + 1, 1)[None, :]
        y_history = self.matrix[hist_rows, self.main_channel]
        return Batch(x=x, y_target=y_target, y_history=y_history, origins=origins)

    def window_main(self, origins) -> np.ndarray:
        """(B, N) main-channel input windows (for univariate baselines)."""
        origins = np.asarray(origins, dtype=np.int64)
        rows = origins[:, None] + np.arange(-self.lookback + 1, 1)[None, :]
        return self.matrix[rows, self.main_channel]

    # ------------------------------------------------------------------
    def save(self, path) -> None:
        meta = {
            "kind": "dataset",
            "format": DATASET_FORMAT_VERSION,
            "channel_names": list(self.channel_names),
            "calendar_start": self.calendar[0],
            "calendar_end": self.calendar[-1],
            "lookback": self.lookback,
            "horizon": self.horizon,
            "stride": self.stride,
            "fit_rows": self.fit_rows,
            "main_channel": self.main_channel,
            "calendar": list(self.calendar),
        }
        arrays = [
            ("matrix", self.matrix),
            ("origins", self.origins.astype(np.float64)),
            ("labels", self.labels.astype(np.float64)),
            ("scaler.mins", self.scaler.mins),
            ("scaler.maxs", self.scaler.maxs),
        ]
        container.write_archive(path, meta, arrays)

    @classmethod
    def load(cls, path) -> "WindowedDataset":
        meta, arrays = container.read_archive(path)
        if meta.get("kind") != "dataset":
            raise DataError(f"{path}: not a dataset archive (kind={meta.get('kind')!r})")
        if meta.get("format") != DATASET_FORMAT_VERSION:
            raise DataError(f"{path}: unsupported dataset format {meta.get('format')!r}")
        return cls(
            matrix=arrays["matrix"],
            calendar=list(meta["calendar"]),
            channel_names=list(meta["channel_names"]),
            lookback=int(meta["lookback"]),
            horizon=int(meta["horizon"]),
            stride=int(meta["stride"]),
            origins=arrays["origins"].astype(np.int64),
            labels=arrays["labels"].astype(np.int64),
            scaler=MinMaxScaler(arrays["scaler.mins"], arrays["scaler.maxs"]),
            fit_rows=int(meta["fit_rows"]),
            main_channel=int(meta["main_channel"]),
        )


def split_boundaries(n_rows: int, ratios=SPLIT_RATIOS):
    t1 = int(np.floor(n_rows * ratios[0]))
    t2 = int(np.floor(n_rows * (ratios[0] + ratios[1])))
    return t1, t2


def make_windows(
    matrix, calendar, channel_names, lookback, horizon, stride=1,
    ratios=SPLIT_RATIOS, main_channel=0,
) -> WindowedDataset:
    """Scale, window, and split an aligned channel matrix.

    Scaler statistics come from rows before the train/valid boundary;
    samples whose targets would overlap a later split's input region are
    embargoed.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    n_rows = matrix.shape[0]
    if n_rows < lookback + horizon:
        raise DataError(
            f"need at least lookback + horizon = {lookback + horizon} rows, got {n_rows}"
        )
    t1, t2 = split_boundaries(n_rows, ratios)
    scaler = fit_minmax(matrix, max(t1, 1))
    scaled = scaler.transform(matrix)

    origins = np.arange(lookback - 1, n_rows - horizon, stride, dtype=np.int64)
    labels = np.where(origins < t1, 0, np.where(origins < t2, 1, 2)).astype(np.int64)

    keep = np.ones(origins.size, dtype=bool)
    for earlier, later in ((0, 1), (1, 2)):
        later_origins = origins[labels == later]
        if later_origins.size == 0:
            continue
        input_start = int(later_origins.min()) - lookback + 1
        # embargo: an earlier-split sample may not have targets reaching
        # into rows the later split will observe as inputs
        keep &= ~((labels == earlier) & (origins + horizon >= input_start))
    origins = origins[keep]
    labels = labels[keep]
    if origins.size == 0:
        raise DataError("windowing produced no samples after the embargo")

    return WindowedDataset(
        matrix=scaled,
        calendar=list(calendar),
        channel_names=list(channel_names),
        lookback=lookback,
        horizon=horizon,
        stride=stride,
        origins=origins,
        labels=labels,
        scaler=scaler,
        fit_rows=max(t1, 1),
        main_channel=main_channel,
    )


def prepare_dataset(series_list, lookback, horizon, stride=1, ratios=SPLIT_RATIOS):
    matrix, calendar, names = align(series_list)
    return make_windows(matrix, calendar, names, lookback, horizon, stride, ratios)


def write_manifest(path, dataset: WindowedDataset, sources: dict) -> None:
    """Human-readable record of channels, sources, roles, and date range."""
    import json

    entries = []
    for i, name in enumerate(dataset.channel_names):
        entries.append(
            {
                "channel": name,
                "role": "main" if i == dataset.main_channel else "exogenous",
                "source": sources.get(name, "unknown"),
                "first_date": dataset.calendar[0],
                "last_date": dataset.calendar[-1],
            }
        )
    payload = {
        "format": DATASET_FORMAT_VERSION,
        "lookback": dataset.lookback,
        "horizon": dataset.horizon,
        "stride": dataset.stride,
        "samples": dataset.counts(),
        "channels": entries,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# synthetic benchmark data


def make_synthetic(n_points=1200, seed=7, start_date="2015-01-02"):
    """Seeded synthetic market stand-in: trend + sinusoid + AR(2) noise.

    Three channels: the main series, a phase-shifted oscillation sharing
    the main period, and a smoothed momentum proxy.  Every test and demo
    can run on this without external market data.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_points, dtype=np.float64)
    period = 45.0
    eps = rng.normal(scale=0.8, size=n_points)
    ar = np.zeros(n_points)
    for i in range(n_points):
        ar[i] = (
            (0.55 * ar[i - 1] if i >= 1 else 0.0)
            + (0.2 * ar[i - 2] if i >= 2 else 0.0)
            + eps[i]
        )
    main = 100.0 + 0.03 * t + 6.0 * np.sin(2 * np.pi * t / period) + ar
    companion = 20.0 + 4.0 * np.sin(2 * np.pi * t / period + 0.9) + rng.normal(
        scale=0.5, size=n_points
    )
    momentum = np.convolve(np.gradient(main), np.ones(5) / 5, mode="same") + rng.normal(
        scale=0.2, size=n_points
    )
    base = dt.date.fromisoformat(start_date)
    dates = [(base + dt.timedelta(days=int(i))).isoformat() for i in range(n_points)]
    return [
        RawSeries("synthetic_main", dates, main),
        RawSeries("synthetic_cycle", dates, companion),
        RawSeries("synthetic_momentum", dates, momentum),
    ]

"""Turn raw timestamped sensor records into aligned daily profiles.

Values are binned into within-day grid intervals (bin i covers
[t_i, t_{i+1}) in local clock time, last bin closed) and aggregated with the
median by default. Days with under-observed profiles are dropped as a whole,
since the downstream regression needs the response and every covariate for
each day it uses.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import IngestError, ValidationError

DEFAULT_MIN_OBS = 4


@dataclass(frozen=True)
class RawRecord:
    timestamp: datetime
    channel: str
    value: float | None


@dataclass(frozen=True)
class GridSpec:
    """Common within-day grid: abscissae in hours plus the binning domain."""

    domain: tuple[float, float] = (0.0, 24.0)
    points: tuple[float, ...] = tuple(float(h) for h in range(24))
    aggregator: str = "median"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size < 4:
            raise ValidationError(f"grid needs at least 4 points, got {pts.size}")
        if np.any(np.diff(pts) <= 0):
            raise ValidationError("grid points must be strictly increasing")
        lo, hi = self.domain
        if pts[0] < lo or pts[-1] > hi:
            raise ValidationError(f"grid points must lie within domain [{lo}, {hi}]")
        if self.aggregator not in ("median", "mean"):
            raise ValidationError(f"aggregator must be 'median' or 'mean', got {self.aggregator!r}")
        object.__setattr__(self, "points", tuple(float(p) for p in pts))

    @property
    def n_points(self) -> int:
        return len(self.points)

    def points_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    def bin_index(self, hour: float) -> int:
        """Grid bin containing an hour-of-day value, or -1 if outside all bins."""
        pts = self.points_array()
        if hour < pts[0] or hour > self.domain[1]:
            return -1
        idx = int(np.searchsorted(pts, hour, side="right")) - 1
        return min(idx, len(pts) - 1)


@dataclass(frozen=True)
class Profile:
    """One day of one variable on the common grid, with missingness mask."""

    day: date
    variable: str
    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        observed = np.asarray(self.observed, dtype=bool)
        if values.shape != observed.shape:
            raise ValidationError("values and observed mask must have equal length")
        if not np.all(np.isfinite(values[observed])):
            raise ValidationError(f"non-finite value marked observed ({self.day}, {self.variable})")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)

    @property
    def n_observed(self) -> int:
        return int(self.observed.sum())


@dataclass
class ProfileSet:
    """Aligned day x variable table of profiles sharing one grid."""

    grid: GridSpec
    days: tuple[date, ...]
    variables: tuple[str, ...]
    profiles: dict[tuple[date, str], Profile]

    def __post_init__(self):
        for d in self.days:
            for v in self.variables:
                p = self.profiles.get((d, v))
                if p is None:
                    raise ValidationError(f"missing profile for ({d}, {v})")
                if len(p.values) != self.grid.n_points:
                    raise ValidationError(f"profile ({d}, {v}) does not match the grid")

    @property
    def n_days(self) -> int:
        return len(self.days)

    def profile(self, day: date, variable: str) -> Profile:
        return self.profiles[(day, variable)]

    def values_matrix(self, variable: str) -> np.ndarray:
        """(n_days, n_points) values for one variable; unobserved cells are NaN."""
        out = np.full((self.n_days, self.grid.n_points), np.nan)
        for i, d in enumerate(self.days):
            p = self.profiles[(d, variable)]
            out[i, p.observed] = p.values[p.observed]
        return out

    def observed_matrix(self, variable: str) -> np.ndarray:
        return np.stack([self.profiles[(d, variable)].observed for d in self.days])

    def subset_days(self, days: Sequence[date]) -> "ProfileSet":
        keep = tuple(sorted(set(days)))
        missing = [d for d in keep if d not in set(self.days)]
        if missing:
            raise ValidationError(f"days not present in the profile set: {missing[:3]}")
        profs = {(d, v): self.profiles[(d, v)] for d in keep for v in self.variables}
        return ProfileSet(self.grid, keep, self.variables, profs)

    def replace_variable(self, variable: str, values: np.ndarray,
                         observed: np.ndarray) -> "ProfileSet":
        profs = dict(self.profiles)
        for i, d in enumerate(self.days):
            profs[(d, variable)] = Profile(d, variable, values[i], observed[i])
        return ProfileSet(self.grid, self.days, self.variables, profs)


def aggregate_to_grid(records: Iterable[RawRecord], spec: GridSpec) -> tuple[ProfileSet, dict]:
    """Aggregate a record stream into per-day/per-channel profiles.

    Each grid bin receives the configured aggregator of all records falling
    inside it; empty bins are marked unobserved. NaN values count as missing
    and are tallied in the returned report.
    """
    bins: dict[tuple[date, str], dict[int, list[float]]] = {}
    channels: list[str] = []
    n_records = 0
    n_missing = 0
    n_out_of_grid = 0
    for rec in records:
        n_records += 1
        if rec.channel not in channels:
            channels.append(rec.channel)
        v = rec.value
        if v is None or (isinstance(v, float) and math.isnan(v)):
            n_missing += 1
            continue
        ts = rec.timestamp
        hour = ts.hour + ts.minute / 60.0 + ts.second / 3600.0
        idx = spec.bin_index(hour)
        if idx < 0:
            n_out_of_grid += 1
            continue
        key = (ts.date(), rec.channel)
        bins.setdefault(key, {}).setdefault(idx, []).append(float(v))

    agg = np.median if spec.aggregator == "median" else np.mean
    days = tuple(sorted({d for d, _ in bins}))
    variables = tuple(channels)
    profiles: dict[tuple[date, str], Profile] = {}
    for d in days:
        for var in variables:
            values = np.full(spec.n_points, np.nan)
            observed = np.zeros(spec.n_points, dtype=bool)
            for idx, vals in bins.get((d, var), {}).items():
                values[idx] = agg(vals)
                observed[idx] = True
            profiles[(d, var)] = Profile(d, var, values, observed)
    ps = ProfileSet(spec, days, variables, profiles)
    report = {
        "n_records": n_records,
        "n_missing_values": n_missing,
        "n_out_of_grid": n_out_of_grid,
        "n_days": len(days),
        "variables": list(variables),
    }
    return ps, report


def filter_profiles(ps: ProfileSet, min_obs: int = DEFAULT_MIN_OBS) -> tuple[ProfileSet, dict]:
    """Drop whole days where any variable has fewer than ``min_obs`` observed points."""
    if min_obs < 1:
        raise ValidationError(f"min_obs must be >= 1, got {min_obs}")
    kept_days = []
    excluded = {}
    for d in ps.days:
        counts = {v: ps.profiles[(d, v)].n_observed for v in ps.variables}
        if all(c >= min_obs for c in counts.values()):
            kept_days.append(d)
        else:
            excluded[d.isoformat()] = counts
    profs = {(d, v): ps.profiles[(d, v)] for d in kept_days for v in ps.variables}
    kept = ProfileSet(ps.grid, tuple(kept_days), ps.variables, profs)
    report = {
        "min_obs": min_obs,
        "n_days_before": ps.n_days,
        "n_days_kept": len(kept_days),
        "n_days_excluded": len(excluded),
        "excluded_days": excluded,
        "empty_result": len(kept_days) == 0,
    }
    return kept, report


def align_days(sets: Sequence[ProfileSet]) -> ProfileSet:
    """Merge per-variable profile sets onto the chronological intersection of days."""
    if not sets:
        raise ValidationError("no profile sets to align")
    grid = sets[0].grid
    for s in sets[1:]:
        if s.grid != grid:
            raise ValidationError("profile sets do not share a grid")
    common = set(sets[0].days)
    for s in sets[1:]:
        common &= set(s.days)
    if not common:
        raise ValidationError("no common days across variables")
    days = tuple(sorted(common))
    variables: list[str] = []
    profiles: dict[tuple[date, str], Profile] = {}
    for s in sets:
        for v in s.variables:
            if v in variables:
                raise ValidationError(f"duplicate variable {v!r} during alignment")
            variables.append(v)
            for d in days:
                profiles[(d, v)] = s.profiles[(d, v)]
    return ProfileSet(grid, days, tuple(variables), profiles)


def missing_fraction(ps: ProfileSet) -> dict[str, dict[str, float]]:
    """Per-day, per-variable fraction of unobserved grid points."""
    out: dict[str, dict[str, float]] = {}
    n = ps.grid.n_points
    for d in ps.days:
        out[d.isoformat()] = {
            v: float((~ps.profiles[(d, v)].observed).sum()) / n for v in ps.variables
        }
    return out


# ---------------------------------------------------------------------------
# CSV reading and exclusion lists
# ---------------------------------------------------------------------------

def _parse_timestamp(text: str, path: str, line_no: int) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError:
        raise IngestError(f"{path}:{line_no}: unparseable timestamp {text!r}") from None


def _parse_value(text: str, path: str, line_no: int, column: str) -> float | None:
    text = text.strip()
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise IngestError(f"{path}:{line_no}: non-numeric value {text!r} in column {column!r}") from None


def read_records_csv(path: str | Path) -> list[RawRecord]:
    """Read sensor records from CSV.

    Wide form: ``timestamp,<var1>,<var2>,...``; long form:
    ``timestamp,channel,value``. Empty fields are missing values.
    """
    path = Path(path)
    records: list[RawRecord] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0].lower() != "timestamp":
            raise IngestError(f"{path}:1: first column must be 'timestamp', got {header[:1]}")
        long_form = [h.lower() for h in header] == ["timestamp", "channel", "value"]
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            ts = _parse_timestamp(row[0], str(path), line_no)
            if long_form:
                if len(row) != 3:
                    raise IngestError(f"{path}:{line_no}: expected 3 fields, got {len(row)}")
                channel = row[1].strip()
                if not channel:
                    raise IngestError(f"{path}:{line_no}: empty channel name")
                records.append(RawRecord(ts, channel, _parse_value(row[2], str(path), line_no, "value")))
            else:
                if len(row) != len(header):
                    raise IngestError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
                for col, cell in zip(header[1:], row[1:]):
                    records.append(RawRecord(ts, col, _parse_value(cell, str(path), line_no, col)))
    return records


def read_exclusion_list(path: str | Path) -> list[tuple[date, float | None]]:
    """Parse an exclusion list: one ``date`` or ``date,hour`` per line."""
    path = Path(path)
    out: list[tuple[date, float | None]] = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                d = date.fromisoformat(parts[0])
            except ValueError:
                raise IngestError(f"{path}:{line_no}: unparseable date {parts[0]!r}") from None
            if len(parts) == 1:
                out.append((d, None))
            elif len(parts) == 2:
                try:
                    out.append((d, float(parts[1])))
                except ValueError:
                    raise IngestError(f"{path}:{line_no}: unparseable hour {parts[1]!r}") from None
            else:
                raise IngestError(f"{path}:{line_no}: expected 'date' or 'date,hour'")
    return out


def apply_exclusions(ps: ProfileSet,
                     exclusions: Sequence[tuple[date, float | None]]) -> ProfileSet:
    """Drop excluded days, or mark excluded (day, hour) points unobserved everywhere."""
    drop_days = {d for d, h in exclusions if h is None}
    point_excl: dict[date, list[int]] = {}
    for d, h in exclusions:
        if h is not None:
            idx = ps.grid.bin_index(h)
            if idx >= 0:
                point_excl.setdefault(d, []).append(idx)
    days = tuple(d for d in ps.days if d not in drop_days)
    profiles = {}
    for d in days:
        for v in ps.variables:
            p = ps.profiles[(d, v)]
            if d in point_excl:
                observed = p.observed.copy()
                values = p.values.copy()
                for idx in point_excl[d]:
                    observed[idx] = False
                    values[idx] = np.nan
                p = Profile(d, v, values, observed)
            profiles[(d, v)] = p
    return ProfileSet(ps.grid, days, ps.variables, profiles)

"""Fusion of observations into a time-keyed dynamic-column table.

Rows are time slices (day, week, or month buckets), columns are metrics
created on demand as new reports introduce them. Tables are immutable
values: fuse and add_report build new tables, and every sequence is kept
in a canonical order (rows chronological, columns lexicographic, cell
entries by source then value) so that fusion is order-independent.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    EmptyCell,
    InvertedRange,
    MalformedStore,
    UnitConflict,
    VersionMismatch,
)
from .ingest import Observation, RefRange, TimePoint

STORE_MAGIC = "chronofuse-table"
STORE_VERSION = 1


class Granularity(str, Enum):
    DAY = "day"
    WEEK = "week"
    MONTH = "month"


class Aggregator(str, Enum):
    MEAN = "mean"
    MEDIAN = "median"
    FIRST = "first"
    LAST = "last"


@dataclass(frozen=True)
class TimeSlice:
    """A fixed-granularity time bucket; start is aligned to the bucket."""

    start: TimePoint
    granularity: Granularity

    def __post_init__(self):
        aligned = slice_start(self.start.date, self.granularity)
        if self.start.date != aligned or self.start.time_of_day is not None:
            raise ValueError(f"slice start {self.start} not aligned to {self.granularity.value}")

    @property
    def start_date(self) -> dt.date:
        return self.start.date

    @property
    def end_date(self) -> dt.date:
        """Exclusive end of the slice."""
        d = self.start.date
        if self.granularity is Granularity.DAY:
            return d + dt.timedelta(days=1)
        if self.granularity is Granularity.WEEK:
            return d + dt.timedelta(days=7)
        if d.month == 12:
            return dt.date(d.year + 1, 1, 1)
        return dt.date(d.year, d.month + 1, 1)


@dataclass(frozen=True)
class CellEntry:
    value: float
    source: str


@dataclass(frozen=True)
class Cell:
    """All values observed for one metric in one slice, source-tagged.

    Colliding readings are kept rather than overwritten; aggregation is
    deferred to chart building.
    """

    entries: tuple[CellEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("cells must hold at least one entry")

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(e.value for e in self.entries)


@dataclass(frozen=True)
class ColumnDescriptor:
    metric: str
    unit: str = ""
    reference_range: RefRange | None = None
    source_reports: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True, eq=True)
class TemporalTable:
    """Dynamic-column relational table keyed by time slices.

    Treated as an immutable value: fuse, add_report, and slice_range all
    return fresh tables, so instances are safe to share read-only.
    """

    granularity: Granularity
    columns: tuple[ColumnDescriptor, ...]
    rows: dict[TimeSlice, dict[str, Cell]]

    @property
    def metrics(self) -> tuple[str, ...]:
        return tuple(c.metric for c in self.columns)

    def column_for(self, metric: str) -> ColumnDescriptor | None:
        for column in self.columns:
            if column.metric == metric:
                return column
        return None

    @property
    def slices(self) -> tuple[TimeSlice, ...]:
        return tuple(self.rows)


def slice_start(date: dt.date, granularity: Granularity) -> dt.date:
    """Align a date to its bucket start (weeks start Monday, months on day 1)."""
    if granularity is Granularity.DAY:
        return date
    if granularity is Granularity.WEEK:
        return date - dt.timedelta(days=date.weekday())
    return date.replace(day=1)


def slice_for(time: TimePoint, granularity: Granularity) -> TimeSlice:
    return TimeSlice(TimePoint.day(slice_start(time.date, granularity)), granularity)


def column_count_formula(m: int, r: int) -> int:
    """Upper-bound column count for r reports of up to m metrics each.

    Evaluates sum(k * r for k in 1..m) = r * m * (m + 1) / 2 exactly. The
    real table column count is the union of metric names, which this bounds.
    """
    if m < 0 or r < 0:
        raise ValueError("m and r must be non-negative")
    return r * m * (m + 1) // 2


def fuse(
    observations: Iterable[Observation],
    granularity: Granularity = Granularity.DAY,
    *,
    ranges: Mapping[str, RefRange] | None = None,
) -> tuple[TemporalTable, list[str]]:
    """Fuse observations from any number of reports into one table.

    Each observation lands in the slice containing its time point; new
    metrics create new columns; colliding (metric, slice) readings
    accumulate in one cell. The result does not depend on input order.

    `ranges` optionally supplies per-metric reference ranges (typically
    the lexicon's) for the column descriptors.

    Raises UnitConflict when one metric arrives with two different
    non-empty units.
    """
    cells: dict[tuple[TimeSlice, str], list[CellEntry]] = {}
    units: dict[str, str] = {}
    sources: dict[str, set[str]] = {}
    flagged: dict[str, dict[str, int]] = {}

    for obs in observations:
        if not math.isfinite(obs.value):
            raise ValueError(f"non-finite value for {obs.metric} from {obs.source}")
        key = (slice_for(obs.time, granularity), obs.metric)
        cells.setdefault(key, []).append(CellEntry(obs.value, obs.source))
        _merge_unit(units, obs.metric, obs.unit)
        sources.setdefault(obs.metric, set()).add(obs.source)
        for flag in obs.flags:
            flagged.setdefault(obs.metric, {}).setdefault(flag, 0)
            flagged[obs.metric][flag] += 1

    table = _assemble(granularity, cells, units, sources, ranges or {})
    warnings = _fusion_warnings(cells, flagged)
    return table, warnings


def _merge_unit(units: dict[str, str], metric: str, unit: str) -> None:
    current = units.get(metric, "")
    if unit and current and unit != current:
        raise UnitConflict(f"metric {metric!r} has conflicting units {current!r} and {unit!r}")
    if unit and not current:
        units[metric] = unit
    else:
        units.setdefault(metric, current)


def _assemble(granularity, cells, units, sources, ranges) -> TemporalTable:
    columns = tuple(
        ColumnDescriptor(
            metric=metric,
            unit=units.get(metric, ""),
            reference_range=ranges.get(metric),
            source_reports=frozenset(sources.get(metric, ())),
        )
        for metric in sorted(units)
    )
    by_slice: dict[TimeSlice, dict[str, list[CellEntry]]] = {}
    for (ts, metric), entries in cells.items():
        by_slice.setdefault(ts, {})[metric] = entries
    rows: dict[TimeSlice, dict[str, Cell]] = {}
    for ts in sorted(by_slice, key=lambda s: s.start_date):
        rows[ts] = {
            metric: Cell(tuple(sorted(by_slice[ts][metric], key=lambda e: (e.source, e.value))))
            for metric in sorted(by_slice[ts])
        }
    return TemporalTable(granularity=granularity, columns=columns, rows=rows)


def _fusion_warnings(cells, flagged) -> list[str]:
    warnings = []
    for metric in sorted(flagged):
        for flag in sorted(flagged[metric]):
            warnings.append(f"metric {metric}: {flagged[metric][flag]} observation(s) flagged {flag}")
    for ts, metric in sorted(cells, key=lambda k: (k[0].start_date, k[1])):
        n = len(cells[(ts, metric)])
        if n > 1:
            warnings.append(
                f"slice {ts.start_date.isoformat()} metric {metric}: {n} entries accumulated"
            )
    return warnings


def add_report(
    table: TemporalTable,
    observations: Iterable[Observation],
    *,
    ranges: Mapping[str, RefRange] | None = None,
) -> TemporalTable:
    """Fold additional observations into an existing table.

    Equivalent to re-fusing the union of everything the table holds with
    the new observations; columns grow dynamically as before.
    """
    cells: dict[tuple[TimeSlice, str], list[CellEntry]] = {
        (ts, metric): list(cell.entries)
        for ts, row in table.rows.items()
        for metric, cell in row.items()
    }
    units = {c.metric: c.unit for c in table.columns}
    sources = {c.metric: set(c.source_reports) for c in table.columns}
    merged_ranges = {
        c.metric: c.reference_range for c in table.columns if c.reference_range is not None
    }
    if ranges:
        merged_ranges.update(ranges)

    for obs in observations:
        if not math.isfinite(obs.value):
            raise ValueError(f"non-finite value for {obs.metric} from {obs.source}")
        key = (slice_for(obs.time, table.granularity), obs.metric)
        cells.setdefault(key, []).append(CellEntry(obs.value, obs.source))
        _merge_unit(units, obs.metric, obs.unit)
        sources.setdefault(obs.metric, set()).add(obs.source)

    return _assemble(table.granularity, cells, units, sources, merged_ranges)


def slice_range(table: TemporalTable, start: TimePoint, end: TimePoint) -> TemporalTable:
    """Restrict a table to slices intersecting [start, end] (dates inclusive).

    Columns left without cells are dropped and surviving descriptors get
    their source sets recomputed from the surviving entries.
    """
    if start.sort_key > end.sort_key:
        raise InvertedRange(f"range start {start.isoformat()} is after end {end.isoformat()}")
    kept = {
        ts: dict(row)
        for ts, row in table.rows.items()
        if ts.start_date <= end.date and ts.end_date > start.date
    }
    surviving = {metric for row in kept.values() for metric in row}
    columns = tuple(
        replace(
            column,
            source_reports=frozenset(
                e.source for row in kept.values() for m, c in row.items() if m == column.metric
                for e in c.entries
            ),
        )
        for column in table.columns
        if column.metric in surviving
    )
    return TemporalTable(granularity=table.granularity, columns=columns, rows=kept)


def rebucket(table: TemporalTable, granularity: Granularity) -> TemporalTable:
    """Re-key a table to a coarser (or equal) granularity."""
    order = [Granularity.DAY, Granularity.WEEK, Granularity.MONTH]
    if order.index(granularity) < order.index(table.granularity):
        raise ValueError(f"cannot rebucket {table.granularity.value} table to {granularity.value}")
    if granularity is table.granularity:
        return table
    cells: dict[tuple[TimeSlice, str], list[CellEntry]] = {}
    for ts, row in table.rows.items():
        target = slice_for(ts.start, granularity)
        for metric, cell in row.items():
            cells.setdefault((target, metric), []).extend(cell.entries)
    units = {c.metric: c.unit for c in table.columns}
    sources = {c.metric: set(c.source_reports) for c in table.columns}
    ranges = {c.metric: c.reference_range for c in table.columns if c.reference_range}
    return _assemble(granularity, cells, units, sources, ranges)


def aggregate_cell(cell: Cell, aggregator: Aggregator = Aggregator.MEAN) -> float:
    """Collapse a cell's entries to one value.

    first/last follow source report id order (entries are kept sorted by
    source then value, so ties within one report resolve by value).
    """
    if not cell.entries:
        raise EmptyCell("cannot aggregate an empty cell")
    values = cell.values
    if aggregator is Aggregator.MEAN:
        return math.fsum(values) / len(values)
    if aggregator is Aggregator.MEDIAN:
        ordered = sorted(values)
        mid = len(ordered) // 2
        if len(ordered) % 2 == 1:
            return ordered[mid]
        return (ordered[mid - 1] + ordered[mid]) / 2
    # first/last hold for any entry order, not just canonically sorted cells
    if aggregator is Aggregator.FIRST:
        return min(cell.entries, key=lambda e: (e.source, e.value)).value
    return max(cell.entries, key=lambda e: (e.source, e.value)).value


# --- persistence ---
#
# Store grammar (one self-describing UTF-8 text file):
#
#   chronofuse-table 1
#   granularity <day|week|month>
#   columns <count>
#   col <metric>|<unit>|<low..high or empty>|<range unit>|<sources comma-sep>
#   rows <count>
#   row <start ISO date>|<metric>=<value>@<source>[;<value>@<source>...]|...
#   end
#
# Values are written with repr() so the round trip is bit exact.


def _writable_token(text: str, what: str) -> str:
    # the store grammar cannot escape its separators, so refuse them up front
    if any(ch in "|;=@\n" for ch in text):
        raise ValueError(f"{what} {text!r} contains a reserved store character (| ; = @)")
    return text


def save_table(table: TemporalTable, path: str | Path) -> None:
    """Write a table to its line-oriented store file (atomic replace)."""
    path = Path(path)
    lines = [f"{STORE_MAGIC} {STORE_VERSION}", f"granularity {table.granularity.value}"]
    lines.append(f"columns {len(table.columns)}")
    for column in table.columns:
        _writable_token(column.metric, "metric")
        _writable_token(column.unit, "unit")
        for source in column.source_reports:
            _writable_token(source, "report id")
        rng, rng_unit = "", ""
        if column.reference_range is not None:
            rng = f"{column.reference_range.low!r}..{column.reference_range.high!r}"
            rng_unit = column.reference_range.unit
        sources = ",".join(sorted(column.source_reports))
        lines.append(f"col {column.metric}|{column.unit}|{rng}|{rng_unit}|{sources}")
    lines.append(f"rows {len(table.rows)}")
    for ts, row in table.rows.items():
        fields = [ts.start_date.isoformat()]
        for metric in sorted(row):
            entries = ";".join(f"{e.value!r}@{e.source}" for e in row[metric].entries)
            fields.append(f"{metric}={entries}")
        lines.append("row " + "|".join(fields))
    lines.append("end")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_table(path: str | Path) -> TemporalTable:
    """Read a store file back into a table.

    Raises VersionMismatch for unsupported schema versions and
    MalformedStore for anything else that deviates from the grammar,
    including truncation (a missing `end` sentinel).
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise MalformedStore(f"cannot read store {path}: {exc}") from exc
    cursor = _Cursor(lines, path.name)

    magic = cursor.next()
    parts = magic.split()
    if len(parts) != 2 or parts[0] != STORE_MAGIC:
        raise MalformedStore(f"{path.name}: not a chronofuse table store")
    if parts[1] != str(STORE_VERSION):
        raise VersionMismatch(f"{path.name}: unsupported store version {parts[1]!r}")

    try:
        granularity = Granularity(cursor.expect_field("granularity"))
    except ValueError:
        raise MalformedStore(f"{path.name}: unknown granularity") from None
    n_columns = cursor.expect_count("columns")
    columns = tuple(_parse_column(cursor.expect_field("col"), cursor) for _ in range(n_columns))
    n_rows = cursor.expect_count("rows")
    rows: dict[TimeSlice, dict[str, Cell]] = {}
    for _ in range(n_rows):
        ts, row = _parse_row(cursor.expect_field("row"), granularity, cursor)
        if ts in rows:
            cursor.fail(f"duplicate row for slice {ts.start_date.isoformat()}")
        rows[ts] = row
    if cursor.next() != "end":
        raise MalformedStore(f"{path.name}: missing end sentinel (truncated file?)")
    return TemporalTable(granularity=granularity, columns=columns, rows=rows)


class _Cursor:
    def __init__(self, lines: list[str], name: str):
        self.lines = lines
        self.name = name
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise MalformedStore(f"{self.name}: unexpected end of file (truncated?)")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def fail(self, message: str):
        raise MalformedStore(f"{self.name}:{self.pos}: {message}")

    def expect_field(self, key: str) -> str:
        line = self.next()
        prefix = key + " "
        if not line.startswith(prefix):
            self.fail(f"expected '{key} ...', got {line!r}")
        return line[len(prefix):]

    def expect_count(self, key: str) -> int:
        value = self.expect_field(key)
        if not value.isdigit():
            self.fail(f"expected integer {key} count, got {value!r}")
        return int(value)


def _parse_column(text: str, cursor: _Cursor) -> ColumnDescriptor:
    parts = text.split("|")
    if len(parts) != 5:
        cursor.fail(f"column record needs 5 fields, got {len(parts)}")
    metric, unit, rng_text, rng_unit, sources_text = parts
    reference_range = None
    if rng_text:
        low_text, sep, high_text = rng_text.partition("..")
        if not sep:
            cursor.fail(f"bad reference range {rng_text!r}")
        try:
            reference_range = RefRange(float(low_text), float(high_text), rng_unit)
        except ValueError as exc:
            cursor.fail(f"bad reference range {rng_text!r}: {exc}")
    sources = frozenset(s for s in sources_text.split(",") if s)
    return ColumnDescriptor(metric, unit, reference_range, sources)


def _parse_row(text: str, granularity: Granularity, cursor: _Cursor):
    parts = text.split("|")
    try:
        start = dt.date.fromisoformat(parts[0])
    except ValueError:
        cursor.fail(f"bad slice date {parts[0]!r}")
    try:
        ts = TimeSlice(TimePoint.day(start), granularity)
    except ValueError as exc:
        cursor.fail(str(exc))
    row: dict[str, Cell] = {}
    for cell_text in parts[1:]:
        metric, sep, entries_text = cell_text.partition("=")
        if not sep or not entries_text:
            cursor.fail(f"bad cell record {cell_text!r}")
        if metric in row:
            cursor.fail(f"duplicate cell for metric {metric!r}")
        entries = []
        for entry_text in entries_text.split(";"):
            value_text, sep2, source = entry_text.partition("@")
            try:
                value = float(value_text)
            except ValueError:
                cursor.fail(f"bad cell value {value_text!r}")
            if not sep2 or not source:
                cursor.fail(f"bad cell entry {entry_text!r}")
            entries.append(CellEntry(value, source))
        row[metric] = Cell(tuple(entries))
    return ts, row


# Observation archive grammar (output of the ingest stage):
#
#   chronofuse-observations 1
#   ranges <count>
#   range <metric>|<low..high>|<range unit>
#   observations <count>
#   obs <source>|<metric>|<value>|<unit>|<date[ HH:MM]>|<flags comma-sep>
#   end

ARCHIVE_MAGIC = "chronofuse-observations"
ARCHIVE_VERSION = 1


def save_observations(
    observations: list[Observation],
    path: str | Path,
    *,
    ranges: Mapping[str, RefRange] | None = None,
) -> None:
    """Archive extracted observations with the reference ranges they carry."""
    path = Path(path)
    ranges = ranges or {}
    lines = [f"{ARCHIVE_MAGIC} {ARCHIVE_VERSION}", f"ranges {len(ranges)}"]
    for metric in sorted(ranges):
        rng = ranges[metric]
        lines.append(f"range {metric}|{rng.low!r}..{rng.high!r}|{rng.unit}")
    lines.append(f"observations {len(observations)}")
    for obs in observations:
        for token, what in ((obs.source, "report id"), (obs.metric, "metric"), (obs.unit, "unit")):
            _writable_token(token, what)
        flags = ",".join(sorted(obs.flags))
        lines.append(
            f"obs {obs.source}|{obs.metric}|{obs.value!r}|{obs.unit}|{obs.time.isoformat()}|{flags}"
        )
    lines.append("end")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_observations(path: str | Path) -> tuple[list[Observation], dict[str, RefRange]]:
    """Read an observation archive back; inverse of save_observations."""
    path = Path(path)
    try:
        file_lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise MalformedStore(f"cannot read archive {path}: {exc}") from exc
    cursor = _Cursor(file_lines, path.name)
    parts = cursor.next().split()
    if len(parts) != 2 or parts[0] != ARCHIVE_MAGIC:
        raise MalformedStore(f"{path.name}: not a chronofuse observation archive")
    if parts[1] != str(ARCHIVE_VERSION):
        raise VersionMismatch(f"{path.name}: unsupported archive version {parts[1]!r}")
    ranges: dict[str, RefRange] = {}
    for _ in range(cursor.expect_count("ranges")):
        fields = cursor.expect_field("range").split("|")
        if len(fields) != 3:
            cursor.fail("range record needs 3 fields")
        metric, rng_text, rng_unit = fields
        low_text, sep, high_text = rng_text.partition("..")
        try:
            ranges[metric] = RefRange(float(low_text), float(high_text), rng_unit)
        except ValueError as exc:
            cursor.fail(f"bad reference range {rng_text!r}: {exc}")
    observations: list[Observation] = []
    for _ in range(cursor.expect_count("observations")):
        fields = cursor.expect_field("obs").split("|")
        if len(fields) != 6:
            cursor.fail("obs record needs 6 fields")
        source, metric, value_text, unit, time_text, flags_text = fields
        try:
            value = float(value_text)
        except ValueError:
            cursor.fail(f"bad observation value {value_text!r}")
        time = _parse_archive_time(time_text, cursor)
        flags = frozenset(f for f in flags_text.split(",") if f)
        observations.append(Observation(metric, value, unit, time, source, flags))
    if cursor.next() != "end":
        raise MalformedStore(f"{path.name}: missing end sentinel (truncated file?)")
    return observations, ranges


def _parse_archive_time(text: str, cursor: _Cursor) -> TimePoint:
    date_text, _, time_text = text.partition(" ")
    try:
        date = dt.date.fromisoformat(date_text)
        if time_text:
            hh, mm = time_text.split(":")
            return TimePoint.minute(date, dt.time(int(hh), int(mm)))
        return TimePoint.day(date)
    except ValueError:
        cursor.fail(f"bad observation time {text!r}")


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a temp file and rename, so readers never see partial files."""
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)

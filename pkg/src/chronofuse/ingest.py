"""Report parsing and observation extraction.

Turns report files (plain text, CSV, or pipe-delimited records) into
timestamped metric observations using a metric lexicon. Matching is
rule based: an alias lookup with longest-match-wins tie-breaking, a
closed timestamp grammar, and a plain decimal number grammar.
"""

from __future__ import annotations

import csv
import datetime as dt
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    InvalidLexicon,
    NoTimestamp,
    NoTimestampInDocument,
    ReportReadError,
    UnknownFormat,
)

FLAG_UNIT_MISMATCH = "unit_mismatch"
FLAG_OUT_OF_RANGE = "out_of_range"

# Decimal with optional sign and fraction; scientific notation is out of scope.
_NUMBER_RE = re.compile(r"[+-]?\d+(?:\.\d+)?")

# Characters stripped from token edges before value/unit interpretation.
_TOKEN_EDGE = ":;,()[]{}\"'"

# Separators that would break the line-oriented store/archive grammars.
_RESERVED_NAME_CHARS = set("|;=@\n")


class ReportFormat(str, Enum):
    PLAIN_TEXT = "plain_text"
    CSV = "csv"
    STRUCTURED_RECORDS = "structured_records"


class DateOrder(str, Enum):
    """Interpretation of the slash-separated two-digit date form."""

    DMY = "dmy"
    MDY = "mdy"


class Resolution(str, Enum):
    DAY = "day"
    MINUTE = "minute"


_EXTENSIONS = {
    ".txt": ReportFormat.PLAIN_TEXT,
    ".text": ReportFormat.PLAIN_TEXT,
    ".csv": ReportFormat.CSV,
    ".rec": ReportFormat.STRUCTURED_RECORDS,
}


@dataclass(frozen=True)
class TimePoint:
    """A calendar date, optionally refined to a minute of the day."""

    date: dt.date
    time_of_day: dt.time | None = None
    granularity: Resolution = Resolution.DAY

    def __post_init__(self):
        if (self.time_of_day is not None) != (self.granularity is Resolution.MINUTE):
            raise ValueError("granularity must be minute iff time_of_day is present")

    @classmethod
    def day(cls, date: dt.date) -> "TimePoint":
        return cls(date=date)

    @classmethod
    def minute(cls, date: dt.date, time_of_day: dt.time) -> "TimePoint":
        return cls(date=date, time_of_day=time_of_day, granularity=Resolution.MINUTE)

    @property
    def sort_key(self) -> tuple[dt.date, dt.time]:
        return (self.date, self.time_of_day or dt.time(0, 0))

    def isoformat(self) -> str:
        if self.time_of_day is None:
            return self.date.isoformat()
        return f"{self.date.isoformat()} {self.time_of_day.strftime('%H:%M')}"


@dataclass(frozen=True)
class RefRange:
    """Clinically normal [low, high] interval for a metric."""

    low: float
    high: float
    unit: str = ""

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"reference range requires low < high, got {self.low}..{self.high}")

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


@dataclass(frozen=True)
class LexiconEntry:
    """One recognizable metric: canonical name, aliases, units, normal range."""

    canonical: str
    aliases: tuple[str, ...]
    units: tuple[str, ...] = ()
    reference_range: RefRange | None = None


@dataclass
class MetricLexicon:
    """Recognition vocabulary mapping report wording to canonical metrics.

    Canonical names are unique and alias sets are pairwise disjoint, both
    case-insensitively; a canonical name always matches its own entry.
    """

    entries: list[LexiconEntry]

    def __post_init__(self):
        canonicals = [e.canonical.lower() for e in self.entries]
        if len(set(canonicals)) != len(canonicals):
            raise InvalidLexicon("canonical names must be unique")
        seen: dict[str, str] = {}
        for entry in self.entries:
            _validate_name(entry.canonical, "canonical name")
            for unit in entry.units:
                _validate_name(unit, "unit")
            for alias in {entry.canonical.lower()} | {a.lower() for a in entry.aliases}:
                _validate_name(alias, "alias")
                if alias in seen:
                    raise InvalidLexicon(
                        f"alias {alias!r} is claimed by both {seen[alias]!r} and {entry.canonical!r}"
                    )
                seen[alias] = entry.canonical

    def entry_for(self, name: str) -> LexiconEntry | None:
        """Resolve a canonical name or alias, case-insensitively."""
        key = name.lower()
        for entry in self.entries:
            if entry.canonical.lower() == key or key in (a.lower() for a in entry.aliases):
                return entry
        return None

    def ranges(self) -> dict[str, RefRange]:
        """Reference ranges keyed by canonical name (entries without one omitted)."""
        return {
            e.canonical: e.reference_range for e in self.entries if e.reference_range is not None
        }

    def iter_aliases(self):
        for entry in self.entries:
            yield entry.canonical, entry
            for alias in entry.aliases:
                yield alias, entry


@dataclass(frozen=True)
class Observation:
    """One timestamped metric reading extracted from a report."""

    metric: str
    value: float
    unit: str
    time: TimePoint
    source: str
    flags: frozenset[str] = field(default_factory=frozenset)


@dataclass
class ReportDocument:
    """A loaded report file: ordered lines plus identity and format."""

    report_id: str
    source_path: str
    lines: list[str]
    format: ReportFormat
    patient_id: str | None = None


def _validate_name(name: str, what: str) -> None:
    if not name or any(ch in _RESERVED_NAME_CHARS for ch in name):
        raise InvalidLexicon(f"{what} {name!r} is empty or contains a reserved character (| ; = @)")


def report_id_for(path: str | Path) -> str:
    """Derive the report id from the file name, sanitized for the store grammar."""
    return re.sub(r"[^A-Za-z0-9._-]", "_", Path(path).name)


def load_report(path: str | Path, format_hint: ReportFormat | None = None) -> ReportDocument:
    """Read a report file into a ReportDocument.

    The format comes from the extension (.txt, .csv, .rec) unless a hint is
    given. Raises UnknownFormat for unrecognized extensions without a hint
    and ReportReadError for missing files or non-UTF-8 bytes.
    """
    path = Path(path)
    fmt = format_hint
    if fmt is None:
        fmt = _EXTENSIONS.get(path.suffix.lower())
        if fmt is None:
            raise UnknownFormat(f"cannot infer report format from {path.name!r}; pass a format hint")
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ReportReadError(f"report file not found: {path}") from exc
    except OSError as exc:
        raise ReportReadError(f"cannot read report file {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ReportReadError(f"report file {path} is not valid UTF-8: {exc}") from exc
    return ReportDocument(
        report_id=report_id_for(path),
        source_path=str(path),
        lines=text.splitlines(),
        format=fmt,
    )


# --- timestamp grammar ---
#
# Accepted forms, each optionally followed by " HH:MM":
#   YYYY-MM-DD            ISO, always day-month order free
#   A/B/YYYY              slash form; A/B order set by the date_order switch
#   MM-DD-YYYY            dash form with two-digit lead, always month first

_ISO_RE = re.compile(r"(?<!\d)(\d{4})-(\d{2})-(\d{2})(?!\d)")
_SLASH_RE = re.compile(r"(?<!\d)(\d{2})/(\d{2})/(\d{4})(?!\d)")
_DASH_RE = re.compile(r"(?<!\d)(\d{2})-(\d{2})-(\d{4})(?!\d)")
_TIME_RE = re.compile(r"[ \t]+(\d{2}):(\d{2})(?!\d)")


def parse_timestamp(text: str, date_order: DateOrder = DateOrder.DMY) -> TimePoint:
    """Find the first accepted timestamp in `text`.

    Granularity is day unless the date is directly followed by a valid
    HH:MM time of day. Raises NoTimestamp when no accepted pattern with a
    valid calendar date occurs.
    """
    candidates: list[tuple[int, dt.date, int]] = []
    for match in _ISO_RE.finditer(text):
        y, m, d = (int(g) for g in match.groups())
        date = _checked_date(y, m, d)
        if date is not None:
            candidates.append((match.start(), date, match.end()))
    for match in _SLASH_RE.finditer(text):
        a, b, y = (int(g) for g in match.groups())
        day, month = (a, b) if date_order is DateOrder.DMY else (b, a)
        date = _checked_date(y, month, day)
        if date is not None:
            candidates.append((match.start(), date, match.end()))
    for match in _DASH_RE.finditer(text):
        m, d, y = (int(g) for g in match.groups())
        date = _checked_date(y, m, d)
        if date is not None:
            candidates.append((match.start(), date, match.end()))
    if not candidates:
        raise NoTimestamp(f"no accepted timestamp in {text!r}")
    start, date, end = min(candidates)
    time_match = _TIME_RE.match(text, end)
    if time_match:
        hh, mm = int(time_match.group(1)), int(time_match.group(2))
        if hh <= 23 and mm <= 59:
            return TimePoint.minute(date, dt.time(hh, mm))
    return TimePoint.day(date)


def _checked_date(year: int, month: int, day: int) -> dt.date | None:
    try:
        return dt.date(year, month, day)
    except ValueError:
        return None


# --- measurement grammar ---


@dataclass
class _LineMatch:
    metric: str
    value: float
    unit: str
    unit_mismatch: bool
    entry: LexiconEntry


def parse_measurement(line: str, lexicon: MetricLexicon) -> tuple[str, float, str] | None:
    """Extract (canonical metric, value, unit) from one report line.

    Returns None when no alias matches or no valid decimal follows the
    matched alias. The longest alias wins; ties go to the leftmost
    occurrence. The unit is the token after the value when it is one of
    the entry's expected units, otherwise empty.
    """
    match, _ = _scan_line(line, lexicon)
    if match is None:
        return None
    return (match.metric, match.value, match.unit)


def _scan_line(line: str, lexicon: MetricLexicon) -> tuple[_LineMatch | None, str | None]:
    """Full line scan: returns (match, warning). Either may be None."""
    best: tuple[int, int, str, LexiconEntry] | None = None
    for alias, entry in lexicon.iter_aliases():
        pattern = re.compile(
            r"(?<![A-Za-z0-9])" + re.escape(alias) + r"(?![A-Za-z0-9])", re.IGNORECASE
        )
        for m in pattern.finditer(line):
            key = (-len(alias), m.start())
            if best is None or key < (best[0], best[1]):
                best = (-len(alias), m.start(), alias, entry)
    if best is None:
        return None, None
    alias_len, start, alias, entry = -best[0], best[1], best[2], best[3]
    rest = line[start + alias_len:]

    value: float | None = None
    unit = ""
    mismatch = False
    saw_digits = False
    tokens = rest.split()
    for idx, token in enumerate(tokens):
        stripped = token.strip(_TOKEN_EDGE)
        if not stripped:
            continue
        if _NUMBER_RE.fullmatch(stripped):
            value = float(stripped)
            unit, mismatch = _resolve_unit(tokens[idx + 1:], entry)
            break
        if any(ch.isdigit() for ch in stripped):
            saw_digits = True
            break
    if value is None:
        reason = "malformed numeral" if saw_digits else "no numeric value"
        return None, f"{reason} after alias {alias!r} (metric {entry.canonical!r})"
    warning = None
    if mismatch:
        warning = (
            f"unexpected unit after {entry.canonical!r} value; expected one of "
            f"{', '.join(entry.units)}"
        )
    return _LineMatch(entry.canonical, value, unit, mismatch, entry), warning


def _resolve_unit(tokens: list[str], entry: LexiconEntry) -> tuple[str, bool]:
    """Match the token after the value against the entry's expected units.

    Returns (unit, mismatch). The stored spelling is the lexicon's, so
    case variants in reports cannot create unit conflicts downstream.
    """
    for token in tokens:
        stripped = token.strip(_TOKEN_EDGE)
        if not stripped:
            continue
        for expected in entry.units:
            if stripped.lower() == expected.lower():
                return expected, False
        return "", True
    return "", False


def extract_observations(
    doc: ReportDocument,
    lexicon: MetricLexicon,
    date_order: DateOrder = DateOrder.DMY,
) -> tuple[list[Observation], list[str]]:
    """Extract all observations from a document, in source line order.

    Plain-text documents are scanned line by line: each measurement takes
    the nearest preceding timestamp, and measurements before the first
    timestamp take the document's header date (the first timestamp found
    anywhere). CSV and record documents carry explicit per-row dates.

    Raises NoTimestampInDocument when measurements exist but no timestamp
    was ever parsed.
    """
    if doc.format is ReportFormat.CSV:
        return _extract_csv(doc, lexicon, date_order)
    if doc.format is ReportFormat.STRUCTURED_RECORDS:
        return _extract_records(doc, lexicon, date_order)
    return _extract_plain(doc, lexicon, date_order)


def _extract_plain(doc, lexicon, date_order):
    warnings: list[str] = []
    pending: list[tuple[int, _LineMatch]] = []  # matches seen before any timestamp
    observations: list[Observation] = []
    current: TimePoint | None = None
    header: TimePoint | None = None

    for lineno, line in enumerate(doc.lines, start=1):
        try:
            found = parse_timestamp(line, date_order)
        except NoTimestamp:
            found = None
        if found is not None:
            current = found
            if header is None:
                header = found
        match, warning = _scan_line(line, lexicon)
        if warning:
            warnings.append(f"{doc.report_id}:{lineno}: {warning}")
        if match is None:
            continue
        if current is None:
            pending.append((lineno, match))
        else:
            observations.append(_to_observation(match, current, doc.report_id))

    if pending:
        if header is None:
            raise NoTimestampInDocument(
                f"report {doc.report_id} has measurements but no parseable timestamp"
            )
        backfilled = [_to_observation(m, header, doc.report_id) for _, m in pending]
        observations = backfilled + observations
    elif observations and header is None:  # pragma: no cover - unreachable by construction
        raise NoTimestampInDocument(doc.report_id)
    return observations, warnings


def _extract_csv(doc, lexicon, date_order):
    rows = list(csv.reader(doc.lines))
    warnings: list[str] = []
    observations: list[Observation] = []
    if not rows:
        return observations, warnings
    header = [cell.strip().lower() for cell in rows[0]]
    if header != ["date", "metric", "value", "unit"]:
        warnings.append(f"{doc.report_id}:1: expected CSV header 'date,metric,value,unit'")
        return observations, warnings
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 4:
            warnings.append(f"{doc.report_id}:{lineno}: expected 4 fields, got {len(row)}")
            continue
        obs, warning = _explicit_row(row, lexicon, date_order, doc.report_id)
        if warning:
            warnings.append(f"{doc.report_id}:{lineno}: {warning}")
        if obs is not None:
            observations.append(obs)
    return observations, warnings


def _extract_records(doc, lexicon, date_order):
    """Pipe-delimited record format: date|metric|value|unit per line."""
    warnings: list[str] = []
    observations: list[Observation] = []
    for lineno, line in enumerate(doc.lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = [f.strip() for f in stripped.split("|")]
        if len(fields) != 4:
            warnings.append(f"{doc.report_id}:{lineno}: expected 4 pipe-delimited fields")
            continue
        obs, warning = _explicit_row(fields, lexicon, date_order, doc.report_id)
        if warning:
            warnings.append(f"{doc.report_id}:{lineno}: {warning}")
        if obs is not None:
            observations.append(obs)
    return observations, warnings


def _explicit_row(fields, lexicon, date_order, report_id):
    """Shared row logic for formats carrying explicit date/metric/value/unit."""
    raw_date, raw_metric, raw_value, raw_unit = (f.strip() for f in fields)
    try:
        time = parse_timestamp(raw_date, date_order)
    except NoTimestamp:
        return None, f"unparseable date {raw_date!r}"
    entry = lexicon.entry_for(raw_metric)
    if entry is None:
        return None, f"unknown metric {raw_metric!r}"
    if not _NUMBER_RE.fullmatch(raw_value):
        return None, f"malformed value {raw_value!r} for metric {entry.canonical!r}"
    value = float(raw_value)
    unit = ""
    mismatch = False
    if raw_unit:
        unit, mismatch = _resolve_unit([raw_unit], entry)
    warning = None
    if mismatch:
        warning = (
            f"unexpected unit {raw_unit!r} for {entry.canonical!r}; expected one of "
            f"{', '.join(entry.units)}"
        )
    match = _LineMatch(entry.canonical, value, unit, mismatch, entry)
    return _to_observation(match, time, report_id), warning


def _to_observation(match: _LineMatch, time: TimePoint, report_id: str) -> Observation:
    flags = set()
    if match.unit_mismatch:
        flags.add(FLAG_UNIT_MISMATCH)
    rng = match.entry.reference_range
    if rng is not None and not rng.contains(match.value):
        flags.add(FLAG_OUT_OF_RANGE)
    return Observation(
        metric=match.metric,
        value=match.value,
        unit=match.unit,
        time=time,
        source=report_id,
        flags=frozenset(flags),
    )


# --- lexicon file grammar ---
#
#   canonical|alias1,alias2|unit1,unit2|low..high
#
# One entry per line; trailing fields may be empty; blank lines and
# #-comments are skipped.


def load_lexicon(path: str | Path) -> MetricLexicon:
    """Parse a lexicon file. Raises InvalidLexicon on any grammar violation."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidLexicon(f"cannot read lexicon file {path}: {exc}") from exc
    entries: list[LexiconEntry] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split("|")
        if len(parts) != 4:
            raise InvalidLexicon(f"{path.name}:{lineno}: expected 4 pipe-delimited fields")
        canonical = parts[0].strip()
        aliases = tuple(a.strip() for a in parts[1].split(",") if a.strip())
        units = tuple(u.strip() for u in parts[2].split(",") if u.strip())
        range_text = parts[3].strip()
        reference_range = None
        if range_text:
            reference_range = _parse_range(range_text, units, f"{path.name}:{lineno}")
        entries.append(LexiconEntry(canonical, aliases, units, reference_range))
    return MetricLexicon(entries)


def _parse_range(text: str, units: tuple[str, ...], where: str) -> RefRange:
    low_text, sep, high_text = text.partition("..")
    if not sep or not _NUMBER_RE.fullmatch(low_text) or not _NUMBER_RE.fullmatch(high_text):
        raise InvalidLexicon(f"{where}: reference range must be 'low..high', got {text!r}")
    low, high = float(low_text), float(high_text)
    if not low < high:
        raise InvalidLexicon(f"{where}: reference range requires low < high, got {text!r}")
    return RefRange(low, high, units[0] if units else "")

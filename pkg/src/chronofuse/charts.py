"""Chart construction: normalized series and renderer-independent specs.

Covers single and compound line charts plus the two radial forms (closed
polygon and bar ring). Time is encoded on the x axis or the angle, value
on the y axis or the radius; low values sit near the origin and high
values near the periphery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import (
    DegenerateRange,
    DegenerateValueRange,
    EmptySelection,
    MalformedStore,
    MissingRange,
    TooFewSlices,
    UnknownMetric,
)
from .ingest import RefRange, TimePoint
from .temporal import Aggregator, TemporalTable, aggregate_cell, slice_range

__all__ = [
    "ChartKind",
    "Normalization",
    "Series",
    "Segment",
    "ChartSpec",
    "RefRange",
    "normalize_series",
    "line_segments",
    "build_line_chart",
    "build_radial_chart",
    "build_radial_bar_chart",
    "radial_point",
    "radial_bar_slots",
    "spec_to_text",
    "spec_from_text",
]

CHART_MAGIC = "chronofuse-chart"
CHART_VERSION = 1


class ChartKind(str, Enum):
    LINE = "line"
    COMPOUND_LINE = "compound_line"
    RADIAL_LINE = "radial_line"
    RADIAL_BAR = "radial_bar"


class Normalization(str, Enum):
    REFERENCE_RANGE = "reference_range"
    MIN_MAX = "min_max"
    NONE = "none"


@dataclass(frozen=True)
class Series:
    """One metric's points, already normalized for plotting.

    Points are (t, v) with strictly increasing t; out_of_range holds the
    indices whose normalized value left [0, 1] (never clamped, so
    clinical excursions stay visible to renderers).
    """

    metric: str
    points: tuple[tuple[float, float], ...]
    normalization: Normalization = Normalization.NONE
    out_of_range: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        ts = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"series {self.metric!r} has non-increasing t values")
        if any(not math.isfinite(v) for _, v in self.points):
            raise ValueError(f"series {self.metric!r} has non-finite values")


@dataclass(frozen=True)
class Segment:
    """One line piece between consecutive points, as y = slope * t + intercept."""

    slope: float
    intercept: float
    p_start: tuple[float, float]
    p_end: tuple[float, float]


@dataclass(frozen=True)
class ChartSpec:
    """Renderer-independent description of one chart."""

    kind: ChartKind
    series: tuple[Series, ...]
    time_range: tuple[str, str]
    slot_labels: tuple[str, ...]
    palette: tuple[int, ...]
    angular_slots: int | None = None

    def __post_init__(self):
        if not self.series:
            raise ValueError("a chart needs at least one series")
        if len(set(self.palette)) != len(self.palette):
            raise ValueError("palette indices must be distinct")
        if self.kind in (ChartKind.RADIAL_LINE, ChartKind.RADIAL_BAR) and not self.angular_slots:
            raise ValueError("radial charts need angular_slots")


def normalize_series(
    raw: Sequence[tuple[float, float]],
    ref_range: RefRange | None = None,
    mode: Normalization = Normalization.NONE,
    metric: str = "",
) -> Series:
    """Normalize raw (t, v) points into a Series.

    reference_range maps low -> 0 and high -> 1 exactly and never clamps;
    indices landing outside [0, 1] are recorded. min_max maps the series
    min -> 0 and max -> 1 (a constant series maps to 0.5). none passes
    values through.
    """
    if mode is Normalization.REFERENCE_RANGE:
        if ref_range is None:
            raise MissingRange(f"reference_range normalization needs a range for {metric or 'series'}")
        if ref_range.high == ref_range.low:
            raise DegenerateRange(f"reference range for {metric or 'series'} has low == high")
        span = ref_range.high - ref_range.low
        points = tuple((t, (v - ref_range.low) / span) for t, v in raw)
        outside = frozenset(i for i, (_, v) in enumerate(points) if v < 0.0 or v > 1.0)
        return Series(metric, points, mode, outside)
    if mode is Normalization.MIN_MAX:
        values = [v for _, v in raw]
        lo, hi = min(values), max(values)
        if hi == lo:
            points = tuple((t, 0.5) for t, _ in raw)
        else:
            span = hi - lo
            points = tuple((t, (v - lo) / span) for t, v in raw)
        return Series(metric, points, mode, frozenset())
    return Series(metric, tuple((t, v) for t, v in raw), Normalization.NONE, frozenset())


def line_segments(series: Series) -> list[Segment]:
    """Split a series into its per-pair line pieces.

    Each consecutive point pair yields one independent segment, so a
    series of n points gives exactly n - 1 segments and editing one point
    only disturbs its adjacent pieces.
    """
    segments = []
    for (t0, v0), (t1, v1) in zip(series.points, series.points[1:]):
        slope = (v1 - v0) / (t1 - t0)
        intercept = v0 - slope * t0
        segments.append(Segment(slope, intercept, (t0, v0), (t1, v1)))
    return segments


def radial_point(
    i: int,
    n: int,
    value: float,
    vmin: float,
    vmax: float,
    r_inner: float,
    r_outer: float,
) -> tuple[float, float]:
    """Place slot i of n on the circle: returns (angle, radius).

    The angle is 2*pi*i/n, measured clockwise from 12 o'clock. The radius
    interpolates r_inner..r_outer so vmin sits at the inner ring and vmax
    at the periphery, exactly at both bounds and unclamped in between.
    """
    if not 0 <= i < n:
        raise ValueError(f"slot index {i} outside 0..{n - 1}")
    if vmin == vmax:
        raise DegenerateValueRange("radial placement needs vmin < vmax")
    if not 0 <= r_inner < r_outer:
        raise ValueError("radii must satisfy 0 <= r_inner < r_outer")
    angle = 2.0 * math.pi * i / n
    u = (value - vmin) / (vmax - vmin)
    radius = r_inner * (1.0 - u) + r_outer * u
    return angle, radius


# Bars keep a fixed 0.02 rad gap between neighbors; when slots get so
# narrow that the gap would eat half the pitch, the gap shrinks with it.
BAR_GAP_RAD = 0.02


def radial_bar_slots(n_slices: int, n_series: int) -> list[tuple[float, float]]:
    """Angular (start, width) of every bar, slice-major then series.

    The pitch between consecutive bars is 2*pi / (n_slices * n_series);
    each bar's width is the pitch minus the fixed gap.
    """
    total = n_slices * n_series
    if total < 1:
        raise ValueError("need at least one bar slot")
    pitch = 2.0 * math.pi / total
    gap = min(BAR_GAP_RAD, pitch / 2.0)
    return [(k * pitch + gap / 2.0, pitch - gap) for k in range(total)]


def build_line_chart(
    table: TemporalTable,
    metrics: Sequence[str] | None = None,
    time_range: tuple[TimePoint, TimePoint] | None = None,
    aggregator: Aggregator = Aggregator.MEAN,
    normalization: Normalization = Normalization.MIN_MAX,
) -> ChartSpec:
    """Build a line chart spec (compound when more than one metric).

    x positions are row indices of the sliced table; cells with several
    entries collapse through the aggregator before normalization.
    """
    selection = _select(table, metrics, time_range)
    series, palette = _build_series(selection, aggregator, normalization)
    kind = ChartKind.LINE if len(series) == 1 else ChartKind.COMPOUND_LINE
    return ChartSpec(
        kind=kind,
        series=series,
        time_range=selection.range_iso,
        slot_labels=selection.labels,
        palette=palette,
    )


def build_radial_chart(
    table: TemporalTable,
    metrics: Sequence[str] | None = None,
    time_range: tuple[TimePoint, TimePoint] | None = None,
    aggregator: Aggregator = Aggregator.MEAN,
    normalization: Normalization = Normalization.MIN_MAX,
) -> ChartSpec:
    """Build a closed radial line chart: one polygon vertex per slice."""
    selection = _select(table, metrics, time_range)
    if len(selection.slices) < 3:
        raise TooFewSlices(
            f"radial line charts need at least 3 slices, selection has {len(selection.slices)}"
        )
    series, palette = _build_series(selection, aggregator, normalization)
    return ChartSpec(
        kind=ChartKind.RADIAL_LINE,
        series=series,
        time_range=selection.range_iso,
        slot_labels=selection.labels,
        palette=palette,
        angular_slots=len(selection.slices),
    )


def build_radial_bar_chart(
    table: TemporalTable,
    metrics: Sequence[str] | None = None,
    time_range: tuple[TimePoint, TimePoint] | None = None,
    aggregator: Aggregator = Aggregator.MEAN,
    normalization: Normalization = Normalization.MIN_MAX,
) -> ChartSpec:
    """Build a radial bar chart: one bar per (metric, slice)."""
    selection = _select(table, metrics, time_range)
    series, palette = _build_series(selection, aggregator, normalization)
    return ChartSpec(
        kind=ChartKind.RADIAL_BAR,
        series=series,
        time_range=selection.range_iso,
        slot_labels=selection.labels,
        palette=palette,
        angular_slots=len(selection.slices),
    )


@dataclass
class _Selection:
    table: TemporalTable
    metrics: list[str]
    slices: list
    labels: tuple[str, ...]
    range_iso: tuple[str, str]


def _select(table, metrics, time_range) -> _Selection:
    known = set(table.metrics)
    # series come out in metric-name order (column order), deduplicated
    requested = sorted(set(metrics)) if metrics else sorted(known)
    for metric in requested:
        if metric not in known:
            raise UnknownMetric(f"metric {metric!r} has no column in the table")
    view = table
    if time_range is not None:
        view = slice_range(table, time_range[0], time_range[1])
    slices = list(view.rows)
    if not slices:
        raise EmptySelection("no cells fall inside the requested time range")
    labels = tuple(ts.start_date.isoformat() for ts in slices)
    return _Selection(view, requested, slices, labels, (labels[0], labels[-1]))


def _build_series(selection, aggregator, normalization):
    series = []
    for metric in selection.metrics:
        raw = []
        for index, ts in enumerate(selection.slices):
            cell = selection.table.rows[ts].get(metric)
            if cell is not None:
                raw.append((float(index), aggregate_cell(cell, aggregator)))
        if not raw:
            raise EmptySelection(f"metric {metric!r} has no cells in the requested range")
        column = selection.table.column_for(metric)
        ref = column.reference_range if column is not None else None
        series.append(normalize_series(raw, ref, normalization, metric=metric))
    # Distinct indices per series; renderers cycle them through the 8 colors.
    return tuple(series), tuple(range(len(series)))


# --- textual serialization (documented field order, diffable goldens) ---


def spec_to_text(spec: ChartSpec) -> str:
    """Serialize a ChartSpec to its line-oriented text form."""
    lines = [
        f"{CHART_MAGIC} {CHART_VERSION}",
        f"kind {spec.kind.value}",
        f"time_range {spec.time_range[0]}..{spec.time_range[1]}",
        f"slots {spec.angular_slots if spec.angular_slots is not None else 0}",
        "labels " + ",".join(spec.slot_labels),
        "palette " + ",".join(str(i) for i in spec.palette),
        f"series {len(spec.series)}",
    ]
    for s in spec.series:
        outside = ",".join(str(i) for i in sorted(s.out_of_range))
        points = " ".join(f"{t!r}:{v!r}" for t, v in s.points)
        lines.append(f"s {s.metric}|{s.normalization.value}|{outside}|{points}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def spec_from_text(text: str) -> ChartSpec:
    """Parse the output of spec_to_text. Raises MalformedStore on bad input."""
    lines = text.splitlines()

    def take(prefix: str) -> str:
        if not lines:
            raise MalformedStore("chart spec text is truncated")
        line = lines.pop(0)
        if not line.startswith(prefix + " "):
            raise MalformedStore(f"expected {prefix!r} record, got {line!r}")
        return line[len(prefix) + 1:]

    magic = lines.pop(0) if lines else ""
    if magic != f"{CHART_MAGIC} {CHART_VERSION}":
        raise MalformedStore(f"not a chronofuse chart spec: {magic!r}")
    kind = ChartKind(take("kind"))
    start, _, end = take("time_range").partition("..")
    slots = int(take("slots"))
    labels = tuple(x for x in take("labels").split(",") if x)
    palette = tuple(int(x) for x in take("palette").split(",") if x)
    count = int(take("series"))
    series = []
    for _ in range(count):
        body = take("s")
        metric, norm_text, outside_text, points_text = body.split("|")
        points = tuple(
            (float(p.split(":")[0]), float(p.split(":")[1])) for p in points_text.split() if p
        )
        series.append(
            Series(
                metric=metric,
                points=points,
                normalization=Normalization(norm_text),
                out_of_range=frozenset(int(i) for i in outside_text.split(",") if i),
            )
        )
    if not lines or lines.pop(0) != "end":
        raise MalformedStore("chart spec text is truncated (missing end)")
    return ChartSpec(
        kind=kind,
        series=tuple(series),
        time_range=(start, end),
        slot_labels=labels,
        palette=palette,
        angular_slots=slots or None,
    )

"""Time points and closed intervals with a canonical textual rendering.

Every value is a closed interval [start, end] in UTC; an instant is the
degenerate case start == end. The canonical rendering keys Time nodes,
so "2000-01-01", "2000-01-01T00:00:00Z" and the degenerate interval
"2000-01-01/2000-01-01" all resolve to the same node.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import InvalidTimeError


def _parse_point(text: str) -> datetime:
    text = text.strip()
    if not text:
        raise InvalidTimeError("empty time point")
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise InvalidTimeError(f"unparseable time point: {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _render_point(dt: datetime) -> str:
    # strftime leaves years < 1000 unpadded, which would not re-parse
    date = f"{dt.year:04d}-{dt.month:02d}-{dt.day:02d}"
    if dt.hour == 0 and dt.minute == 0 and dt.second == 0 and dt.microsecond == 0:
        return date
    clock = f"{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d}"
    if dt.microsecond:
        clock += f".{dt.microsecond:06d}"
    return f"{date}T{clock}Z"


@dataclass(frozen=True, slots=True, order=True)
class TimeValue:
    """A UTC instant or closed interval, ordered by (start, end)."""

    start: datetime
    end: datetime

    def __post_init__(self):
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise InvalidTimeError("time values must be timezone-aware")
        if self.start > self.end:
            raise InvalidTimeError(
                f"inverted interval: {_render_point(self.start)} > {_render_point(self.end)}"
            )

    @classmethod
    def instant(cls, point: datetime | str) -> "TimeValue":
        dt = _parse_point(point) if isinstance(point, str) else point.astimezone(timezone.utc)
        return cls(dt, dt)

    @classmethod
    def interval(cls, start: datetime | str, end: datetime | str) -> "TimeValue":
        a = _parse_point(start) if isinstance(start, str) else start.astimezone(timezone.utc)
        b = _parse_point(end) if isinstance(end, str) else end.astimezone(timezone.utc)
        return cls(a, b)

    @classmethod
    def parse(cls, text: str) -> "TimeValue":
        """Parse `point` or `start/end` ISO-8601 text."""
        if "/" in text:
            head, _, tail = text.partition("/")
            return cls.interval(head, tail)
        return cls.instant(text)

    @property
    def is_instant(self) -> bool:
        return self.start == self.end

    def render(self) -> str:
        if self.is_instant:
            return _render_point(self.start)
        return f"{_render_point(self.start)}/{_render_point(self.end)}"

    def covers(self, other: "TimeValue") -> bool:
        return self.start <= other.start and other.end <= self.end

    def intersects(self, other: "TimeValue") -> bool:
        return self.start <= other.end and other.start <= self.end

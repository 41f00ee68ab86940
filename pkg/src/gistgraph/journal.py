"""Append-only log framing and snapshot files.

Log layout: the magic line `DGMM1`, one header frame (creation metadata plus
the schema document), then one frame per committed batch. Every frame is
`u32 payload length | u32 CRC-32 | payload`. Record payloads are canonical
JSON (sorted keys, no whitespace), so identical logical batches always frame
to identical bytes.

Record kinds: `ING` (one gist batch) and `CSL` (one consolidation merge).
Records carry their resulting version; versions are dense, so record N in
the log produces version N.

A complete frame with a bad checksum is corruption. An incomplete frame at
the very end of the file is an interrupted append; reads recover to the last
valid record and flag it.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

from .errors import CorruptLogError, GistGraphError

MAGIC = b"DGMM1\n"
_FRAME_HEADER = struct.Struct(">II")
LOG_FILENAME = "memory.log"
SNAPSHOT_DIRNAME = "snapshots"


@dataclass(frozen=True, slots=True)
class Record:
    kind: str
    version: int
    body: dict

    def to_payload(self) -> bytes:
        obj = {"kind": self.kind, "version": self.version, **self.body}
        return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_payload(cls, payload: bytes) -> "Record":
        obj = json.loads(payload.decode("utf-8"))
        kind = obj.pop("kind")
        version = obj.pop("version")
        return cls(kind=kind, version=version, body=obj)


def frame(payload: bytes) -> bytes:
    return _FRAME_HEADER.pack(len(payload), zlib.crc32(payload)) + payload


def _read_frames(data: bytes, start: int):
    """Yield (offset, payload) frames; raises on checksum failure.

    Stops silently at a truncated trailing frame, reporting it through the
    generator's return value (True if truncated).
    """
    offset = start
    index = 0
    while offset < len(data):
        if offset + _FRAME_HEADER.size > len(data):
            return True
        length, checksum = _FRAME_HEADER.unpack_from(data, offset)
        payload_start = offset + _FRAME_HEADER.size
        if payload_start + length > len(data):
            return True
        payload = data[payload_start:payload_start + length]
        index += 1
        if zlib.crc32(payload) != checksum:
            raise CorruptLogError(
                f"checksum failure in record {index} at byte offset {offset}",
                record_index=index,
                byte_offset=offset,
            )
        yield offset, payload
        offset = payload_start + length
    return False


@dataclass
class LogContents:
    header_text: str
    records: list[Record]
    recovered_tail: bool
    valid_end: int  # byte offset just past the last intact frame


def read_log(path: Path) -> LogContents:
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise CorruptLogError(f"not a memory log (bad magic): {path}")
    frames = _read_frames(data, len(MAGIC))
    header_text: str | None = None
    records: list[Record] = []
    recovered = False
    valid_end = len(MAGIC)
    while True:
        try:
            offset, payload = next(frames)
        except StopIteration as stop:
            recovered = bool(stop.value)
            break
        valid_end = offset + _FRAME_HEADER.size + len(payload)
        if header_text is None:
            header_text = payload.decode("utf-8")
        else:
            records.append(Record.from_payload(payload))
    if header_text is None:
        raise CorruptLogError(f"log has no header frame: {path}")
    for i, record in enumerate(records, start=1):
        if record.version != i:
            raise CorruptLogError(
                f"record {i} carries version {record.version}", record_index=i
            )
    return LogContents(header_text, records, recovered, valid_end)


class LogWriter:
    """Appends frames to a log file, flushing after every record."""

    def __init__(self, path: Path):
        self._path = path
        self._fh = None

    @classmethod
    def create(cls, path: Path, header_text: str) -> "LogWriter":
        if path.exists():
            raise GistGraphError(f"log already exists: {path}")
        writer = cls(path)
        writer._fh = open(path, "xb")
        writer._fh.write(MAGIC)
        writer._fh.write(frame(header_text.encode("utf-8")))
        writer._fh.flush()
        return writer

    @classmethod
    def open_existing(cls, path: Path) -> "LogWriter":
        writer = cls(path)
        writer._fh = open(path, "ab")
        return writer

    def append(self, record: Record) -> None:
        self._fh.write(frame(record.to_payload()))
        self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def snapshot_path(directory: Path, version: int) -> Path:
    return directory / SNAPSHOT_DIRNAME / f"snap-{version:09d}.txt"


def write_snapshot_file(directory: Path, version: int, canonical_lines: list[str]) -> Path:
    path = snapshot_path(directory, version)
    path.parent.mkdir(exist_ok=True)
    body = "\n".join(canonical_lines) + "\n"
    digest = zlib.crc32(body.encode("utf-8"))
    path.write_text(body + f"CRC32 {digest}\n", encoding="utf-8")
    return path


def load_latest_snapshot(directory: Path, max_version: int) -> tuple[int, list[str]] | None:
    """Newest verifiable snapshot at or below max_version, or None."""
    snap_dir = directory / SNAPSHOT_DIRNAME
    if not snap_dir.is_dir():
        return None
    candidates = sorted(snap_dir.glob("snap-*.txt"), reverse=True)
    for path in candidates:
        try:
            version = int(path.stem.split("-")[1])
        except (IndexError, ValueError):
            continue
        if version > max_version:
            continue
        text = path.read_text(encoding="utf-8")
        body, _, tail = text.rpartition("CRC32 ")
        if not body or not tail.strip().isdigit():
            continue
        if zlib.crc32(body.encode("utf-8")) != int(tail.strip()):
            continue
        return version, body.splitlines()
    return None

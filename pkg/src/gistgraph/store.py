"""The persistent store: a memory graph bound to its append-only log.

Commit discipline is write-ahead: a batch record is framed and flushed to
the log, then applied to the in-memory graph through the same `apply_record`
path replay uses. One commit per batch, one version tick per commit.

Single-writer, multiple-reader: a store directory admits one writable handle
at a time (lock file); any number of read-only handles may replay the
committed prefix concurrently. In-process, a re-entrant mutex serializes
batch commits, and readers take it only for the brief structural scan so
they never observe a half-applied batch.
"""

from __future__ import annotations

import logging
import os
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from filelock import FileLock, Timeout

from .errors import GistGraphError, StoreBusyError, VersionRangeError
from .graph import MemoryGraph
from .journal import (
    LOG_FILENAME,
    LogWriter,
    Record,
    load_latest_snapshot,
    read_log,
    write_snapshot_file,
)
from .schema import Schema, build_default_schema

logger = logging.getLogger("gistgraph")

_HEADER_SEPARATOR = "---"
DEFAULT_SNAPSHOT_INTERVAL = 1000


def _compose_header(schema: Schema, created: str) -> str:
    return "\n".join(["format 1", f"created {created}", _HEADER_SEPARATOR, schema.to_document()])


def _parse_header(text: str) -> Schema:
    lines = text.splitlines()
    try:
        split = lines.index(_HEADER_SEPARATOR)
    except ValueError:
        raise GistGraphError("store header missing schema document") from None
    return Schema.from_document("\n".join(lines[split + 1:]))


class MemoryStore:
    """Handle over one memory graph and its journal.

    Use `MemoryStore.create()` for a fresh store (pass a directory for a
    durable one, or nothing for in-memory) and `MemoryStore.open()` for an
    existing directory.
    """

    def __init__(self, schema: Schema, *, directory: Path | None = None,
                 writer: LogWriter | None = None, lock: FileLock | None = None,
                 records: list[Record] | None = None, graph: MemoryGraph | None = None,
                 snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL,
                 recovered_tail: bool = False):
        self.schema = schema
        self._directory = directory
        self._writer = writer
        self._lock = lock
        self._records: list[Record] = records if records is not None else []
        self._graph = graph if graph is not None else MemoryGraph(schema)
        self._snapshot_interval = snapshot_interval
        self.recovered_tail = recovered_tail
        self.mutex = threading.RLock()

    # -- lifecycle -----------------------------------------------------------

    @classmethod
    def create(cls, directory: str | Path | None = None, *,
               schema: Schema | None = None,
               dimensions: Iterable[tuple[str, str]] = (),
               snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL,
               lock_timeout: float = 2.0) -> "MemoryStore":
        if schema is None:
            schema = build_default_schema(dimensions)
        elif tuple(dimensions):
            raise GistGraphError("pass either a schema or dimensions, not both")
        if directory is None:
            return cls(schema, snapshot_interval=snapshot_interval)
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        log_path = directory / LOG_FILENAME
        if log_path.exists():
            raise GistGraphError(f"store already initialized: {directory}")
        lock = _acquire_lock(directory, lock_timeout)
        created = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        writer = LogWriter.create(log_path, _compose_header(schema, created))
        return cls(schema, directory=directory, writer=writer, lock=lock,
                   snapshot_interval=snapshot_interval)

    @classmethod
    def open(cls, directory: str | Path, *, writable: bool = False,
             snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL,
             lock_timeout: float = 2.0) -> "MemoryStore":
        directory = Path(directory)
        log_path = directory / LOG_FILENAME
        if not log_path.exists():
            raise GistGraphError(f"no store at {directory}")
        contents = read_log(log_path)
        schema = _parse_header(contents.header_text)
        if contents.recovered_tail:
            logger.warning("recovered to last valid record; discarding truncated tail of %s", log_path)

        graph = None
        applied_from = 0
        snap = load_latest_snapshot(directory, len(contents.records))
        if snap is not None:
            snap_version, lines = snap
            graph = MemoryGraph.from_canonical_lines(schema, lines)
            applied_from = snap_version
        if graph is None:
            graph = MemoryGraph(schema)
        for record in contents.records[applied_from:]:
            graph.apply_record(record)

        writer = None
        lock = None
        if writable:
            lock = _acquire_lock(directory, lock_timeout)
            if contents.recovered_tail:
                with open(log_path, "r+b") as fh:
                    fh.truncate(contents.valid_end)
            writer = LogWriter.open_existing(log_path)
        return cls(schema, directory=directory, writer=writer, lock=lock,
                   records=contents.records, graph=graph,
                   snapshot_interval=snapshot_interval,
                   recovered_tail=contents.recovered_tail)

    def close(self) -> None:
        if self._writer is not None:
            self._writer.close()
            self._writer = None
        if self._lock is not None:
            self._lock.release()
            self._lock = None

    def __enter__(self) -> "MemoryStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- state ----------------------------------------------------------------

    @property
    def graph(self) -> MemoryGraph:
        return self._graph

    @property
    def version(self) -> int:
        return self._graph.version

    @property
    def directory(self) -> Path | None:
        return self._directory

    @property
    def writable(self) -> bool:
        return self._directory is None or self._writer is not None

    def records(self) -> Sequence[Record]:
        return tuple(self._records)

    def content_digest(self) -> str:
        return self._graph.content_digest()

    # -- commit and time travel -------------------------------------------------

    def commit(self, kind: str, body: dict) -> Record:
        """Durably append one batch, then apply it. Returns the record."""
        with self.mutex:
            if not self.writable:
                raise GistGraphError("store opened read-only")
            record = Record(kind=kind, version=self._graph.version + 1, body=body)
            if self._writer is not None:
                self._writer.append(record)
            self._graph.apply_record(record)
            self._records.append(record)
            if (self._directory is not None and self._snapshot_interval > 0
                    and record.version % self._snapshot_interval == 0):
                write_snapshot_file(self._directory, record.version, self._graph.canonical_lines())
            return record

    def snapshot(self, at_version: int) -> MemoryGraph:
        """Reconstruct the read-only memory state as of a committed version."""
        with self.mutex:
            current = self._graph.version
            prefix = self._records[:at_version]
        if at_version < 0 or at_version > current:
            raise VersionRangeError(f"version {at_version} outside [0, {current}]")
        graph = MemoryGraph(self.schema)
        for record in prefix:
            graph.apply_record(record)
        return graph


def _acquire_lock(directory: Path, timeout: float) -> FileLock:
    lock = FileLock(os.fspath(directory / "lock"))
    try:
        lock.acquire(timeout=timeout)
    except Timeout:
        raise StoreBusyError(
            f"another writer holds {directory}; retry once it finishes"
        ) from None
    return lock


def replay(log_path: str | Path) -> MemoryGraph:
    """Deterministically reconstruct a graph from a log file alone."""
    contents = read_log(Path(log_path))
    schema = _parse_header(contents.header_text)
    graph = MemoryGraph(schema)
    for record in contents.records:
        graph.apply_record(record)
    return graph

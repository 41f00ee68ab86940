"""Exception types shared across the engine."""


class GistGraphError(Exception):
    """Base class for all engine errors."""


class SchemaViolationError(GistGraphError):
    """A tag, node, or relation violates the fixed relational grammar."""


class InvalidNameError(GistGraphError):
    """A node name is empty after canonicalization."""


class InvalidTimeError(GistGraphError):
    """A time value is malformed: bad syntax or an inverted interval."""


class InvalidGistError(GistGraphError):
    """A gist fails its structural invariants."""


class InvalidCueError(GistGraphError):
    """A recall cue carries no usable condition."""


class VersionRangeError(GistGraphError):
    """A requested version lies outside the store's committed range."""


class ConsolidationError(GistGraphError):
    """A merge precondition does not hold (unequal element signatures)."""


class NotRecalledError(GistGraphError):
    """The referenced node is not part of the recalled subgraph."""


class IncomparableError(GistGraphError):
    """Two recall or embedding artifacts cannot be compared."""


class DomainRestrictionError(GistGraphError):
    """Divergence requested over subgraphs recalled under different cues."""


class InvalidParametersError(GistGraphError):
    """Embedding or surprise parameters are out of range."""


class StoreBusyError(GistGraphError):
    """Another process holds the store's writer lock."""


class CorruptLogError(GistGraphError):
    """A log record failed its checksum.

    Carries the index and byte offset of the first bad record.
    """

    def __init__(self, message: str, *, record_index: int | None = None,
                 byte_offset: int | None = None):
        super().__init__(message)
        self.record_index = record_index
        self.byte_offset = byte_offset

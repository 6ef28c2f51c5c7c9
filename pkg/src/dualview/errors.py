"""Exception types shared across the pipeline."""


class DualviewError(Exception):
    """Base class for all pipeline errors."""


class ParseError(DualviewError):
    """Malformed input: bad JSON line, bad run line, undecodable agent output."""


class IntegrityError(DualviewError):
    """Data violates a declared invariant (duplicate ids, rank gaps, ...)."""


class FormatError(DualviewError):
    """Binary vector-store file is corrupt or has the wrong layout."""


class TransportError(DualviewError):
    """An HTTP agent or encoder endpoint could not be reached or answered badly."""

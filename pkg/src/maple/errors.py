"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class MapleError(Exception):
    """Base class for every error raised by this package."""


class ParseError(MapleError):
    """Malformed wire text: markdown tables or agent responses."""


class SchemaError(MapleError):
    """A typed container was handed a payload of the wrong kind."""


class TransportError(MapleError):
    """Retryable backend failure (network, timeout, 5xx)."""


class BackendError(MapleError):
    """Non-retryable backend failure; carries the provider message."""


class ReplayMiss(MapleError):
    """Replay backend had no stored response for (role, index)."""


class StoreError(MapleError):
    """Long-term memory store violation (unknown ids, bad state)."""


class FormatError(MapleError):
    """Unreadable persisted artifact: store files, dataset files."""


class ConfigError(MapleError):
    """Invalid run configuration."""

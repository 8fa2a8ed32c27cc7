"""Exception hierarchy shared across the package.

Errors are split by who gets to fix them: InputError/DomainError point at the
caller, FormatError/StateError/StorageError at files on disk, and the
BackendError family at the sample source behind the run.
"""

from __future__ import annotations


class OrigenError(Exception):
    """Base class for all package errors."""


class InputError(OrigenError):
    """Invalid argument: dimension mismatch, empty batch, unknown name."""


class DomainError(OrigenError):
    """Operation undefined on this input (zero norm, n < 2, ...)."""


class FormatError(OrigenError):
    """A file does not parse per its format contract."""

    def __init__(self, message: str, *, line: int | None = None):
        super().__init__(message)
        self.line = line


class StateError(OrigenError):
    """Operation on an object in the wrong state (e.g. closed manifest)."""


class StorageError(OrigenError):
    """Durable write failed; the owning run is marked dirty."""


class BackendError(OrigenError):
    """Failure inside a sample source, with run-position context."""

    def __init__(self, message: str, *, batch_index: int | None = None,
                 sample_index: int | None = None):
        super().__init__(message)
        self.batch_index = batch_index
        self.sample_index = sample_index


class TransportError(BackendError):
    """Network-level failure; carries how many attempts were made."""

    def __init__(self, message: str, *, attempts: int = 1, **kw):
        super().__init__(message, **kw)
        self.attempts = attempts


class ProtocolError(BackendError):
    """Backend answered, but outside the wire contract. Never retried."""


class ContractViolationError(BackendError):
    """Backend response contradicts its own capability descriptor."""


class StreamInterrupted(BackendError):
    """A multi-batch stream died mid-way; completed work is preserved."""

    def __init__(self, message: str, *, completed_batches: int, **kw):
        super().__init__(message, **kw)
        self.completed_batches = completed_batches

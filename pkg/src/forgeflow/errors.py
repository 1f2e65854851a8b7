"""Exception hierarchy for the engine.

Every error a caller can meaningfully handle has its own class; the CLI and
server map them onto exit codes / HTTP status codes.
"""

from __future__ import annotations


class ForgeflowError(Exception):
    """Base class for all engine errors."""


class IllegalTransition(ForgeflowError):
    """A (state, event) pair absent from the lifecycle transition table."""

    def __init__(self, state, event):
        super().__init__(f"illegal transition: {state} + {event}")
        self.state = state
        self.event = event


class InvalidDescriptor(ForgeflowError):
    pass


class UnknownType(ForgeflowError):
    pass


class InvalidProject(ForgeflowError):
    pass


class UnknownItem(ForgeflowError):
    pass


class WrongState(ForgeflowError):
    pass


class UnknownAction(ForgeflowError):
    pass


class UnknownEntry(ForgeflowError):
    pass


class PathEscape(ForgeflowError):
    pass


class IoFailure(ForgeflowError):
    pass


class SerializationFailure(ForgeflowError):
    pass


class UnknownConnector(ForgeflowError):
    pass


class UnknownJob(ForgeflowError):
    pass


class MissingInput(ForgeflowError):
    pass


class TransportFailure(ForgeflowError):
    pass


class SpawnFailure(ForgeflowError):
    pass


class ActionFailure(ForgeflowError):
    """Raised by an action run to signal a failed (not buggy) execution."""


class UnknownPlaceholder(ForgeflowError):
    pass


class MalformedCsv(ForgeflowError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DuplicateDest(ForgeflowError):
    pass


class AlreadyExists(ForgeflowError):
    pass


class InvalidName(ForgeflowError):
    pass

"""Human-in-the-loop workflow engine for modeling-and-simulation tasks."""

from .engine import Engine, ProcessTicket
from .model import (
    Entry,
    EntryGroup,
    EntryKind,
    Form,
    FormStatus,
    ItemDescriptor,
    ItemRecord,
    ItemState,
    LifecycleEvent,
    PipelineStep,
)

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "ProcessTicket",
    "Entry",
    "EntryGroup",
    "EntryKind",
    "Form",
    "FormStatus",
    "ItemDescriptor",
    "ItemRecord",
    "ItemState",
    "LifecycleEvent",
    "PipelineStep",
    "__version__",
]

"""Item lifecycle finite state machine.

The transition table is the single source of truth for what an item may do;
the web UI consumes an exported copy (``shared/fsm-table.json``) so button
gating can never drift from the engine.
"""

from __future__ import annotations

from .errors import IllegalTransition
from .model import ItemState, LifecycleEvent

S = ItemState
E = LifecycleEvent

TRANSITIONS: dict[tuple[ItemState, LifecycleEvent], ItemState] = {
    (S.FORM_READY, E.REVIEW_ACCEPTED): S.READY_TO_PROCESS,
    (S.FORM_READY, E.REVIEW_REJECTED): S.FORM_READY,
    (S.READY_TO_PROCESS, E.PROCESS_STARTED): S.PROCESSING,
    (S.READY_TO_PROCESS, E.REVIEW_REJECTED): S.FORM_READY,
    (S.PROCESSING, E.PROCESS_SUCCEEDED): S.PROCESSED,
    (S.PROCESSING, E.PROCESS_FAILED): S.PROCESS_ERROR,
    (S.PROCESSING, E.CANCELLED): S.READY_TO_PROCESS,
    (S.PROCESSED, E.PROCESS_STARTED): S.PROCESSING,  # re-run
    (S.PROCESSED, E.REOPEN): S.FORM_READY,
    (S.PROCESS_ERROR, E.REOPEN): S.FORM_READY,
    (S.PROCESS_ERROR, E.PROCESS_STARTED): S.PROCESSING,  # retry
}


def transition(state: ItemState, event: LifecycleEvent) -> ItemState:
    """Pure total transition function; unlisted pairs raise IllegalTransition."""
    try:
        return TRANSITIONS[(state, event)]
    except KeyError:
        raise IllegalTransition(state.value, event.value) from None


def table_as_json() -> dict:
    """Shape shared with the web UI test fixture."""
    return {
        "states": [s.value for s in ItemState],
        "events": [e.value for e in LifecycleEvent],
        "transitions": [
            {"from": s.value, "event": e.value, "to": t.value}
            for (s, e), t in TRANSITIONS.items()
        ],
    }

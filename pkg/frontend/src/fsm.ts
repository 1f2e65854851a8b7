/**
 * Lifecycle gating derived from the engine's exported transition table.
 * The JSON fixture is the single source of truth shared with the backend
 * test suite, so button enablement can never drift from the engine.
 */

import table from "../../shared/fsm-table.json";

export interface TransitionTable {
  states: string[];
  events: string[];
  transitions: { from: string; event: string; to: string }[];
}

export const FSM_TABLE: TransitionTable = table as TransitionTable;

function hasTransition(state: string, event: string): boolean {
  return FSM_TABLE.transitions.some(
    (t) => t.from === state && t.event === event,
  );
}

export interface ButtonEnablement {
  edit: boolean;
  process: boolean;
  cancel: boolean;
}

/** Which dashboard buttons are live in a given item state. */
export function enabledButtons(state: string): ButtonEnablement {
  return {
    edit: state === "FormReady" || hasTransition(state, "Reopen"),
    process: hasTransition(state, "ProcessStarted"),
    cancel: hasTransition(state, "Cancelled"),
  };
}

export function isTerminalJobStatus(status: string): boolean {
  return status === "Finished" || status === "Failed" || status === "Cancelled";
}

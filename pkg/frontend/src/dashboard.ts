/**
 * Item dashboard view model: state badges plus action buttons gated
 * strictly by the engine's transition table.  No optimistic UI: badges
 * always reflect the last server response.
 */

import { enabledButtons, type ButtonEnablement } from "./fsm";
import type { ItemRecord, StatusDoc } from "./types";

export const POLL_INTERVAL_MS = 1000;

export interface ItemRow {
  id: string;
  name: string;
  typeId: string;
  stateBadge: string;
  jobBadge: string | null;
  buttons: ButtonEnablement;
}

export function buildRow(item: ItemRecord, status?: StatusDoc): ItemRow {
  const state = status?.state ?? item.state;
  return {
    id: item.id,
    name: item.name,
    typeId: item.type_id,
    stateBadge: state,
    jobBadge: status?.job?.status ?? null,
    buttons: enabledButtons(state),
  };
}

export interface Dashboard {
  rows: ItemRow[];
  offline: boolean;
}

export function buildDashboard(
  items: ItemRecord[],
  statuses: Map<string, StatusDoc>,
): Dashboard {
  return {
    rows: items.map((item) => buildRow(item, statuses.get(item.id))),
    offline: false,
  };
}

export function offlineDashboard(previous?: Dashboard): Dashboard {
  return { rows: previous?.rows ?? [], offline: true };
}

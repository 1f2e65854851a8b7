/**
 * Form view model: one widget per entry, client-side pre-validation that
 * mirrors the engine's entry invariants, and anchoring of server review
 * messages to their widgets.  The server review stays authoritative; the
 * local checks only give early feedback.
 */

import type { Entry, Form } from "./types";

export type WidgetType = "text" | "number" | "toggle" | "select" | "file-path";

export interface Widget {
  ref: string; // group.entry address
  label: string;
  widget: WidgetType;
  value: string;
  required: boolean;
  description: string;
  options: string[] | null; // select only
  messages: string[]; // server review messages anchored here
  localProblem: string | null; // client-side pre-validation
}

export interface FormView {
  itemId: string;
  description: string;
  groups: { name: string; widgets: Widget[] }[];
  actions: string[];
  dirty: boolean;
  banner: string | null;
}

export function widgetTypeFor(kind: Entry["kind"]): WidgetType {
  switch (kind) {
    case "integer":
    case "real":
      return "number";
    case "flag":
      return "toggle";
    case "choice":
      return "select";
    case "file":
    case "executable":
      return "file-path";
    default:
      return "text";
  }
}

/** Mirror of the engine's per-entry invariants. */
export function validateEntry(entry: Entry): string | null {
  if (entry.required && entry.value === "") return "required entry is empty";
  if (entry.value === "") return null;
  switch (entry.kind) {
    case "integer":
      return /^[+-]?\d+$/.test(entry.value) ? null : "not an integer";
    case "real":
      return Number.isNaN(Number(entry.value)) ? "not a real number" : null;
    case "flag":
      return entry.value === "true" || entry.value === "false"
        ? null
        : "flag must be 'true' or 'false'";
    case "choice":
      return entry.allowed && entry.allowed.includes(entry.value)
        ? null
        : "not in allowed set";
    case "file":
    case "executable":
      return entry.value.startsWith("/")
        ? "paths must be workspace-relative"
        : null;
    default:
      return null;
  }
}

export function buildFormView(form: Form): FormView {
  try {
    return {
      itemId: form.item_id,
      description: form.description,
      groups: form.groups.map((g) => ({
        name: g.name,
        widgets: g.entries.map((e) => ({
          ref: `${g.name}.${e.name}`,
          label: e.name,
          widget: widgetTypeFor(e.kind),
          value: e.value,
          required: e.required,
          description: e.description,
          options: e.kind === "choice" ? (e.allowed ?? []) : null,
          messages: [],
          localProblem: validateEntry(e),
        })),
      })),
      actions: [...form.actions],
      dirty: false,
      banner: null,
    };
  } catch (err) {
    return {
      itemId: "",
      description: "",
      groups: [],
      actions: [],
      dirty: false,
      banner: `malformed form: ${err}`,
    };
  }
}

function findWidget(view: FormView, ref: string): Widget | undefined {
  for (const g of view.groups) {
    const w = g.widgets.find((x) => x.ref === ref);
    if (w) return w;
  }
  return undefined;
}

/** Edit a value; dirty iff any widget differs from the acknowledged form. */
export function setValue(view: FormView, acked: Form, ref: string, value: string) {
  const widget = findWidget(view, ref);
  if (!widget) return;
  widget.value = value;
  const [groupName, entryName] = ref.split(".");
  const entry = acked.groups
    .find((g) => g.name === groupName)
    ?.entries.find((e) => e.name === entryName);
  if (entry) {
    widget.localProblem = validateEntry({ ...entry, value });
  }
  view.dirty = view.groups.some((g) =>
    g.widgets.some((w) => {
      const [gn, en] = w.ref.split(".");
      const e = acked.groups
        .find((x) => x.name === gn)
        ?.entries.find((x) => x.name === en);
      return e !== undefined && e.value !== w.value;
    }),
  );
}

/** Serialize the edited view back into the form shape the server expects. */
export function viewToForm(view: FormView, acked: Form): Form {
  return {
    ...acked,
    groups: acked.groups.map((g) => ({
      ...g,
      entries: g.entries.map((e) => {
        const w = findWidget(view, `${g.name}.${e.name}`);
        return w ? { ...e, value: w.value } : { ...e };
      }),
    })),
  };
}

/**
 * Anchor rejected-review messages ("group.entry: problem") to their widgets;
 * unanchorable messages land on the banner.  Returns the anchored count.
 */
export function applyReviewMessages(view: FormView, messages: string[]): number {
  for (const g of view.groups) {
    for (const w of g.widgets) w.messages = [];
  }
  let anchored = 0;
  const leftovers: string[] = [];
  for (const message of messages) {
    const colon = message.indexOf(":");
    const ref = colon > 0 ? message.slice(0, colon) : "";
    const widget = findWidget(view, ref);
    if (widget) {
      widget.messages.push(message.slice(colon + 1).trim());
      anchored += 1;
    } else {
      leftovers.push(message);
    }
  }
  view.banner = leftovers.length ? leftovers.join("; ") : null;
  return anchored;
}

/** After a 200 review or a fresh GET, the server copy is the acknowledged one. */
export function acknowledge(view: FormView, form: Form) {
  for (const g of form.groups) {
    for (const e of g.entries) {
      const w = findWidget(view, `${g.name}.${e.name}`);
      if (w) w.value = e.value;
    }
  }
  view.dirty = false;
}

/**
 * Minimal browser mount.  All behavior lives in the tested view models;
 * this file only projects them onto the DOM and wires events.
 */

import { ApiClient } from "./api";
import { ConsoleModel, parseSseFrame } from "./console";
import { buildDashboard, offlineDashboard, POLL_INTERVAL_MS, type Dashboard } from "./dashboard";
import {
  acknowledge,
  applyReviewMessages,
  buildFormView,
  setValue,
  viewToForm,
  type FormView,
  type Widget,
} from "./form";
import type { Form, JobEvent, StatusDoc } from "./types";

export class App {
  private dashboard: Dashboard = { rows: [], offline: false };
  private openForm: { view: FormView; acked: Form; itemId: string } | null =
    null;
  private consoles = new Map<string, ConsoleModel>();

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
  ) {}

  start() {
    void this.refresh();
    setInterval(() => void this.refresh(), POLL_INTERVAL_MS);
  }

  private async refresh() {
    try {
      const items = await this.api.listItems();
      const statuses = new Map<string, StatusDoc>();
      for (const item of items) {
        statuses.set(item.id, await this.api.itemStatus(item.id));
      }
      this.dashboard = buildDashboard(items, statuses);
    } catch {
      this.dashboard = offlineDashboard(this.dashboard);
    }
    this.render();
  }

  async openEditor(itemId: string) {
    const form = await this.api.getForm(itemId);
    this.openForm = { view: buildFormView(form), acked: form, itemId };
    this.render();
  }

  async saveForm() {
    if (!this.openForm) return;
    const { view, acked, itemId } = this.openForm;
    const edited = viewToForm(view, acked);
    const result = await this.api.putForm(itemId, edited);
    if (result.verdict === "Accepted") {
      acknowledge(view, edited);
      this.openForm.acked = edited;
    } else {
      applyReviewMessages(view, result.messages);
    }
    this.render();
  }

  openConsole(jobId: string) {
    const model = new ConsoleModel();
    this.consoles.set(jobId, model);
    void model.follow((fromSeq) => this.sseIterator(jobId, fromSeq));
  }

  private async *sseIterator(
    jobId: string,
    fromSeq: number,
  ): AsyncIterable<JobEvent> {
    const res = await fetch(this.api.eventStreamUrl(jobId, fromSeq));
    if (!res.ok || !res.body) throw new Error(`stream failed: ${res.status}`);
    const reader = res.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      let split;
      while ((split = buffer.indexOf("\n\n")) >= 0) {
        const frame = buffer.slice(0, split);
        buffer = buffer.slice(split + 2);
        const ev = parseSseFrame(frame);
        if (ev) yield ev;
      }
    }
  }

  private render() {
    this.root.textContent = "";
    if (this.dashboard.offline) {
      this.root.appendChild(banner("server unreachable; retrying"));
    }
    const table = document.createElement("table");
    for (const row of this.dashboard.rows) {
      const tr = document.createElement("tr");
      tr.appendChild(cell(row.name));
      tr.appendChild(cell(row.stateBadge));
      tr.appendChild(cell(row.jobBadge ?? ""));
      const actions = document.createElement("td");
      actions.appendChild(
        button("Edit", row.buttons.edit, () => void this.openEditor(row.id)),
      );
      actions.appendChild(
        button("Process", row.buttons.process, () => {
          const action = prompt("Action name?") ?? "";
          if (action) void this.api.processItem(row.id, action);
        }),
      );
      actions.appendChild(
        button("Cancel", row.buttons.cancel, () =>
          void this.api.cancelItem(row.id),
        ),
      );
      tr.appendChild(actions);
      table.appendChild(tr);
    }
    this.root.appendChild(table);
    if (this.openForm) this.renderForm(this.openForm.view);
    for (const [jobId, model] of this.consoles) {
      this.root.appendChild(consoleBlock(jobId, model));
    }
  }

  private renderForm(view: FormView) {
    const section = document.createElement("section");
    if (view.banner) section.appendChild(banner(view.banner));
    for (const group of view.groups) {
      const fieldset = document.createElement("fieldset");
      const legend = document.createElement("legend");
      legend.textContent = group.name;
      fieldset.appendChild(legend);
      for (const w of group.widgets) {
        fieldset.appendChild(this.widgetNode(view, w));
      }
      section.appendChild(fieldset);
    }
    const save = button("Save", view.dirty, () => void this.saveForm());
    section.appendChild(save);
    this.root.appendChild(section);
  }

  private widgetNode(view: FormView, w: Widget): HTMLElement {
    const label = document.createElement("label");
    label.textContent = w.required ? `${w.label} *` : w.label;
    let input: HTMLInputElement | HTMLSelectElement;
    if (w.widget === "select") {
      input = document.createElement("select");
      for (const option of w.options ?? []) {
        const node = document.createElement("option");
        node.value = option;
        node.textContent = option;
        input.appendChild(node);
      }
    } else {
      input = document.createElement("input");
      input.type = w.widget === "number" ? "number" : "text";
      if (w.widget === "toggle") input.type = "checkbox";
    }
    input.value = w.value;
    input.addEventListener("change", () => {
      if (!this.openForm) return;
      setValue(view, this.openForm.acked, w.ref, input.value);
      this.render();
    });
    label.appendChild(input);
    for (const message of w.messages) {
      const note = document.createElement("em");
      note.textContent = message;
      label.appendChild(note);
    }
    if (w.localProblem) {
      const hint = document.createElement("small");
      hint.textContent = w.localProblem;
      label.appendChild(hint);
    }
    return label;
  }
}

function cell(text: string): HTMLTableCellElement {
  const td = document.createElement("td");
  td.textContent = text;
  return td;
}

function button(
  text: string,
  enabled: boolean,
  onClick: () => void,
): HTMLButtonElement {
  const b = document.createElement("button");
  b.textContent = text;
  b.disabled = !enabled;
  b.addEventListener("click", onClick);
  return b;
}

function banner(text: string): HTMLElement {
  const div = document.createElement("div");
  div.className = "banner";
  div.textContent = text;
  return div;
}

function consoleBlock(jobId: string, model: ConsoleModel): HTMLElement {
  const pre = document.createElement("pre");
  pre.textContent = model.lines.join("\n");
  const wrap = document.createElement("div");
  const head = document.createElement("h3");
  head.textContent = model.terminalBadge
    ? `${jobId} — ${model.terminalBadge}`
    : jobId;
  wrap.appendChild(head);
  if (model.connectionLost) wrap.appendChild(banner("connection lost; retrying"));
  wrap.appendChild(pre);
  return wrap;
}

export function mount(baseUrl: string, rootId = "app") {
  const root = document.getElementById(rootId);
  if (!root) throw new Error(`no #${rootId} element`);
  const app = new App(new ApiClient(baseUrl), root);
  app.start();
  return app;
}

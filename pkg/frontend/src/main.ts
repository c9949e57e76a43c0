/**
 * Application shell: session dashboard, layout editor tab, review panel.
 *
 * One active editing session per tab; all mutation goes through the
 * feedback endpoints with the session revision echoed back.
 */

import { SessionApi, StaleRevisionError, pollSession } from "./api.js";
import { LayoutEditor } from "./editor.js";
import { drawLayout } from "./render.js";
import type { SessionView } from "./types.js";
import { validate } from "./validation.js";

const CSS_SCALE = 0.75;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private api = new SessionApi("");
  private view: SessionView | null = null;
  private editor: LayoutEditor | null = null;
  private stopPolling: (() => void) | null = null;

  start(): void {
    el<HTMLButtonElement>("create").onclick = () => void this.createSession();
    el<HTMLButtonElement>("advance").onclick = () => void this.advance();
    el<HTMLButtonElement>("submit-diff").onclick = () => void this.submitDiff();
    el<HTMLButtonElement>("override-pass").onclick = () => void this.overridePass();
    el<HTMLButtonElement>("delete-entry").onclick = () => this.deleteSelected();
    this.bindCanvas();
    void this.refreshList();
  }

  private bindCanvas(): void {
    const canvas = el<HTMLCanvasElement>("layout-canvas");
    canvas.addEventListener("pointerdown", (event) => {
      this.editor?.pointerDown(event.offsetX, event.offsetY);
    });
    canvas.addEventListener("pointermove", (event) => {
      this.editor?.pointerMove(event.offsetX, event.offsetY);
    });
    canvas.addEventListener("pointerup", () => {
      this.editor?.pointerUp();
      this.redraw();
    });
  }

  private async createSession(): Promise<void> {
    const prompt = el<HTMLInputElement>("prompt").value;
    const view = await this.api.createSession(prompt);
    this.attach(view.id);
  }

  private attach(id: string): void {
    this.stopPolling?.();
    this.stopPolling = pollSession(this.api, id, (view) => this.onUpdate(view));
  }

  private onUpdate(view: SessionView): void {
    this.view = view;
    if (view.layout) {
      this.editor = new LayoutEditor(view.layout, CSS_SCALE);
    }
    el<HTMLElement>("phase").textContent = view.state.phase;
    this.renderTimeline(view);
    this.renderArtifacts(view);
    this.redraw();
    void this.refreshList();
  }

  private redraw(): void {
    if (!this.editor) return;
    const canvas = el<HTMLCanvasElement>("layout-canvas");
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const layout = this.editor.layout();
    const report = validate(layout);
    drawLayout(ctx, layout, report, CSS_SCALE);
    el<HTMLElement>("badges").textContent = report.clean
      ? "layout clean"
      : report.violations.map((v) => `${v.kind}@${v.entry_index}`).join(", ");
    el<HTMLButtonElement>("submit-diff").disabled = !report.clean;
  }

  private renderTimeline(view: SessionView): void {
    const list = el<HTMLUListElement>("timeline");
    list.replaceChildren(
      ...view.state.audit.map((event) => {
        const item = document.createElement("li");
        item.textContent = `${event.seq}. ${event.event}${event.to ? ` -> ${event.to}` : ""}`;
        return item;
      }),
    );
  }

  private renderArtifacts(view: SessionView): void {
    const gallery = el<HTMLElement>("artifacts");
    const images = Object.entries(view.artifact_urls).filter(([name]) => name.includes("composed"));
    gallery.replaceChildren(
      ...images.map(([name, url]) => {
        const img = document.createElement("img");
        img.src = url;
        img.alt = name;
        img.width = 192;
        return img;
      }),
    );
  }

  private async advance(): Promise<void> {
    if (!this.view) return;
    this.onUpdate(await this.api.advance(this.view.id));
  }

  private async submitDiff(): Promise<void> {
    if (!this.view || !this.editor) return;
    const diff = this.editor.diff();
    if (diff.edits.length === 0) return;
    try {
      const updated = await this.api.submitFeedback(
        this.view.id,
        { layout_diff: diff },
        this.view.revision,
      );
      this.onUpdate(updated);
    } catch (error) {
      if (error instanceof StaleRevisionError) {
        this.onUpdate(await this.api.getSession(this.view.id));
        el<HTMLElement>("badges").textContent = "session changed elsewhere; layout reloaded";
        return;
      }
      throw error;
    }
  }

  private async overridePass(): Promise<void> {
    if (!this.view) return;
    this.onUpdate(
      await this.api.submitFeedback(
        this.view.id,
        { verification_override: { passed: true } },
        this.view.revision,
      ),
    );
  }

  private deleteSelected(): void {
    const index = Number(el<HTMLInputElement>("entry-index").value);
    this.editor?.deleteEntry(index);
    this.redraw();
  }

  private async refreshList(): Promise<void> {
    const sessions = await this.api.listSessions();
    const list = el<HTMLUListElement>("session-list");
    list.replaceChildren(
      ...sessions.map((session) => {
        const item = document.createElement("li");
        const link = document.createElement("a");
        link.href = "#";
        link.textContent = `${session.id} [${session.state.phase}] ${session.prompt}`;
        link.onclick = (event) => {
          event.preventDefault();
          this.attach(session.id);
        };
        item.append(link);
        return item;
      }),
    );
  }
}

if (typeof document !== "undefined" && document.getElementById("create")) {
  new App().start();
}

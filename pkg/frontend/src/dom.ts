import { ApiClient } from "./api.js";
import { SessionRunner, type TrialPresentation, type View } from "./session.js";
import type { Click } from "./types.js";

/**
 * Concrete page view.
 *
 * The image is shown at native resolution (no scaling; small screens
 * scroll), so marker offsets equal image pixel coordinates. Markers are
 * plain red dots, one per recorded click.
 */
export class DomView implements View {
  private promptEl: HTMLElement;
  private progressEl: HTMLElement;
  private imageEl: HTMLImageElement;
  private markerLayer: HTMLElement;
  private noticeEl: HTMLElement;
  private countEl: HTMLElement;
  private undoBtn: HTMLButtonElement;
  private submitBtn: HTMLButtonElement;
  private stageEl: HTMLElement;
  private completeEl: HTMLElement;
  private required = 0;

  constructor(private root: HTMLElement) {
    root.innerHTML = `
      <header>
        <h1 class="prompt"></h1>
        <div class="progress"></div>
      </header>
      <div class="stage">
        <div class="image-wrap">
          <img class="scene" alt="trial scene" draggable="false" />
          <div class="markers"></div>
        </div>
        <div class="notice" hidden></div>
        <div class="controls">
          <span class="count"></span>
          <button type="button" class="undo">Undo last click</button>
          <button type="button" class="submit" disabled>Submit</button>
        </div>
      </div>
      <div class="complete" hidden></div>
    `;
    this.promptEl = this.query(".prompt");
    this.progressEl = this.query(".progress");
    this.imageEl = this.query<HTMLImageElement>(".scene");
    this.markerLayer = this.query(".markers");
    this.noticeEl = this.query(".notice");
    this.countEl = this.query(".count");
    this.undoBtn = this.query<HTMLButtonElement>(".undo");
    this.submitBtn = this.query<HTMLButtonElement>(".submit");
    this.stageEl = this.query(".stage");
    this.completeEl = this.query(".complete");
  }

  private query<T extends HTMLElement = HTMLElement>(selector: string): T {
    const el = this.root.querySelector<T>(selector);
    if (!el) throw new Error(`missing element ${selector}`);
    return el;
  }

  bind(handlers: {
    onClick: (clientX: number, clientY: number, rect: DOMRect) => void;
    onUndo: () => void;
    onSubmit: () => void;
  }): void {
    this.imageEl.addEventListener("click", (ev) => {
      handlers.onClick(ev.clientX, ev.clientY, this.imageEl.getBoundingClientRect());
    });
    this.undoBtn.addEventListener("click", handlers.onUndo);
    this.submitBtn.addEventListener("click", handlers.onSubmit);
  }

  showTrial(p: TrialPresentation): void {
    this.required = p.required;
    this.promptEl.textContent = p.prompt;
    this.progressEl.textContent = `trial ${p.index + 1} of ${p.total}`;
    this.imageEl.src = p.imageUrl;
    this.stageEl.hidden = false;
    this.completeEl.hidden = true;
  }

  updateClicks(clicks: readonly Click[], remaining: number): void {
    this.markerLayer.textContent = "";
    for (const c of clicks) {
      const dot = this.markerLayer.ownerDocument.createElement("div");
      dot.className = "marker";
      dot.style.left = `${c.x}px`;
      dot.style.top = `${c.y}px`;
      this.markerLayer.appendChild(dot);
    }
    this.countEl.textContent = `${clicks.length} of ${this.required} clicks (${remaining} to go)`;
  }

  setSubmitEnabled(enabled: boolean): void {
    this.submitBtn.disabled = !enabled;
  }

  notify(message: string): void {
    this.noticeEl.textContent = message;
    this.noticeEl.hidden = false;
  }

  clearNotice(): void {
    this.noticeEl.textContent = "";
    this.noticeEl.hidden = true;
  }

  showComplete(completed: number): void {
    this.stageEl.hidden = true;
    this.completeEl.textContent =
      completed > 0
        ? `All ${completed} trials submitted. Thank you!`
        : "No trials are available right now. Thank you!";
    this.completeEl.hidden = false;
  }
}

/** Build the page view, wire events, and return the runner (not started). */
export function mount(root: HTMLElement, api: ApiClient): SessionRunner {
  const view = new DomView(root);
  const runner = new SessionRunner(api, view);
  view.bind({
    onClick: (clientX, clientY, rect) => runner.handleDisplayClick(clientX, clientY, rect),
    onUndo: () => runner.handleUndo(),
    onSubmit: () => void runner.handleSubmit(),
  });
  return runner;
}

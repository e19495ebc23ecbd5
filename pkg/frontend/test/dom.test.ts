// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { DomView, mount } from "../src/dom.js";

function view(): { root: HTMLElement; v: DomView } {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const v = new DomView(root);
  return { root, v };
}

const presentation = {
  index: 2,
  total: 20,
  prompt: "Where would you put this red-square?",
  imageUrl: "/api/image/5",
  targetClass: "red-square",
  required: 10,
};

describe("DomView", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders prompt, one-based progress, and the scene image", () => {
    const { root, v } = view();
    v.showTrial(presentation);
    expect(root.querySelector(".prompt")!.textContent).toBe(
      "Where would you put this red-square?",
    );
    expect(root.querySelector(".progress")!.textContent).toBe("trial 3 of 20");
    expect(root.querySelector<HTMLImageElement>("img.scene")!.src).toContain("/api/image/5");
  });

  it("draws one marker per recorded click at the click position", () => {
    const { root, v } = view();
    v.showTrial(presentation);
    v.updateClicks(
      [
        { x: 10, y: 20, t_ms: 0 },
        { x: 400, y: 600, t_ms: 50 },
      ],
      8,
    );
    const markers = root.querySelectorAll<HTMLElement>(".marker");
    expect(markers).toHaveLength(2);
    expect(markers[1]!.style.left).toBe("400px");
    expect(markers[1]!.style.top).toBe("600px");
    expect(root.querySelector(".count")!.textContent).toBe("2 of 10 clicks (8 to go)");
    v.updateClicks([], 10);
    expect(root.querySelectorAll(".marker")).toHaveLength(0);
  });

  it("toggles the submit button", () => {
    const { root, v } = view();
    const btn = root.querySelector<HTMLButtonElement>("button.submit")!;
    expect(btn.disabled).toBe(true);
    v.setSubmitEnabled(true);
    expect(btn.disabled).toBe(false);
    v.setSubmitEnabled(false);
    expect(btn.disabled).toBe(true);
  });

  it("shows and clears notices", () => {
    const { root, v } = view();
    const notice = root.querySelector<HTMLElement>(".notice")!;
    expect(notice.hidden).toBe(true);
    v.notify("That spot is already marked");
    expect(notice.hidden).toBe(false);
    expect(notice.textContent).toContain("already marked");
    v.clearNotice();
    expect(notice.hidden).toBe(true);
  });

  it("completion screen replaces the stage", () => {
    const { root, v } = view();
    v.showTrial(presentation);
    v.showComplete(20);
    expect(root.querySelector<HTMLElement>(".stage")!.hidden).toBe(true);
    const done = root.querySelector<HTMLElement>(".complete")!;
    expect(done.hidden).toBe(false);
    expect(done.textContent).toContain("All 20 trials submitted");
  });
});

describe("mount", () => {
  it("wires image clicks through the rect mapping into the runner", async () => {
    document.body.innerHTML = "";
    const root = document.createElement("div");
    document.body.appendChild(root);

    const session = {
      session_id: "s1",
      image_size: 800,
      trials: [
        {
          trial_id: "t0",
          pair_id: 0,
          image_id: 0,
          image_url: "/api/image/0",
          target_class: "red-cross",
          required_clicks: 2,
        },
      ],
    };
    const api = new ApiClient("", {
      fetchFn: async (url) => {
        if (String(url).endsWith("/api/session")) {
          return new Response(JSON.stringify(session), { status: 200 });
        }
        return new Response(JSON.stringify({ status: "ok", remaining: 0 }), { status: 200 });
      },
    });
    const runner = mount(root, api);
    await runner.start();

    const img = root.querySelector<HTMLImageElement>("img.scene")!;
    img.getBoundingClientRect = () =>
      ({ left: 0, top: 0, width: 800, height: 800 }) as DOMRect;

    img.dispatchEvent(new MouseEvent("click", { clientX: 100, clientY: 150 }));
    expect(root.querySelectorAll(".marker")).toHaveLength(1);

    // duplicate: ignored with a notice
    img.dispatchEvent(new MouseEvent("click", { clientX: 100, clientY: 150 }));
    expect(root.querySelectorAll(".marker")).toHaveLength(1);
    expect(root.querySelector<HTMLElement>(".notice")!.hidden).toBe(false);

    const undo = root.querySelector<HTMLButtonElement>("button.undo")!;
    undo.click();
    expect(root.querySelectorAll(".marker")).toHaveLength(0);
  });
});

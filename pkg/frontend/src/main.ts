import { ApiClient, SessionUnavailableError } from "./api.js";
import { mount } from "./dom.js";

const root = document.getElementById("app");
if (root) {
  const runner = mount(root, new ApiClient(""));
  runner.start().catch((err: unknown) => {
    const message =
      err instanceof SessionUnavailableError
        ? `No session available: ${err.message}`
        : `Could not reach the collection service: ${String(err)}`;
    root.innerHTML = "";
    const p = document.createElement("p");
    p.className = "fatal";
    p.textContent = message;
    root.appendChild(p);
  });
}

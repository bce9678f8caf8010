// Browser entry point: session creation with a mode selector, then a live
// thread driven purely by the server's event stream.

import { ApiClient, ServiceError } from "./api";
import { consumeEventStream } from "./sse";
import { renderApp } from "./render";
import type { RunMode } from "./types";
import { ChatViewModel, WrongStateError } from "./viewmodel";

const MODES: { value: RunMode; label: string }[] = [
  { value: "no_clarify", label: "no clarification" },
  { value: "expert_only", label: "experts may ask" },
  { value: "supervisor_only", label: "supervisor may ask" },
  { value: "both", label: "both levels may ask" },
];

function mount(): void {
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  const api = new ApiClient((window as unknown as { SERVICE_URL?: string }).SERVICE_URL ?? "");
  root.innerHTML =
    `<form id="setup"><label>Clarification mode ` +
    `<select name="mode">${MODES.map((m) => `<option value="${m.value}">${m.label}</option>`).join("")}</select>` +
    `</label><button type="submit">Start session</button></form>`;

  const setup = document.getElementById("setup") as HTMLFormElement;
  setup.addEventListener("submit", async (submitEvent) => {
    submitEvent.preventDefault();
    const mode = (new FormData(setup).get("mode") as RunMode) ?? "both";
    const session = await api.createSession({
      mode,
      backends: { supervisor: "supervisor", expert: "expert" },
    });
    await connect(root, api, session.id);
  });
}

export async function connect(root: HTMLElement, api: ApiClient, sessionId: string): Promise<void> {
  const vm = new ChatViewModel(sessionId);
  const repaint = () => {
    root.innerHTML = renderApp(vm);
    wireComposer();
  };

  const wireComposer = () => {
    const form = document.getElementById("composer") as HTMLFormElement | null;
    form?.addEventListener("submit", async (submitEvent) => {
      submitEvent.preventDefault();
      const text = (new FormData(form).get("text") as string).trim();
      if (!text) {
        return;
      }
      try {
        vm.beginSend();
        repaint();
        await api.postMessage(sessionId, text);
        const transcript = await api.getTranscript(sessionId);
        vm.attachApiPanels(transcript);
      } catch (error) {
        if (error instanceof WrongStateError || error instanceof ServiceError) {
          vm.sendFailed(error.message);
        } else {
          vm.sendFailed(`send failed: ${String(error)}`);
        }
      }
      repaint();
    });
  };

  try {
    vm.applyBacklog(await api.getTranscript(sessionId));
  } catch (error) {
    root.innerHTML = `<p class="error">cannot reach the session service: ${String(error)} <button onclick="location.reload()">retry</button></p>`;
    return;
  }
  repaint();

  void consumeEventStream(api.eventsUrl(sessionId), {
    onEvent: (chatEvent) => {
      vm.applyEvent(chatEvent);
      repaint();
    },
    onError: (message) => {
      vm.sendFailed(message);
      repaint();
    },
  });
}

if (typeof document !== "undefined") {
  mount();
}

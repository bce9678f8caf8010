// Deterministic HTML rendering of the view model. Same bubbles in, same
// markup out; the replay test relies on that.

import type { Bubble, ChatViewModel } from "./viewmodel";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBubble(bubble: Bubble): string {
  const parts: string[] = [`<li class="bubble ${bubble.speaker}" data-turn="${bubble.turn}">`];
  if (bubble.badge) {
    parts.push(`<span class="badge badge-${bubble.badge.level}">${escapeHtml(bubble.badge.label)}</span>`);
  }
  parts.push(`<p>${escapeHtml(bubble.text)}</p>`);
  if (bubble.apiPanel.length) {
    const lines = bubble.apiPanel.map((line) => `<pre>${escapeHtml(line)}</pre>`).join("");
    parts.push(`<details class="api-panel"><summary>behind the scenes</summary>${lines}</details>`);
  }
  parts.push("</li>");
  return parts.join("");
}

export function renderMessageList(vm: ChatViewModel): string {
  return `<ul class="thread">${vm.bubbles.map(renderBubble).join("")}</ul>`;
}

export function renderComposer(vm: ChatViewModel): string {
  const disabled = vm.composer !== "enabled" ? " disabled" : "";
  const placeholder =
    vm.composer === "ended"
      ? `session ended (${escapeHtml(vm.endedReason ?? "done")})`
      : vm.composer === "working"
        ? "waiting for the assistant…"
        : "type a message";
  const error = vm.inlineError ? `<p class="error">${escapeHtml(vm.inlineError)}</p>` : "";
  return (
    `${error}<form id="composer"><input name="text" placeholder="${placeholder}"${disabled}>` +
    `<button type="submit"${disabled}>Send</button></form>`
  );
}

export function renderApp(vm: ChatViewModel): string {
  return renderMessageList(vm) + renderComposer(vm);
}

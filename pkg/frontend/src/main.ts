/**
 * Browser UI: upload a sketch, inspect the segmentation, hover caption
 * sentences to highlight their instances, edit color words per
 * sentence, and request colorizations.
 *
 * All correspondences come from server JSON; the DOM layer only
 * renders what the store holds. The result image is displayed from
 * the exact bytes fetched from the result endpoint.
 */

import { ApiClient, ApiError } from "./api.js";
import type { ApiErrorBody, InstructionsDoc, SentenceDoc } from "./api.js";
import { SessionStore } from "./state.js";

export interface AppHandles {
  store: SessionStore;
  api: ApiClient;
  root: HTMLElement;
  createFromBytes(bytes: Uint8Array, filename?: string): Promise<void>;
  hover(sentenceId: number | null): void;
  colorize(): Promise<void>;
}

const PAGE = `
  <header class="bar">
    <h1>sketchtint</h1>
    <span data-status>no session</span>
  </header>
  <section class="upload">
    <input type="file" data-file accept="image/png">
    <button type="button" data-create>create session</button>
  </section>
  <p class="toast" data-toast hidden></p>
  <main class="panes">
    <section class="pane">
      <h2>sketch <small data-instance-count></small></h2>
      <div class="canvas">
        <img data-sketch alt="uploaded sketch">
        <div class="overlays" data-overlays></div>
      </div>
    </section>
    <section class="pane">
      <h2>caption</h2>
      <ul class="sentences" data-sentences></ul>
      <label class="background-row" data-background-row>
        background
        <input data-background placeholder="e.g. the sky is blue">
        <span class="inline-error" data-background-error hidden></span>
      </label>
      <button type="button" data-colorize disabled>colorize</button>
    </section>
    <section class="pane">
      <h2>result</h2>
      <img data-result alt="colorization result">
      <ul class="echo" data-instructions></ul>
    </section>
  </main>
`;

function toDataUrl(bytes: Uint8Array, type = "image/png"): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return `data:${type};base64,${btoa(binary)}`;
}

function pick<T extends HTMLElement>(root: HTMLElement,
                                     selector: string): T {
  const node = root.querySelector<T>(selector);
  if (!node) {
    throw new Error(`missing element ${selector}`);
  }
  return node;
}

/** Sentence text with its slots wrapped in role-tagged marks. */
function slotMarkup(sentence: SentenceDoc): string {
  const slots = [...sentence.slots].sort((a, b) => a.start - b.start);
  const out: string[] = [];
  let cursor = 0;
  for (const slot of slots) {
    out.push(escapeHtml(sentence.text.slice(cursor, slot.start)));
    out.push(`<mark data-role="${escapeHtml(slot.role)}">` +
             escapeHtml(sentence.text.slice(slot.start, slot.end)) +
             "</mark>");
    cursor = slot.end;
  }
  out.push(escapeHtml(sentence.text.slice(cursor)));
  return out.join("");
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Body text with the reported error span highlighted. */
function spanMarkup(body: string, span: [number, number] | null,
                    message: string): string {
  if (!span || span[0] < 0 || span[1] > body.length || span[0] >= span[1]) {
    return escapeHtml(message);
  }
  return escapeHtml(message) + " &mdash; " +
    escapeHtml(body.slice(0, span[0])) +
    `<mark class="bad">${escapeHtml(body.slice(span[0], span[1]))}</mark>` +
    escapeHtml(body.slice(span[1]));
}

export function mountApp(root: HTMLElement, baseUrl = ""): AppHandles {
  const api = new ApiClient(baseUrl);
  const store = new SessionStore();
  root.innerHTML = PAGE;

  const status = pick<HTMLSpanElement>(root, "[data-status]");
  const fileInput = pick<HTMLInputElement>(root, "[data-file]");
  const createButton = pick<HTMLButtonElement>(root, "[data-create]");
  const toast = pick<HTMLParagraphElement>(root, "[data-toast]");
  const instanceCount = pick<HTMLElement>(root, "[data-instance-count]");
  const sketchImage = pick<HTMLImageElement>(root, "[data-sketch]");
  const overlays = pick<HTMLDivElement>(root, "[data-overlays]");
  const sentenceList = pick<HTMLUListElement>(root, "[data-sentences]");
  const backgroundInput = pick<HTMLInputElement>(root, "[data-background]");
  const backgroundError = pick<HTMLElement>(root, "[data-background-error]");
  const colorizeButton = pick<HTMLButtonElement>(root, "[data-colorize]");
  const resultImage = pick<HTMLImageElement>(root, "[data-result]");
  const echoList = pick<HTMLUListElement>(root, "[data-instructions]");

  function showToast(text: string | null): void {
    toast.hidden = !text;
    toast.textContent = text ?? "";
  }

  function renderOverlays(ids: number[]): void {
    overlays.replaceChildren();
    const sessionId = store.sessionId;
    if (!sessionId) {
      return;
    }
    for (const id of ids) {
      const img = document.createElement("img");
      img.dataset.iid = String(id);
      img.alt = `instance ${id}`;
      img.src = api.overlayUrl(sessionId, id);
      overlays.appendChild(img);
    }
  }

  function renderSentences(): void {
    sentenceList.replaceChildren();
    for (const sentence of store.sentences()) {
      const row = document.createElement("li");
      row.dataset.sentenceId = String(sentence.id);

      const original = document.createElement("div");
      original.className = "orig";
      original.innerHTML = slotMarkup(sentence);
      row.appendChild(original);

      const body = document.createElement("input");
      body.className = "body";
      body.value = store.bodyOf(sentence.id);
      body.addEventListener("input", () => {
        store.setBody(sentence.id, body.value);
      });
      row.appendChild(body);

      const error = document.createElement("div");
      error.className = "inline-error";
      error.hidden = true;
      row.appendChild(error);

      row.addEventListener("mouseenter", () => hover(sentence.id));
      row.addEventListener("mouseleave", () => hover(null));
      sentenceList.appendChild(row);
    }
  }

  function renderEcho(instructions: InstructionsDoc | null): void {
    echoList.replaceChildren();
    if (!instructions) {
      return;
    }
    for (const binding of instructions.instructions) {
      const item = document.createElement("li");
      const target = binding.part ? `${binding.part} of ` : "";
      item.textContent = `${binding.color} → ${target}instances ` +
        `[${binding.instance_ids.join(", ")}]`;
      item.dataset.color = binding.color;
      echoList.appendChild(item);
    }
    if (instructions.background) {
      for (const [component, color] of
           Object.entries(instructions.background)) {
        const item = document.createElement("li");
        item.textContent = `${color} → ${component}`;
        item.dataset.color = color;
        echoList.appendChild(item);
      }
    }
    for (const leftover of instructions.unmatched) {
      const item = document.createElement("li");
      item.className = "unmatched";
      item.textContent = `unmatched: ${leftover}`;
      echoList.appendChild(item);
    }
  }

  function renderInlineError(): void {
    backgroundError.hidden = true;
    backgroundError.innerHTML = "";
    for (const row of
         sentenceList.querySelectorAll<HTMLLIElement>("[data-sentence-id]")) {
      row.classList.remove("has-error");
      const box = row.querySelector<HTMLDivElement>(".inline-error");
      if (box) {
        box.hidden = true;
        box.innerHTML = "";
      }
    }
    const error = store.inlineError;
    if (!error) {
      return;
    }
    if (error.sentenceId === null) {
      backgroundError.hidden = false;
      backgroundError.innerHTML =
        spanMarkup(store.backgroundText, error.span, error.message);
      return;
    }
    const row = sentenceList.querySelector<HTMLLIElement>(
      `[data-sentence-id="${error.sentenceId}"]`);
    if (!row) {
      showToast(error.message);
      return;
    }
    row.classList.add("has-error");
    const box = row.querySelector<HTMLDivElement>(".inline-error");
    if (box) {
      box.hidden = false;
      box.innerHTML =
        spanMarkup(store.bodyOf(error.sentenceId), error.span, error.message);
    }
  }

  function hover(sentenceId: number | null): void {
    renderOverlays(sentenceId === null ? [] : store.hoverTargets(sentenceId));
  }

  async function createFromBytes(bytes: Uint8Array,
                                 filename = "sketch.png"): Promise<void> {
    showToast(null);
    try {
      const doc = await api.createSession(bytes, filename);
      store.load(doc);
    } catch (error) {
      if (error instanceof ApiError) {
        showToast(`${error.stage}/${error.code}: ${error.message}`);
        return;
      }
      throw error;
    }
    sketchImage.src = toDataUrl(bytes);
    instanceCount.textContent = `${store.instanceCount()} instances`;
    status.textContent = store.doc?.stage ?? "";
    backgroundInput.value = "";
    renderSentences();
    renderEcho(store.instructions);
    renderOverlays([]);
    resultImage.removeAttribute("src");
    colorizeButton.disabled = false;
  }

  async function colorize(): Promise<void> {
    const sessionId = store.sessionId;
    if (!sessionId || store.busy) {
      return;
    }
    const token = store.beginColorize();
    colorizeButton.disabled = true;
    try {
      const echo = await api.colorize(sessionId, store.editedPairs());
      const bytes = await api.fetchResult(sessionId);
      if (store.settleSuccess(token, echo.instructions, bytes)) {
        resultImage.src = toDataUrl(bytes);
        renderEcho(store.instructions);
        status.textContent = "colorize";
      }
    } catch (error) {
      const body: ApiErrorBody = error instanceof ApiError
        ? error.body
        : { stage: "transport", code: "fetch_failure", message: String(error) };
      if (store.settleError(token, body)) {
        renderInlineError();
        showToast(store.toast);
      }
    } finally {
      colorizeButton.disabled = store.busy;
    }
  }

  createButton.addEventListener("click", () => {
    const file = fileInput.files?.[0];
    if (!file) {
      showToast("choose a PNG sketch first");
      return;
    }
    void file.arrayBuffer().then(
      (buffer) => createFromBytes(new Uint8Array(buffer), file.name));
  });

  backgroundInput.addEventListener("input", () => {
    store.setBackground(backgroundInput.value);
  });

  colorizeButton.addEventListener("click", () => {
    void colorize();
  });

  return { store, api, root, createFromBytes, hover, colorize };
}

const autoRoot = typeof document !== "undefined"
  ? document.querySelector<HTMLElement>("[data-sketchtint-root]")
  : null;
if (autoRoot) {
  mountApp(autoRoot, "");
}

/**
 * Single-page app wiring.
 *
 * Boot sequence: probe /healthz, load the persona roster, then enable the
 * chat and compare panels.  A failed probe (or any transport failure later)
 * raises the service banner with a retry button; domain errors (400s/404s)
 * are rendered inline where they occurred.
 */

import { ApiError, CopilotClient } from "./api.js";
import { loadCountyCard, loadCountyRecord } from "./compare.js";
import {
  renderBanner,
  renderChatError,
  renderCompareCard,
  renderCompareError,
  renderCountyDetail,
  renderExchange,
  renderPersonaOptions,
} from "./render.js";
import { initialState, selectPersona, sendMessage } from "./state.js";

const STORAGE_KEY = "soilcopilot-ui-session";

function apiBase(): string {
  return new URLSearchParams(window.location.search).get("api") ?? "";
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const client = new CopilotClient(apiBase());
const state = initialState();

const banner = el<HTMLDivElement>("banner");
const personaSelect = el<HTMLSelectElement>("persona-select");
const chatLog = el<HTMLDivElement>("chat-log");
const chatForm = el<HTMLFormElement>("chat-form");
const chatInput = el<HTMLTextAreaElement>("chat-input");
const sendBtn = el<HTMLButtonElement>("send-btn");
const compareForm = el<HTMLFormElement>("compare-form");
const countyA = el<HTMLInputElement>("county-a");
const countyB = el<HTMLInputElement>("county-b");
const compareCards = el<HTMLDivElement>("compare-cards");

function showBanner(message: string): void {
  banner.innerHTML = renderBanner(message);
  banner.hidden = false;
  banner
    .querySelector(".banner-retry")!
    .addEventListener("click", () => void boot());
}

function hideBanner(): void {
  banner.hidden = true;
  banner.innerHTML = "";
}

function restoreSession(): void {
  const raw = window.sessionStorage.getItem(STORAGE_KEY);
  if (raw === null) {
    return;
  }
  try {
    const saved = JSON.parse(raw) as { persona: string; sessionId: string | null };
    state.persona = saved.persona;
    state.sessionId = saved.sessionId;
  } catch {
    window.sessionStorage.removeItem(STORAGE_KEY);
  }
}

function persistSession(): void {
  window.sessionStorage.setItem(
    STORAGE_KEY,
    JSON.stringify({ persona: state.persona, sessionId: state.sessionId }),
  );
}

function setBusy(busy: boolean): void {
  sendBtn.disabled = busy;
  chatInput.disabled = busy;
}

async function boot(): Promise<void> {
  try {
    await client.health();
    restoreSession();
    const roster = await client.personas();
    personaSelect.innerHTML = renderPersonaOptions(
      roster.personas,
      state.persona,
    );
    hideBanner();
  } catch (error) {
    showBanner(
      error instanceof ApiError
        ? `service error: ${error.message}`
        : "service unreachable — is the copilot service running?",
    );
  }
}

personaSelect.addEventListener("change", () => {
  selectPersona(state, personaSelect.value);
  chatLog.innerHTML = "";
  persistSession();
});

chatForm.addEventListener("submit", (event) => {
  event.preventDefault();
  const message = chatInput.value.trim();
  if (message === "" || state.inFlight) {
    return;
  }
  setBusy(true);
  sendMessage(state, client, message)
    .then((response) => {
      chatInput.value = "";
      chatLog.insertAdjacentHTML("beforeend", renderExchange(message, response));
      persistSession();
    })
    .catch((error) => {
      if (error instanceof ApiError) {
        chatLog.insertAdjacentHTML("beforeend", renderChatError(error.message));
      } else {
        showBanner("service unreachable — is the copilot service running?");
      }
    })
    .finally(() => {
      setBusy(false);
      chatLog.scrollTop = chatLog.scrollHeight;
    });
});

compareForm.addEventListener("submit", (event) => {
  event.preventDefault();
  const counties = [countyA.value.trim(), countyB.value.trim()].filter(
    (c) => c !== "",
  );
  if (counties.length === 0) {
    return;
  }
  void Promise.allSettled(
    counties.map((county) => loadCountyCard(client, county)),
  ).then((outcomes) => {
    const cards = outcomes.map((outcome, i) => {
      if (outcome.status === "fulfilled") {
        return renderCompareCard(outcome.value);
      }
      const reason = outcome.reason;
      if (reason instanceof ApiError) {
        return renderCompareError(counties[i], reason.message);
      }
      showBanner("service unreachable — is the copilot service running?");
      return renderCompareError(counties[i], "request failed");
    });
    compareCards.innerHTML = cards.join("");
  });
});

compareCards.addEventListener("click", (event) => {
  const button = (event.target as HTMLElement).closest<HTMLButtonElement>(
    ".detail-btn",
  );
  if (button === null) {
    return;
  }
  const card = button.closest<HTMLElement>(".county-card")!;
  const detail = card.querySelector<HTMLDivElement>(".county-detail")!;
  loadCountyRecord(client, button.dataset.county ?? "")
    .then((record) => {
      detail.innerHTML = renderCountyDetail(record);
    })
    .catch((error) => {
      detail.innerHTML = `<p class="inline-error">${
        error instanceof ApiError ? error.message : "request failed"
      }</p>`;
    });
});

void boot();

/**
 * Chat session state.
 *
 * The UI is stateless beyond the session id: the server keeps the
 * conversation history, so reloading with the same id continues the same
 * session.  One chat request may be in flight per session; the send path
 * guards against overlap.  Switching persona starts a fresh session, since
 * the server pins each session to the persona it was opened with.
 */

import type { CopilotClient } from "./api.js";
import type { ChatResponse } from "./types.js";

export interface Exchange {
  prompt: string;
  response: ChatResponse;
}

export interface ChatState {
  persona: string;
  sessionId: string | null;
  inFlight: boolean;
  exchanges: Exchange[];
}

export function initialState(persona = "default"): ChatState {
  return { persona, sessionId: null, inFlight: false, exchanges: [] };
}

/** Switch roles; any ongoing session is abandoned for a fresh one. */
export function selectPersona(state: ChatState, role: string): void {
  if (role !== state.persona) {
    state.persona = role;
    state.sessionId = null;
    state.exchanges = [];
  }
}

/**
 * Send one message in the current session and record the exchange.
 * Rejects immediately if a request is already in flight.
 */
export async function sendMessage(
  state: ChatState,
  client: CopilotClient,
  message: string,
): Promise<ChatResponse> {
  if (state.inFlight) {
    throw new Error("a chat request is already in flight for this session");
  }
  state.inFlight = true;
  try {
    const response = await client.chat(message, state.persona, state.sessionId);
    state.sessionId = response.session_id;
    state.exchanges.push({ prompt: message, response });
    return response;
  } finally {
    state.inFlight = false;
  }
}

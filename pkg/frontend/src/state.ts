// Pure feedback logic: server messages go in, a new UI state plus a list of
// effects comes out.  The DOM layer only executes effects; it never decides
// anything itself, so every selection shown on screen traces back to a
// SELECTED message from the gateway.

import type { CommandName, DwellEntry, ServerMsg } from "./protocol.js";

export type Phase = "BROWSING" | "SELECTING";

export interface UiState {
  connected: boolean;
  phase: Phase;
  dwells: DwellEntry[] | null;
  flashButton: CommandName | null;
  selectedLink: number | null;
  lastSelection: { link: number; fromPage: string } | null;
  lastError: string | null;
}

export function initialState(): UiState {
  return {
    connected: false,
    phase: "BROWSING",
    dwells: null,
    flashButton: null,
    selectedLink: null,
    lastSelection: null,
    lastError: null,
  };
}

export type Effect =
  | { kind: "flash-button"; name: CommandName }
  | { kind: "show-dwells"; links: DwellEntry[] }
  | { kind: "highlight-link"; id: number }
  | { kind: "navigate-link"; id: number }
  | { kind: "navigate-back" }
  | { kind: "navigate-forward" }
  | { kind: "undo-navigation" }
  | { kind: "show-error"; code: string; msg: string };

export interface Step {
  state: UiState;
  effects: Effect[];
}

/** Apply one server message. `currentPage` is the page id shown right now. */
export function applyServer(state: UiState, msg: ServerMsg, currentPage: string): Step {
  switch (msg.type) {
    case "ACK": {
      const effects: Effect[] = [];
      let next = state;
      if (msg.cancelled_link !== undefined) {
        effects.push({ kind: "undo-navigation" });
        next = { ...state, selectedLink: null, lastSelection: null };
      }
      return { state: next, effects };
    }
    case "COMMAND":
      return applyCommand(state, msg.name, msg.cancelled_link);
    case "DWELLS":
      return {
        state: { ...state, phase: "SELECTING", dwells: msg.links, selectedLink: null },
        effects: [{ kind: "show-dwells", links: msg.links }],
      };
    case "SELECTED":
      return {
        state: {
          ...state,
          phase: "BROWSING",
          dwells: null,
          selectedLink: msg.id,
          lastSelection: { link: msg.id, fromPage: currentPage },
        },
        effects: [
          { kind: "highlight-link", id: msg.id },
          { kind: "navigate-link", id: msg.id },
        ],
      };
    case "ERROR":
      return {
        state: { ...state, lastError: `${msg.code}: ${msg.msg}` },
        effects: [{ kind: "show-error", code: msg.code, msg: msg.msg }],
      };
    default:
      // Unknown message: log-and-ignore is the caller's job; state unchanged.
      return { state, effects: [] };
  }
}

function applyCommand(state: UiState, name: CommandName, cancelledLink?: number): Step {
  const effects: Effect[] = [{ kind: "flash-button", name }];
  switch (name) {
    case "SELECT":
      // The DWELLS message that follows carries the data; just flash.
      return { state: { ...state, flashButton: name }, effects };
    case "BACK":
      effects.push({ kind: "navigate-back" });
      return { state: { ...state, flashButton: name }, effects };
    case "FORWARD":
      effects.push({ kind: "navigate-forward" });
      return { state: { ...state, flashButton: name }, effects };
    case "CANCEL": {
      let next: UiState = { ...state, flashButton: name };
      if (next.phase === "SELECTING") {
        // Selection phase abandoned; nothing had been selected yet.
        next = { ...next, phase: "BROWSING", dwells: null };
      } else if (cancelledLink !== undefined || next.lastSelection !== null) {
        effects.push({ kind: "undo-navigation" });
        next = { ...next, selectedLink: null, lastSelection: null };
      }
      return { state: next, effects };
    }
  }
}

// gdw/1 wire messages between this client and the session gateway.
// One JSON object per WebSocket text frame, tagged by "type".

export const PROTOCOL_VERSION = "gdw/1";

export type CommandName = "BACK" | "SELECT" | "CANCEL" | "FORWARD";

export interface LinkBox {
  id: number;
  left: number;
  top: number;
  width: number;
  height: number;
  label?: string;
}

export interface ButtonBox {
  command: CommandName;
  left: number;
  top: number;
  width: number;
  height: number;
}

export interface LayoutPayload {
  screen: [number, number];
  links: LinkBox[];
  buttons?: ButtonBox[];
}

export type ClientMsg =
  | { type: "HELLO"; protocol_version: string }
  | { type: "PAGE_LAYOUT"; layout: LayoutPayload }
  | { type: "GAZE"; t: number; x: number; y: number }
  | { type: "CANCEL" }
  | { type: "RESET" };

export interface DwellEntry {
  id: number;
  n: number;
  t_ms: number;
  p?: number;
}

export type ServerMsg =
  | { type: "ACK"; what: string; cancelled_link?: number; protocol_version?: string; links?: number }
  | { type: "DWELLS"; links: DwellEntry[] }
  | { type: "COMMAND"; name: CommandName; t: number; cancelled_link?: number }
  | { type: "SELECTED"; id: number; t: number; response_time_ms: number }
  | { type: "ERROR"; code: string; msg: string };

const SERVER_TYPES = new Set(["ACK", "DWELLS", "COMMAND", "SELECTED", "ERROR"]);

export function encode(msg: ClientMsg): string {
  return JSON.stringify(msg);
}

/** Parse one server frame; null for anything we do not understand. */
export function decodeServer(text: string): ServerMsg | null {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const type = (obj as { type?: unknown }).type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) return null;
  return obj as ServerMsg;
}

export function hello(): ClientMsg {
  return { type: "HELLO", protocol_version: PROTOCOL_VERSION };
}

export function gaze(t: number, x: number, y: number): ClientMsg {
  return { type: "GAZE", t, x, y };
}

export function pageLayout(layout: LayoutPayload): ClientMsg {
  return { type: "PAGE_LAYOUT", layout };
}

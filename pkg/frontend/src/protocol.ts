// Message and command types for the session protocol. Over WebSocket each
// record is one text message; the server stamps a strictly increasing "seq"
// on everything it sends on a connection.

export const PROTOCOL_VERSION = 1;

export type Mode = "niec" | "hiec";

export interface TileInfo {
  id: string;
  entries: number;
  particles: number;
  created_step: number;
}

export interface TileFrame {
  tile: string;
  size: number;
  positions: [number, number][];
  colors: string[];
}

export interface SessionCreatedMsg {
  type: "session_created";
  seq: number;
  session: string;
  mode: Mode;
  seed: number;
}

export interface SessionStateMsg {
  type: "session_state";
  seq: number;
  session: string;
  mode: Mode;
  paused: boolean;
  steps_per_second: number;
  step: number;
  seed: number;
  tiles: TileInfo[];
}

export interface TileFramesMsg {
  type: "tile_frames";
  seq: number;
  session: string;
  step: number;
  frames: TileFrame[];
}

export interface OperatorAckMsg {
  type: "operator_ack";
  seq: number;
  session: string;
  op: string;
  args: unknown[];
  result_ids: string[];
}

export interface RecipeTextMsg {
  type: "recipe_text";
  seq: number;
  session: string;
  tile: string;
  text: string;
}

export interface ErrorMsg {
  type: "error";
  seq: number;
  session?: string;
  message: string;
}

export type ServerMessage =
  | SessionCreatedMsg
  | SessionStateMsg
  | TileFramesMsg
  | OperatorAckMsg
  | RecipeTextMsg
  | ErrorMsg;

export type Command =
  | { cmd: "create_session"; mode: Mode; tile_count: number; seed?: number }
  | { cmd: "mutate"; session: string; tile: string }
  | { cmd: "mix"; session: string; a: string; b: string }
  | { cmd: "replicate"; session: string; tile: string }
  | { cmd: "kill"; session: string; tile: string }
  | { cmd: "random"; session: string }
  | { cmd: "niec_select"; session: string; tiles: string[] }
  | { cmd: "pause"; session: string }
  | { cmd: "resume"; session: string }
  | { cmd: "set_speed"; session: string; steps_per_second: number }
  | { cmd: "subscribe_frames"; session: string; enabled: boolean }
  | { cmd: "get_recipe"; session: string; tile: string };

export function encodeCommand(command: Command): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, ...command });
}

export function decodeMessage(data: string): ServerMessage | null {
  let parsed: unknown;
  try {
    parsed = JSON.parse(data);
  } catch {
    return null;
  }
  if (typeof parsed !== "object" || parsed === null) return null;
  const msg = parsed as Record<string, unknown>;
  if (typeof msg.type !== "string" || typeof msg.seq !== "number") return null;
  switch (msg.type) {
    case "session_created":
    case "session_state":
    case "tile_frames":
    case "operator_ack":
    case "recipe_text":
    case "error":
      return msg as unknown as ServerMessage;
    default:
      return null;
  }
}

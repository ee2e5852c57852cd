// Pure UI state machine. All gesture and server-message handling flows
// through reduce(), which returns the next state plus the commands to send;
// the DOM layer stays a thin shell around it. Stale frames (sequence numbers
// at or below the last accepted one) are discarded, never reordered.

import type { Command, Mode, ServerMessage, TileFrame, TileInfo } from "./protocol.js";

export interface UiState {
  session: string | null;
  mode: Mode | null;
  paused: boolean;
  stepsPerSecond: number;
  step: number;
  tiles: TileInfo[];
  frames: Record<string, TileFrame>;
  selection: string[];
  notice: string | null;
  recipeText: string | null;
  recipeTile: string | null;
  lastSeq: number;
}

export type Gesture =
  | { kind: "tile_click"; tile: string }
  | { kind: "tile_dblclick"; tile: string }
  | { kind: "replicate" }
  | { kind: "kill" }
  | { kind: "random" }
  | { kind: "next_generation" }
  | { kind: "toggle_pause" }
  | { kind: "set_speed"; stepsPerSecond: number }
  | { kind: "inspect" }
  | { kind: "clear_selection" };

export type UiEvent =
  | { kind: "server"; message: ServerMessage }
  | { kind: "gesture"; gesture: Gesture };

export interface ReduceResult {
  state: UiState;
  commands: Command[];
}

export function initialState(): UiState {
  return {
    session: null,
    mode: null,
    paused: false,
    stepsPerSecond: 20,
    step: 0,
    tiles: [],
    frames: {},
    selection: [],
    notice: null,
    recipeText: null,
    recipeTile: null,
    lastSeq: 0,
  };
}

function knownTile(state: UiState, id: string): boolean {
  return state.tiles.some((t) => t.id === id);
}

function pruneToTiles(state: UiState): UiState {
  const ids = new Set(state.tiles.map((t) => t.id));
  const frames: Record<string, TileFrame> = {};
  for (const [id, frame] of Object.entries(state.frames)) {
    if (ids.has(id)) frames[id] = frame;
  }
  return {
    ...state,
    frames,
    selection: state.selection.filter((id) => ids.has(id)),
    recipeTile: state.recipeTile && ids.has(state.recipeTile) ? state.recipeTile : null,
    recipeText: state.recipeTile && ids.has(state.recipeTile) ? state.recipeText : null,
  };
}

function reduceServer(state: UiState, message: ServerMessage): ReduceResult {
  if (message.seq <= state.lastSeq) {
    return { state, commands: [] };  // stale or replayed: drop
  }
  const next: UiState = { ...state, lastSeq: message.seq };
  switch (message.type) {
    case "session_created":
      return {
        state: { ...next, session: message.session, mode: message.mode },
        commands: [{ cmd: "subscribe_frames", session: message.session, enabled: true }],
      };
    case "session_state":
      return {
        state: pruneToTiles({
          ...next,
          mode: message.mode,
          paused: message.paused,
          stepsPerSecond: message.steps_per_second,
          step: message.step,
          tiles: message.tiles,
        }),
        commands: [],
      };
    case "tile_frames": {
      const frames = { ...next.frames };
      for (const frame of message.frames) {
        frames[frame.tile] = frame;
      }
      return { state: { ...next, step: message.step, frames }, commands: [] };
    }
    case "recipe_text":
      return {
        state: { ...next, recipeTile: message.tile, recipeText: message.text },
        commands: [],
      };
    case "operator_ack":
      return { state: next, commands: [] };
    case "error":
      // any server error returns the UI to idle-selected-none
      return {
        state: { ...next, selection: [], notice: message.message },
        commands: [],
      };
  }
}

function reduceClick(state: UiState, tile: string): ReduceResult {
  if (!state.session || !knownTile(state, tile)) {
    return { state, commands: [] };
  }
  if (state.mode === "niec") {
    // toggle membership; at most two selected at once
    if (state.selection.includes(tile)) {
      return {
        state: { ...state, selection: state.selection.filter((t) => t !== tile) },
        commands: [],
      };
    }
    if (state.selection.length >= 2) {
      return { state, commands: [] };
    }
    return { state: { ...state, selection: [...state.selection, tile] }, commands: [] };
  }
  // HIEC: first click arms, second click on a distinct tile mixes
  if (state.selection.length === 0) {
    return { state: { ...state, selection: [tile], notice: null }, commands: [] };
  }
  const first = state.selection[0];
  if (first === tile) {
    return {
      state: { ...state, selection: [], notice: "cannot mix a tile with itself" },
      commands: [],
    };
  }
  return {
    state: { ...state, selection: [], notice: null },
    commands: [{ cmd: "mix", session: state.session, a: first, b: tile }],
  };
}

function reduceGesture(state: UiState, gesture: Gesture): ReduceResult {
  const session = state.session;
  switch (gesture.kind) {
    case "tile_click":
      return reduceClick(state, gesture.tile);
    case "tile_dblclick": {
      if (!session || state.mode !== "hiec" || !knownTile(state, gesture.tile)) {
        return { state, commands: [] };
      }
      return {
        state: { ...state, selection: [], notice: null },
        commands: [{ cmd: "mutate", session, tile: gesture.tile }],
      };
    }
    case "replicate":
    case "kill": {
      if (!session || state.mode !== "hiec") return { state, commands: [] };
      const target = state.selection[0];
      if (!target) {
        return { state: { ...state, notice: "select a tile first" }, commands: [] };
      }
      return {
        state: { ...state, selection: [], notice: null },
        commands: [{ cmd: gesture.kind, session, tile: target }],
      };
    }
    case "random":
      if (!session || state.mode !== "hiec") return { state, commands: [] };
      return { state, commands: [{ cmd: "random", session }] };
    case "next_generation": {
      if (!session || state.mode !== "niec") return { state, commands: [] };
      if (state.selection.length < 1 || state.selection.length > 2) {
        return { state: { ...state, notice: "select one or two tiles" }, commands: [] };
      }
      return {
        state: { ...state, selection: [], notice: null },
        commands: [{ cmd: "niec_select", session, tiles: [...state.selection] }],
      };
    }
    case "toggle_pause":
      if (!session) return { state, commands: [] };
      return {
        state,
        commands: [{ cmd: state.paused ? "resume" : "pause", session }],
      };
    case "set_speed":
      if (!session) return { state, commands: [] };
      return {
        state,
        commands: [{ cmd: "set_speed", session, steps_per_second: gesture.stepsPerSecond }],
      };
    case "inspect": {
      const target = state.selection[0];
      if (!session || !target) {
        return { state: { ...state, notice: "select a tile first" }, commands: [] };
      }
      return { state, commands: [{ cmd: "get_recipe", session, tile: target }] };
    }
    case "clear_selection":
      return { state: { ...state, selection: [], notice: null }, commands: [] };
  }
}

export function reduce(state: UiState, event: UiEvent): ReduceResult {
  return event.kind === "server"
    ? reduceServer(state, event.message)
    : reduceGesture(state, event.gesture);
}

// Wires the state machine to the DOM: a fixed grid of tile canvases, a
// toolbar for the operator buttons, and the recipe inspector panel.

import { SessionClient } from "./client.js";
import type { Command, Mode, ServerMessage } from "./protocol.js";
import { drawTile } from "./render.js";
import { initialState, reduce, type Gesture, type UiState } from "./state.js";

const DBLCLICK_GRACE_MS = 250;

let state: UiState = initialState();
let client: SessionClient | null = null;
let pendingClick: number | null = null;

const grid = document.getElementById("tile-grid") as HTMLDivElement;
const noticeEl = document.getElementById("notice") as HTMLDivElement;
const statusEl = document.getElementById("status") as HTMLDivElement;
const recipeEl = document.getElementById("recipe") as HTMLTextAreaElement;
const canvases = new Map<string, HTMLCanvasElement>();

function dispatchCommands(commands: Command[]): void {
  for (const command of commands) client?.send(command);
}

function onEvent(eventGesture: Gesture): void {
  const result = reduce(state, { kind: "gesture", gesture: eventGesture });
  state = result.state;
  dispatchCommands(result.commands);
  rebuildChrome();
}

function onServer(message: ServerMessage): void {
  const result = reduce(state, { kind: "server", message });
  const tilesChanged = result.state.tiles !== state.tiles;
  state = result.state;
  dispatchCommands(result.commands);
  if (tilesChanged) rebuildGrid();
  rebuildChrome();
  drawFrames();
}

function tileClicked(id: string): void {
  if (pendingClick !== null) window.clearTimeout(pendingClick);
  pendingClick = window.setTimeout(() => {
    pendingClick = null;
    onEvent({ kind: "tile_click", tile: id });
  }, DBLCLICK_GRACE_MS);
}

function tileDoubleClicked(id: string): void {
  if (pendingClick !== null) {
    window.clearTimeout(pendingClick);
    pendingClick = null;
  }
  onEvent({ kind: "tile_dblclick", tile: id });
}

function rebuildGrid(): void {
  grid.textContent = "";
  canvases.clear();
  for (const tile of state.tiles) {
    const cell = document.createElement("div");
    cell.className = "tile";
    cell.dataset.tile = tile.id;
    const canvas = document.createElement("canvas");
    canvas.width = 220;
    canvas.height = 220;
    canvas.addEventListener("click", () => tileClicked(tile.id));
    canvas.addEventListener("dblclick", () => tileDoubleClicked(tile.id));
    const label = document.createElement("div");
    label.className = "tile-label";
    label.textContent = `${tile.id} (${tile.entries} types, ${tile.particles}p)`;
    cell.append(canvas, label);
    grid.append(cell);
    canvases.set(tile.id, canvas);
  }
}

function rebuildChrome(): void {
  noticeEl.textContent = state.notice ?? "";
  statusEl.textContent = state.session
    ? `${state.mode} session ${state.session} - step ${state.step}` +
      `${state.paused ? " (paused)" : ""}`
    : "not connected";
  for (const [id, canvas] of canvases) {
    canvas.parentElement?.classList.toggle("selected", state.selection.includes(id));
  }
  if (state.recipeText !== null) {
    recipeEl.value = `# ${state.recipeTile}\n${state.recipeText}`;
  }
  document.getElementById("niec-tools")!.style.display =
    state.mode === "niec" ? "inline" : "none";
  document.getElementById("hiec-tools")!.style.display =
    state.mode === "hiec" ? "inline" : "none";
}

function drawFrames(): void {
  for (const [id, canvas] of canvases) {
    drawTile(canvas, state.frames[id]);
  }
}

function connect(): void {
  const url = (document.getElementById("server-url") as HTMLInputElement).value;
  const mode = (document.getElementById("mode") as HTMLSelectElement).value as Mode;
  const tileCount = Number((document.getElementById("tile-count") as HTMLInputElement).value);
  client?.close();
  state = initialState();
  client = new SessionClient(url, onServer, () => {
    state = initialState();
    rebuildGrid();
    rebuildChrome();
  });
  client.connect();
  client.whenOpen(() => {
    client?.send({ cmd: "create_session", mode, tile_count: tileCount });
  });
}

function bindToolbar(): void {
  const bind = (id: string, gesture: Gesture) =>
    document.getElementById(id)!.addEventListener("click", () => onEvent(gesture));
  document.getElementById("connect")!.addEventListener("click", connect);
  bind("replicate", { kind: "replicate" });
  bind("kill", { kind: "kill" });
  bind("random", { kind: "random" });
  bind("next-generation", { kind: "next_generation" });
  bind("pause", { kind: "toggle_pause" });
  bind("inspect", { kind: "inspect" });
  document.getElementById("speed")!.addEventListener("change", (event) => {
    const value = Number((event.target as HTMLInputElement).value);
    onEvent({ kind: "set_speed", stepsPerSecond: value });
  });
}

bindToolbar();
rebuildChrome();

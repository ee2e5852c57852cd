import { describe, expect, it } from "vitest";

import type { Command, ServerMessage, TileInfo } from "../src/protocol.js";
import { initialState, reduce, type Gesture, type UiEvent, type UiState } from "../src/state.js";

// deterministic PRNG for the randomized property runs
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function tile(id: string): TileInfo {
  return { id, entries: 1, particles: 10, created_step: 0 };
}

function applyAll(state: UiState, events: UiEvent[]): { state: UiState; commands: Command[] } {
  const commands: Command[] = [];
  for (const event of events) {
    const result = reduce(state, event);
    state = result.state;
    commands.push(...result.commands);
  }
  return { state, commands };
}

function createdSession(mode: "hiec" | "niec"): UiEvent[] {
  return [
    { kind: "server", message: { type: "session_created", seq: 1, session: "s1", mode, seed: 1 } },
    {
      kind: "server",
      message: {
        type: "session_state", seq: 2, session: "s1", mode, paused: false,
        steps_per_second: 20, step: 0, seed: 1,
        tiles: [tile("t0"), tile("t1"), tile("t2")],
      },
    },
  ];
}

describe("gesture mapping", () => {
  it("double-click issues mutate", () => {
    const { state } = applyAll(initialState(), createdSession("hiec"));
    const result = reduce(state, { kind: "gesture", gesture: { kind: "tile_dblclick", tile: "t1" } });
    expect(result.commands).toEqual([{ cmd: "mutate", session: "s1", tile: "t1" }]);
  });

  it("two single clicks on distinct tiles issue mix and clear selection", () => {
    const base = applyAll(initialState(), createdSession("hiec")).state;
    const first = reduce(base, { kind: "gesture", gesture: { kind: "tile_click", tile: "t0" } });
    expect(first.commands).toEqual([]);
    expect(first.state.selection).toEqual(["t0"]);
    const second = reduce(first.state, { kind: "gesture", gesture: { kind: "tile_click", tile: "t2" } });
    expect(second.commands).toEqual([{ cmd: "mix", session: "s1", a: "t0", b: "t2" }]);
    expect(second.state.selection).toEqual([]);
  });

  it("clicking the same tile twice clears selection with a notice and no command", () => {
    const base = applyAll(initialState(), createdSession("hiec")).state;
    const first = reduce(base, { kind: "gesture", gesture: { kind: "tile_click", tile: "t0" } });
    const second = reduce(first.state, { kind: "gesture", gesture: { kind: "tile_click", tile: "t0" } });
    expect(second.commands).toEqual([]);
    expect(second.state.selection).toEqual([]);
    expect(second.state.notice).toBeTruthy();
  });

  it("niec selection feeds next_generation", () => {
    const base = applyAll(initialState(), createdSession("niec")).state;
    const { state } = applyAll(base, [
      { kind: "gesture", gesture: { kind: "tile_click", tile: "t0" } },
      { kind: "gesture", gesture: { kind: "tile_click", tile: "t2" } },
    ]);
    expect(state.selection).toEqual(["t0", "t2"]);
    const result = reduce(state, { kind: "gesture", gesture: { kind: "next_generation" } });
    expect(result.commands).toEqual([{ cmd: "niec_select", session: "s1", tiles: ["t0", "t2"] }]);
    expect(result.state.selection).toEqual([]);
  });

  it("replicate and kill act on the armed tile", () => {
    const base = applyAll(initialState(), createdSession("hiec")).state;
    const armed = reduce(base, { kind: "gesture", gesture: { kind: "tile_click", tile: "t1" } }).state;
    const result = reduce(armed, { kind: "gesture", gesture: { kind: "kill" } });
    expect(result.commands).toEqual([{ cmd: "kill", session: "s1", tile: "t1" }]);
  });
});

describe("server message handling", () => {
  it("session_state prunes selection and frames of vanished tiles", () => {
    const base = applyAll(initialState(), createdSession("hiec")).state;
    const armed = reduce(base, { kind: "gesture", gesture: { kind: "tile_click", tile: "t2" } }).state;
    const result = reduce(armed, {
      kind: "server",
      message: {
        type: "session_state", seq: 10, session: "s1", mode: "hiec", paused: false,
        steps_per_second: 20, step: 5, seed: 1, tiles: [tile("t0"), tile("t1")],
      },
    });
    expect(result.state.selection).toEqual([]);
    expect(Object.keys(result.state.frames)).toEqual([]);
  });

  it("errors reset selection to idle", () => {
    const base = applyAll(initialState(), createdSession("hiec")).state;
    const armed = reduce(base, { kind: "gesture", gesture: { kind: "tile_click", tile: "t0" } }).state;
    const result = reduce(armed, {
      kind: "server",
      message: { type: "error", seq: 11, session: "s1", message: "nope" },
    });
    expect(result.state.selection).toEqual([]);
    expect(result.state.notice).toBe("nope");
  });

  it("stale frames are discarded, never reordered", () => {
    const base = applyAll(initialState(), createdSession("hiec")).state;
    const fresh = reduce(base, {
      kind: "server",
      message: {
        type: "tile_frames", seq: 9, session: "s1", step: 4,
        frames: [{ tile: "t0", size: 300, positions: [[1, 1]], colors: ["#111111"] }],
      },
    });
    const stale = reduce(fresh.state, {
      kind: "server",
      message: {
        type: "tile_frames", seq: 3, session: "s1", step: 1,
        frames: [{ tile: "t0", size: 300, positions: [[9, 9]], colors: ["#222222"] }],
      },
    });
    expect(stale.state).toBe(fresh.state);
    expect(stale.state.frames["t0"].positions).toEqual([[1, 1]]);
  });
});

describe("randomized gesture/message sequences", () => {
  function randomEvents(rand: () => number, mode: "hiec" | "niec", count: number): UiEvent[] {
    const events: UiEvent[] = [...createdSession(mode)];
    let seq = 2;
    let tileCounter = 3;
    let tiles = ["t0", "t1", "t2"];
    for (let i = 0; i < count; i++) {
      const roll = rand();
      const anyTile = () =>
        rand() < 0.85 && tiles.length > 0
          ? tiles[Math.floor(rand() * tiles.length)]
          : `ghost${Math.floor(rand() * 5)}`;
      if (roll < 0.35) {
        const clicks: Gesture[] = [
          { kind: "tile_click", tile: anyTile() },
          { kind: "tile_dblclick", tile: anyTile() },
        ];
        events.push({ kind: "gesture", gesture: clicks[Math.floor(rand() * clicks.length)] });
      } else if (roll < 0.55) {
        const toolbar: Gesture[] = [
          { kind: "replicate" }, { kind: "kill" }, { kind: "random" },
          { kind: "next_generation" }, { kind: "toggle_pause" },
          { kind: "inspect" }, { kind: "clear_selection" },
          { kind: "set_speed", stepsPerSecond: 1 + Math.floor(rand() * 100) },
        ];
        events.push({ kind: "gesture", gesture: toolbar[Math.floor(rand() * toolbar.length)] });
      } else if (roll < 0.75) {
        // session_state: drop one tile or add one
        if (rand() < 0.5 && tiles.length > 1) {
          tiles = tiles.filter((_, k) => k !== Math.floor(rand() * tiles.length));
        } else {
          tiles = [...tiles, `t${tileCounter++}`];
        }
        seq += 1;
        events.push({
          kind: "server",
          message: {
            type: "session_state", seq, session: "s1", mode, paused: rand() < 0.2,
            steps_per_second: 20, step: i, seed: 1, tiles: tiles.map(tile),
          },
        });
      } else if (roll < 0.9) {
        // frames, sometimes stale
        const staleSeq = rand() < 0.3 ? Math.max(1, seq - 2) : (seq += 1, seq);
        events.push({
          kind: "server",
          message: {
            type: "tile_frames", seq: staleSeq, session: "s1", step: i,
            frames: tiles.slice(0, 2).map((id) => ({
              tile: id, size: 300, positions: [[rand() * 300, rand() * 300]] as [number, number][],
              colors: ["#336699"],
            })),
          },
        });
      } else {
        seq += 1;
        events.push({
          kind: "server",
          message: { type: "error", seq, session: "s1", message: "induced" },
        });
      }
    }
    return events;
  }

  it("selection never desyncs and self-mix is always rejected", () => {
    for (const mode of ["hiec", "niec"] as const) {
      for (let trial = 0; trial < 300; trial++) {
        const rand = mulberry32(trial * 2 + (mode === "hiec" ? 0 : 1));
        let state = initialState();
        let lastSeq = 0;
        for (const event of randomEvents(rand, mode, 60)) {
          const result = reduce(state, event);
          state = result.state;
          const known = new Set(state.tiles.map((t) => t.id));
          // selection invariants
          expect(state.selection.length).toBeLessThanOrEqual(mode === "niec" ? 2 : 1);
          for (const id of state.selection) expect(known.has(id)).toBe(true);
          expect(new Set(state.selection).size).toBe(state.selection.length);
          // command invariants
          for (const command of result.commands) {
            if (command.cmd === "mix") expect(command.a).not.toBe(command.b);
            if (command.cmd === "niec_select") {
              expect(command.tiles.length).toBeGreaterThanOrEqual(1);
              expect(command.tiles.length).toBeLessThanOrEqual(2);
              expect(new Set(command.tiles).size).toBe(command.tiles.length);
            }
          }
          // errors always return to idle selection
          if (event.kind === "server" && event.message.type === "error"
              && event.message.seq > lastSeq) {
            expect(state.selection).toEqual([]);
          }
          lastSeq = state.lastSeq;
        }
      }
    }
  });
});

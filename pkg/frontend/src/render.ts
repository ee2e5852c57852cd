// Canvas drawing for tile frames: white background, one small square per
// particle in its type color, selection ring drawn by CSS on the container.

import type { TileFrame } from "./protocol.js";

export function drawTile(canvas: HTMLCanvasElement, frame: TileFrame | undefined): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (!frame || frame.positions.length === 0) return;
  const scale = canvas.width / frame.size;
  for (let i = 0; i < frame.positions.length; i++) {
    const [x, y] = frame.positions[i];
    ctx.fillStyle = frame.colors[i] ?? "#000000";
    ctx.fillRect(x * scale - 1, y * scale - 1, 2, 2);
  }
}

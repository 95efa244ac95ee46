/**
 * Canvas painter for the timeline model. Deliberately thin: all
 * geometry comes from layout.ts, so this file only issues draw calls.
 */

import type { TimelineModel } from "./layout.js";

export function paint(ctx: CanvasRenderingContext2D, model: TimelineModel, width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);

  // timeline band
  ctx.fillStyle = "#55565a";
  ctx.fillRect(0, height / 2 - 32, width, 64);

  if (model.region) {
    ctx.fillStyle = "rgba(120, 190, 255, 0.25)";
    ctx.fillRect(model.region.x, 0, model.region.width, height);
  }

  for (const tick of model.ticks) {
    ctx.strokeStyle = tick.color;
    ctx.lineWidth = tick.division === 1 ? 2 : 1;
    ctx.beginPath();
    ctx.moveTo(tick.x, height / 2 - tick.heightPx / 2);
    ctx.lineTo(tick.x, height / 2 + tick.heightPx / 2);
    ctx.stroke();
  }

  for (const sprite of model.sprites) {
    ctx.beginPath();
    ctx.arc(sprite.x, sprite.y, sprite.radius, 0, Math.PI * 2);
    ctx.fillStyle = sprite.fill;
    ctx.fill();
    ctx.lineWidth = 2.5;
    ctx.strokeStyle = sprite.outline;
    ctx.stroke();
  }

  if (model.playheadX !== null) {
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(model.playheadX, 0);
    ctx.lineTo(model.playheadX, height);
    ctx.stroke();
  }
}

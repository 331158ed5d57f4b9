/**
 * Pure view model builder plus a thin canvas painter. The model is a
 * deterministic function of UiState, so headless tests can count and inspect
 * renders without a DOM; the painter just draws whatever model it is given.
 */

import { Stage } from "./protocol.js";
import { UiState } from "./state.js";

export type CellKind = "hazard" | "learner" | "teammate" | "prey" | "dead-prey";

export interface RenderModel {
  tick: number | null;
  banner: string;
  statusLine: string;
  grid: { width: number; height: number } | null;
  cells: { x: number; y: number; kind: CellKind }[];
  controller: "agent" | "human" | null;
  counters: { demos: number; interventions: number; feedback: number } | null;
  scoreHistory: number[];
  feedbackCount: number;
  hint: string | null;
  error: string | null;
}

const STAGE_LABELS: Record<Stage, string> = {
  demonstration: "DEMONSTRATION - you drive (arrows/space)",
  intervention: "INTERVENTION - press i to take over",
  evaluation: "EVALUATION - rate with + / -",
  rl: "REINFORCEMENT - autonomous (feedback logged only)",
};

export function buildRenderModel(state: UiState): RenderModel {
  const frame = state.frame;
  let banner = "waiting for the first frame";
  let grid: RenderModel["grid"] = null;
  const cells: RenderModel["cells"] = [];
  if (state.connection === "version-mismatch") {
    banner = "protocol version mismatch - update the client";
  } else if (state.done) {
    banner = "training cycle complete";
  } else if (frame !== null) {
    banner = `${STAGE_LABELS[frame.stage]} | episode ${frame.episode} step ${frame.step}`;
    grid = { width: frame.grid.width, height: frame.grid.height };
    for (const [x, y] of frame.grid.hazards) {
      cells.push({ x, y, kind: "hazard" });
    }
    for (const p of frame.grid.prey) {
      if (p.alive) {
        cells.push({ x: p.x, y: p.y, kind: "prey" });
      }
      // dead prey are not rendered
    }
    for (const p of frame.grid.predators) {
      cells.push({ x: p.x, y: p.y, kind: p.learner ? "learner" : "teammate" });
    }
  }
  const statusParts: string[] = [state.connection];
  if (state.paused) {
    statusParts.push("paused");
  }
  if (state.intervening) {
    statusParts.push("you have control");
  }
  return {
    tick: frame === null ? null : frame.tick,
    banner,
    statusLine: statusParts.join(" | "),
    grid,
    cells,
    controller: frame === null ? null : frame.controller,
    counters: frame === null ? null : frame.counters,
    scoreHistory: state.scoreHistory,
    feedbackCount: state.feedbackMarks.length,
    hint: state.hint,
    error: state.lastError,
  };
}

const COLORS: Record<CellKind, string> = {
  hazard: "#b3261e",
  learner: "#2d6ae3",
  teammate: "#7aa2e8",
  prey: "#2e9940",
  "dead-prey": "#bbbbbb",
};

/** Draws a RenderModel onto a canvas 2D context; no state of its own. */
export class CanvasPainter {
  constructor(
    private ctx: CanvasRenderingContext2D,
    private widthPx: number,
    private heightPx: number,
  ) {}

  paint(model: RenderModel): void {
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.widthPx, this.heightPx);
    if (model.grid === null) {
      return;
    }
    const cw = this.widthPx / model.grid.width;
    const ch = this.heightPx / model.grid.height;
    ctx.strokeStyle = "#dddddd";
    for (let x = 0; x <= model.grid.width; x++) {
      ctx.beginPath();
      ctx.moveTo(x * cw, 0);
      ctx.lineTo(x * cw, this.heightPx);
      ctx.stroke();
    }
    for (let y = 0; y <= model.grid.height; y++) {
      ctx.beginPath();
      ctx.moveTo(0, y * ch);
      ctx.lineTo(this.widthPx, y * ch);
      ctx.stroke();
    }
    for (const cell of model.cells) {
      ctx.fillStyle = COLORS[cell.kind];
      if (cell.kind === "hazard") {
        ctx.fillRect(cell.x * cw + 1, cell.y * ch + 1, cw - 2, ch - 2);
      } else {
        ctx.beginPath();
        ctx.arc((cell.x + 0.5) * cw, (cell.y + 0.5) * ch, Math.min(cw, ch) * 0.36, 0, 2 * Math.PI);
        ctx.fill();
      }
    }
  }
}

/** Tiny score sparkline for the side panel. */
export function paintScorePlot(
  ctx: CanvasRenderingContext2D,
  widthPx: number,
  heightPx: number,
  scores: number[],
): void {
  ctx.clearRect(0, 0, widthPx, heightPx);
  if (scores.length === 0) {
    return;
  }
  const lo = Math.min(0, ...scores);
  const hi = Math.max(1, ...scores);
  const sx = widthPx / Math.max(1, scores.length - 1);
  ctx.strokeStyle = "#2d6ae3";
  ctx.beginPath();
  scores.forEach((s, i) => {
    const y = heightPx - ((s - lo) / (hi - lo)) * (heightPx - 4) - 2;
    if (i === 0) {
      ctx.moveTo(0, y);
    } else {
      ctx.lineTo(i * sx, y);
    }
  });
  ctx.stroke();
}

/**
 * Browser wiring: canvas, banners, counters, score plot, key handling, and a
 * reconnect prompt. All logic lives in the DOM-free modules; this file only
 * moves data between them and the page.
 */

import { SessionClient } from "./client.js";
import { CanvasPainter, paintScorePlot, RenderModel } from "./render.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function start(): void {
  const gridCanvas = el<HTMLCanvasElement>("grid");
  const plotCanvas = el<HTMLCanvasElement>("plot");
  const banner = el<HTMLDivElement>("banner");
  const status = el<HTMLDivElement>("status");
  const counters = el<HTMLDivElement>("counters");
  const hintBox = el<HTMLDivElement>("hint");
  const reconnect = el<HTMLButtonElement>("reconnect");

  const painter = new CanvasPainter(
    gridCanvas.getContext("2d")!,
    gridCanvas.width,
    gridCanvas.height,
  );
  const plotCtx = plotCanvas.getContext("2d")!;

  const draw = (model: RenderModel) => {
    banner.textContent = model.banner;
    status.textContent = model.statusLine + (model.controller ? ` | controller: ${model.controller}` : "");
    if (model.counters) {
      counters.textContent =
        `demos ${model.counters.demos} | interventions ${model.counters.interventions}` +
        ` | feedback ${model.counters.feedback}`;
    }
    hintBox.textContent = model.hint ?? model.error ?? "";
    painter.paint(model);
    paintScorePlot(plotCtx, plotCanvas.width, plotCanvas.height, model.scoreHistory);
    reconnect.style.display =
      model.statusLine.startsWith("disconnected") ? "inline-block" : "none";
  };

  const client = new SessionClient((url) => new WebSocket(url) as never, draw);
  const url = new URLSearchParams(location.search).get("server") ?? "ws://127.0.0.1:8765";
  client.connect(url);
  reconnect.onclick = () => client.connect(url);

  window.addEventListener("keydown", (ev) => {
    if (ev.key in { ArrowUp: 1, ArrowDown: 1, ArrowLeft: 1, ArrowRight: 1, " ": 1 }) {
      ev.preventDefault();
    }
    client.pressKey(ev.key);
  });
}

window.addEventListener("DOMContentLoaded", start);

// Wiring: two reconnecting WebSocket streams merged into one ViewModel.

import { PredictionResult, parseWireFrame } from "./protocol.js";
import { drawFrame, renderResult } from "./render.js";
import {
  ExplanationLevel, ViewModel, applyFrameSeq, applyResult, applySocketClosed,
  applySocketOpen, initialViewModel, tick,
} from "./viewmodel.js";

const RECONNECT_MS = 1000;
const TICK_MS = 250;

let vm: ViewModel = initialViewModel();

function update(next: ViewModel): void {
  vm = next;
  renderResult(vm, document);
}

function wsBase(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}`;
}

function connectResults(): void {
  const ws = new WebSocket(`${wsBase()}/results`);
  ws.onopen = () => update(applySocketOpen(vm));
  ws.onmessage = (ev) => {
    try {
      const result = JSON.parse(ev.data) as PredictionResult;
      update(applyResult(vm, result, Date.now()));
    } catch {
      // non-JSON frames are not ours to interpret
    }
  };
  ws.onclose = () => {
    update(applySocketClosed(vm));
    setTimeout(connectResults, RECONNECT_MS);
  };
}

function connectFrames(): void {
  const canvas = document.getElementById("video") as HTMLCanvasElement;
  const ws = new WebSocket(`${wsBase()}/frames?mode=latest`);
  ws.binaryType = "arraybuffer";
  ws.onmessage = (ev) => {
    try {
      const frame = parseWireFrame(ev.data as ArrayBuffer);
      drawFrame(frame, canvas);
      update(applyFrameSeq(vm, frame.header.seq));
    } catch {
      // a malformed frame is dropped; the next one redraws
    }
  };
  ws.onclose = () => setTimeout(connectFrames, RECONNECT_MS);
}

function wireExplanationToggle(): void {
  for (const radio of document.querySelectorAll<HTMLInputElement>("input[name=level]")) {
    radio.onchange = () => {
      update({ ...vm, explanationLevel: radio.value as ExplanationLevel });
    };
  }
}

connectResults();
connectFrames();
wireExplanationToggle();
setInterval(() => update(tick(vm, Date.now())), TICK_MS);
renderResult(vm, document);

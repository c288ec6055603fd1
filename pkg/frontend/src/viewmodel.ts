// One state object merged from the two message streams, plus the client-side
// rules: latest-wins (never show an older result than what's on screen),
// staleness after 3 s of silence, explanation-level gating.

import { Banner, Concept, PredictionResult, classifyResult } from "./protocol.js";

export type ConnectionState = "connecting" | "live" | "stale" | "offline";
export type ExplanationLevel = "full" | "verdict-only" | "off";

export const STALE_AFTER_MS = 3000;

export interface ViewModel {
  connection: ConnectionState;
  latestResult: PredictionResult | null;
  lastResultAtMs: number | null;
  latestFrameSeq: number | null;
  explanationLevel: ExplanationLevel;
}

export function initialViewModel(): ViewModel {
  return {
    connection: "connecting",
    latestResult: null,
    lastResultAtMs: null,
    latestFrameSeq: null,
    explanationLevel: "full",
  };
}

export function applyResult(vm: ViewModel, result: PredictionResult,
                            nowMs: number): ViewModel {
  if (vm.latestResult && result.frame_seq < vm.latestResult.frame_seq) {
    return vm; // latest-wins on the client too
  }
  return { ...vm, latestResult: result, lastResultAtMs: nowMs, connection: "live" };
}

export function applyFrameSeq(vm: ViewModel, seq: number): ViewModel {
  return { ...vm, latestFrameSeq: seq };
}

export function applySocketOpen(vm: ViewModel): ViewModel {
  // "live" is earned by the first message; open alone only ends "offline"
  return { ...vm, connection: vm.lastResultAtMs === null ? "connecting" : vm.connection };
}

export function applySocketClosed(vm: ViewModel): ViewModel {
  return { ...vm, connection: "offline" };
}

export function tick(vm: ViewModel, nowMs: number): ViewModel {
  if (vm.connection === "live" && vm.lastResultAtMs !== null
      && nowMs - vm.lastResultAtMs > STALE_AFTER_MS) {
    return { ...vm, connection: "stale" };
  }
  return vm;
}

export function banner(vm: ViewModel): Banner | null {
  if (vm.explanationLevel === "off" || vm.latestResult === null) {
    return null;
  }
  return classifyResult(vm.latestResult);
}

export function visibleConcepts(vm: ViewModel): Concept[] {
  if (vm.explanationLevel !== "full" || vm.latestResult === null) {
    return [];
  }
  if (classifyResult(vm.latestResult).kind === "offline") {
    return [];
  }
  return vm.latestResult.concepts;
}

export function freezeBadge(vm: ViewModel): boolean {
  return vm.latestResult?.frozen ?? false;
}

export function seqMismatch(vm: ViewModel): boolean {
  // surfaced so an operator can see when the shown prediction lags the video
  return (vm.latestFrameSeq !== null && vm.latestResult !== null
          && vm.latestFrameSeq !== vm.latestResult.frame_seq);
}

// Message schemas shared with the gateway (docs/engine-protocol.md) and the
// pure display logic derived from them. Everything here is DOM-free so it can
// run under vitest against the recorded fixtures with no live gateway.

export const RESULT_VERSION = 1;

export interface Concept {
  name: string;
  present: boolean;
  score: number;
}

export interface PredictionResult {
  result_version: number;
  frame_seq: number;
  t_capture_ns: number;
  engine: string;
  status: string; // "ok" | "engine_unavailable" | "timeout" | "engine_error"
  error: string | null;
  verdict: string; // "standard_plane" | "near_standard_plane" | "unknown_plane"
  plane: string;
  concepts: Concept[];
  t_submit_ns: number;
  t_result_ns: number;
  engine_ms: number;
  frozen: boolean;
}

export interface FrameHeader {
  seq: number;
  t_capture_ns: number;
  t_wall_ns: number;
  width: number;
  height: number;
  pixel_format: string; // "GRAY8" | "RGB8" | "JPEG"
}

export interface WireFrame {
  header: FrameHeader;
  payload: Uint8Array;
}

const MAGIC = [0x4c, 0x47, 0x46, 0x31]; // "LGF1"

export function parseWireFrame(buffer: ArrayBuffer): WireFrame {
  const bytes = new Uint8Array(buffer);
  if (bytes.length < 8 || MAGIC.some((b, i) => bytes[i] !== b)) {
    throw new Error("bad magic: expected LGF1");
  }
  const headerLen = new DataView(buffer).getUint32(4, false);
  if (bytes.length < 8 + headerLen) {
    throw new Error("truncated header");
  }
  const headerText = new TextDecoder().decode(bytes.subarray(8, 8 + headerLen));
  const header = JSON.parse(headerText) as FrameHeader;
  const payload = bytes.subarray(8 + headerLen);
  if (header.pixel_format === "GRAY8" && payload.length !== header.width * header.height) {
    throw new Error("payload length mismatch");
  }
  if (header.pixel_format === "RGB8" && payload.length !== 3 * header.width * header.height) {
    throw new Error("payload length mismatch");
  }
  return { header, payload };
}

export type BannerKind =
  | "green"            // standard plane
  | "amber"            // close to a standard plane
  | "gray"             // unknown plane
  | "offline"          // marker result: the engine is not answering
  | "version-mismatch";

export interface Banner {
  kind: BannerKind;
  label: string;
  detail: string;
}

export function classifyResult(result: PredictionResult): Banner {
  if (result.result_version !== RESULT_VERSION) {
    return {
      kind: "version-mismatch",
      label: "Incompatible gateway",
      detail: `result_version ${result.result_version}, viewer speaks ${RESULT_VERSION}`,
    };
  }
  if (result.status !== "ok") {
    return {
      kind: "offline",
      label: "Engine offline",
      detail: result.error ?? result.status,
    };
  }
  switch (result.verdict) {
    case "standard_plane":
      return { kind: "green", label: `Standard plane: ${result.plane}`, detail: "" };
    case "near_standard_plane":
      return { kind: "amber", label: `Close to standard plane: ${result.plane}`, detail: "" };
    default:
      return { kind: "gray", label: "Unknown plane", detail: "" };
  }
}

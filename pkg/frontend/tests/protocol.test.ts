// Fixture replay: the recorded gateway messages under testdata/ drive the
// display logic with no live gateway.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, test } from "vitest";

import { PredictionResult, classifyResult, parseWireFrame } from "../src/protocol.js";

const ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");
const VIEWER_FIXTURES = join(ROOT, "testdata", "viewer");
const PROTO_VECTORS = join(ROOT, "testdata", "protocol");

function loadResults(): PredictionResult[] {
  return JSON.parse(readFileSync(join(VIEWER_FIXTURES, "results_fixture.json"), "utf-8"));
}

describe("recorded results fixture", () => {
  const results = loadResults();

  test("standard plane renders the green banner", () => {
    const banner = classifyResult(results[0]);
    expect(banner.kind).toBe("green");
    expect(banner.label).toContain("head");
  });

  test("near standard plane renders the amber banner", () => {
    expect(classifyResult(results[1]).kind).toBe("amber");
  });

  test("unknown plane renders the gray banner", () => {
    expect(classifyResult(results[2]).kind).toBe("gray");
  });

  test("marker results render the offline banner, never a stale verdict", () => {
    const unavailable = classifyResult(results[3]);
    expect(unavailable.kind).toBe("offline");
    expect(unavailable.label).toBe("Engine offline");
    expect(unavailable.detail).toContain("not connected");
    expect(classifyResult(results[4]).kind).toBe("offline"); // timeout marker
  });

  test("a result_version 2 message renders the version-mismatch banner", () => {
    const mismatch = classifyResult(results[5]);
    expect(mismatch.kind).toBe("version-mismatch");
    expect(mismatch.detail).toContain("result_version 2");
  });
});

describe("wireframe parsing", () => {
  function readBin(path: string): ArrayBuffer {
    const buf = readFileSync(path);
    return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
  }

  test("parses the viewer frame fixture", () => {
    const frame = parseWireFrame(readBin(join(VIEWER_FIXTURES, "frame_fixture.bin")));
    expect(frame.header.seq).toBe(12);
    expect(frame.header.width).toBe(16);
    expect(frame.header.height).toBe(16);
    expect(frame.header.pixel_format).toBe("GRAY8");
    expect(frame.payload.length).toBe(16 * 16);
  });

  test("agrees with the shared protocol vectors byte for byte", () => {
    for (const name of ["wireframe_gray8_2x2", "wireframe_rgb8_1x1",
                        "wireframe_gradient_16x16"]) {
      const frame = parseWireFrame(readBin(join(PROTO_VECTORS, `${name}.bin`)));
      const meta = JSON.parse(
        readFileSync(join(PROTO_VECTORS, `${name}.json`), "utf-8"));
      expect(frame.header.seq).toBe(meta.seq);
      expect(frame.header.pixel_format).toBe(meta.pixel_format);
      expect(Buffer.from(frame.payload).toString("hex")).toBe(meta.payload_hex);
    }
  });

  test("rejects junk", () => {
    expect(() => parseWireFrame(new Uint8Array([1, 2, 3, 4]).buffer)).toThrow(/magic/);
    const gray = readBin(join(PROTO_VECTORS, "wireframe_gray8_2x2.bin"));
    expect(() => parseWireFrame(gray.slice(0, gray.byteLength - 1))).toThrow(/mismatch/);
  });
});

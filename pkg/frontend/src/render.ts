// Thin DOM layer: everything it shows comes from viewmodel.ts selectors.

import { WireFrame } from "./protocol.js";
import { ViewModel, banner, freezeBadge, seqMismatch, visibleConcepts } from "./viewmodel.js";

const BANNER_CLASS: Record<string, string> = {
  green: "banner-green",
  amber: "banner-amber",
  gray: "banner-gray",
  offline: "banner-offline",
  "version-mismatch": "banner-error",
};

export function renderResult(vm: ViewModel, root: Document): void {
  const bannerEl = root.getElementById("banner")!;
  const detailEl = root.getElementById("banner-detail")!;
  const conceptsEl = root.getElementById("concepts")!;
  const statusEl = root.getElementById("connection")!;
  const freezeEl = root.getElementById("freeze-badge")!;
  const seqEl = root.getElementById("seq-info")!;

  const b = banner(vm);
  if (b === null) {
    bannerEl.className = "banner banner-none";
    bannerEl.textContent = vm.latestResult ? "" : "Waiting for predictions…";
    detailEl.textContent = "";
  } else {
    bannerEl.className = `banner ${BANNER_CLASS[b.kind]}`;
    bannerEl.textContent = b.label;
    detailEl.textContent = b.detail;
  }

  conceptsEl.replaceChildren();
  for (const concept of visibleConcepts(vm)) {
    const li = root.createElement("li");
    li.className = concept.present ? "concept present" : "concept absent";
    li.textContent = `${concept.present ? "✓" : "✗"} ${concept.name} ` +
      `(${concept.score.toFixed(2)})`;
    conceptsEl.appendChild(li);
  }

  statusEl.textContent = vm.connection;
  statusEl.className = `connection ${vm.connection}`;
  freezeEl.hidden = !freezeBadge(vm);
  const resultSeq = vm.latestResult?.frame_seq ?? "–";
  const frameSeq = vm.latestFrameSeq ?? "–";
  seqEl.textContent = `frame ${frameSeq} / result ${resultSeq}` +
    (seqMismatch(vm) ? " (lagging)" : "");
}

export function drawFrame(frame: WireFrame, canvas: HTMLCanvasElement): void {
  const { header, payload } = frame;
  canvas.width = header.width;
  canvas.height = header.height;
  const ctx = canvas.getContext("2d")!;
  if (header.pixel_format === "JPEG") {
    const blob = new Blob([payload.slice().buffer], { type: "image/jpeg" });
    createImageBitmap(blob).then((bitmap) => {
      ctx.drawImage(bitmap, 0, 0);
      bitmap.close();
    });
    return;
  }
  const image = ctx.createImageData(header.width, header.height);
  const rgba = image.data;
  if (header.pixel_format === "GRAY8") {
    for (let i = 0; i < payload.length; i++) {
      const v = payload[i];
      rgba[4 * i] = v;
      rgba[4 * i + 1] = v;
      rgba[4 * i + 2] = v;
      rgba[4 * i + 3] = 255;
    }
  } else { // RGB8
    for (let i = 0; i < payload.length / 3; i++) {
      rgba[4 * i] = payload[3 * i];
      rgba[4 * i + 1] = payload[3 * i + 1];
      rgba[4 * i + 2] = payload[3 * i + 2];
      rgba[4 * i + 3] = 255;
    }
  }
  ctx.putImageData(image, 0, 0);
}

/**
 * DOM wiring for the studio: canvas stack (image, mask overlay, strokes),
 * toolbar, and the preview player. All engine interaction goes through
 * EditorState / EngineClient; painting happens at full image resolution.
 */

import { EngineClient } from "./api";
import { EditorState } from "./editor";
import type { Point } from "./maskLayer";
import { LoopPlayer } from "./player";
import { encodeRgbPng } from "./pngWriter";
import { StrokeRecorder, removeStroke, strokesFromDirections } from "./strokes";

const client = new EngineClient("");
const editor = new EditorState(client);

type Tool = "brush" | "erase" | "polygon" | "stroke";
let tool: Tool = "brush";
let brushSize = 14;
let polygonPoints: Point[] = [];
let recorder: StrokeRecorder | null = null;
let lastPointer: Point | null = null;
let player: LoopPlayer | null = null;
let frameUrls: string[] = [];
let rafHandle = 0;

const imageCanvas = document.getElementById("image-canvas") as HTMLCanvasElement;
const maskCanvas = document.getElementById("mask-canvas") as HTMLCanvasElement;
const strokeCanvas = document.getElementById("stroke-canvas") as HTMLCanvasElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const previewImg = document.getElementById("preview-img") as HTMLImageElement;
const previewEmpty = document.getElementById("preview-empty") as HTMLDivElement;
const previewStats = document.getElementById("preview-stats") as HTMLDivElement;

function setBanner(): void {
  const b = editor.banner;
  banner.className = b ? b.kind : "";
  banner.textContent = b ? b.text : "";
}

function canvasPoint(ev: MouseEvent): Point {
  const rect = strokeCanvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * strokeCanvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * strokeCanvas.height,
  };
}

function redrawMask(): void {
  const ctx = maskCanvas.getContext("2d")!;
  ctx.clearRect(0, 0, maskCanvas.width, maskCanvas.height);
  const mask = editor.mask;
  if (!mask) return;
  const img = ctx.createImageData(mask.width, mask.height);
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i] >= 128) {
      img.data[i * 4] = 70;
      img.data[i * 4 + 1] = 140;
      img.data[i * 4 + 2] = 255;
      img.data[i * 4 + 3] = 110;
    }
  }
  ctx.putImageData(img, 0, 0);
}

function redrawStrokes(): void {
  const ctx = strokeCanvas.getContext("2d")!;
  ctx.clearRect(0, 0, strokeCanvas.width, strokeCanvas.height);
  ctx.lineWidth = 2.5;
  ctx.strokeStyle = "#ffd166";
  ctx.fillStyle = "#ffd166";
  for (const stroke of editor.strokes) {
    ctx.beginPath();
    stroke.points.forEach((p, k) => (k ? ctx.lineTo(p.x, p.y) : ctx.moveTo(p.x, p.y)));
    ctx.stroke();
    const a = stroke.points[stroke.points.length - 2];
    const b = stroke.points[stroke.points.length - 1];
    const ang = Math.atan2(b.y - a.y, b.x - a.x);
    ctx.beginPath();
    ctx.moveTo(b.x, b.y);
    ctx.lineTo(b.x - 9 * Math.cos(ang - 0.4), b.y - 9 * Math.sin(ang - 0.4));
    ctx.lineTo(b.x - 9 * Math.cos(ang + 0.4), b.y - 9 * Math.sin(ang + 0.4));
    ctx.closePath();
    ctx.fill();
  }
  if (polygonPoints.length) {
    ctx.strokeStyle = "#6fe3a5";
    ctx.beginPath();
    polygonPoints.forEach((p, k) => (k ? ctx.lineTo(p.x, p.y) : ctx.moveTo(p.x, p.y)));
    ctx.stroke();
  }
}

async function loadFile(file: File): Promise<void> {
  const url = URL.createObjectURL(file);
  const image = new Image();
  await new Promise((resolve, reject) => {
    image.onload = resolve;
    image.onerror = reject;
    image.src = url;
  });
  for (const canvas of [imageCanvas, maskCanvas, strokeCanvas]) {
    canvas.width = image.naturalWidth;
    canvas.height = image.naturalHeight;
  }
  const ctx = imageCanvas.getContext("2d")!;
  ctx.drawImage(image, 0, 0);
  URL.revokeObjectURL(url);
  // re-encode as PNG so the engine always receives PNG bytes
  const rgba = ctx.getImageData(0, 0, imageCanvas.width, imageCanvas.height);
  const rgb = new Uint8Array(rgba.width * rgba.height * 3);
  for (let i = 0; i < rgba.width * rgba.height; i++) {
    rgb[i * 3] = rgba.data[i * 4];
    rgb[i * 3 + 1] = rgba.data[i * 4 + 1];
    rgb[i * 3 + 2] = rgba.data[i * 4 + 2];
  }
  editor.loadImage(encodeRgbPng(rgba.width, rgba.height, rgb), rgba.width, rgba.height);
  polygonPoints = [];
  stopPlayback();
  redrawMask();
  redrawStrokes();
  setBanner();
}

function stopPlayback(): void {
  if (rafHandle) cancelAnimationFrame(rafHandle);
  rafHandle = 0;
  player = null;
  frameUrls.forEach((u) => URL.revokeObjectURL(u));
  frameUrls = [];
  previewImg.style.display = "none";
  previewEmpty.style.display = "block";
}

function startPlayback(): void {
  const preview = editor.preview;
  if (!preview) return;
  frameUrls.forEach((u) => URL.revokeObjectURL(u));
  frameUrls = preview.frames.map((bytes) =>
    URL.createObjectURL(new Blob([bytes.slice()], { type: "image/png" })),
  );
  player = new LoopPlayer(preview.frameCount, preview.fps);
  player.start(performance.now());
  previewEmpty.style.display = "none";
  previewImg.style.display = "block";
  const tick = (now: number) => {
    if (!player) return;
    previewImg.src = frameUrls[player.frameAt(now)];
    rafHandle = requestAnimationFrame(tick);
  };
  rafHandle = requestAnimationFrame(tick);
}

// --- toolbar ---------------------------------------------------------------

const toolButtons: Record<Tool, HTMLButtonElement> = {
  brush: document.getElementById("tool-brush") as HTMLButtonElement,
  erase: document.getElementById("tool-erase") as HTMLButtonElement,
  polygon: document.getElementById("tool-polygon") as HTMLButtonElement,
  stroke: document.getElementById("tool-stroke") as HTMLButtonElement,
};

function setTool(next: Tool): void {
  tool = next;
  for (const [name, button] of Object.entries(toolButtons)) {
    button.classList.toggle("active", name === next);
  }
}

for (const name of Object.keys(toolButtons) as Tool[]) {
  toolButtons[name].addEventListener("click", () => setTool(name));
}

(document.getElementById("file-input") as HTMLInputElement).addEventListener("change", (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (file) void loadFile(file);
});

(document.getElementById("brush-size") as HTMLInputElement).addEventListener("change", (ev) => {
  brushSize = Number((ev.target as HTMLInputElement).value) || 14;
});

(document.getElementById("frame-count") as HTMLInputElement).addEventListener("change", (ev) => {
  editor.frameCount = Number((ev.target as HTMLInputElement).value) || 80;
});

(document.getElementById("soft-boundary") as HTMLInputElement).addEventListener("change", (ev) => {
  editor.softBoundary = (ev.target as HTMLInputElement).checked;
});

document.getElementById("clear-mask")!.addEventListener("click", () => {
  editor.mask?.fillAll(false);
  redrawMask();
});

document.getElementById("clear-strokes")!.addEventListener("click", () => {
  editor.strokes = [];
  redrawStrokes();
});

document.getElementById("export-mask")!.addEventListener("click", () => {
  if (!editor.mask) return;
  const url = URL.createObjectURL(new Blob([editor.mask.toPng().slice()], { type: "image/png" }));
  const a = document.createElement("a");
  a.href = url;
  a.download = "mask.png";
  a.click();
  URL.revokeObjectURL(url);
});

document.getElementById("suggest")!.addEventListener("click", async () => {
  if (!editor.imagePng) return;
  try {
    const directions = await client.suggestDirections(editor.imagePng);
    const span = Math.min(editor.imageWidth, editor.imageHeight) * 0.35;
    editor.strokes = strokesFromDirections(directions, editor.maskCentroid(), span);
    redrawStrokes();
  } catch (err) {
    editor.banner = { kind: "error", text: String(err) };
    setBanner();
  }
});

document.getElementById("solve")!.addEventListener("click", async () => {
  try {
    setBanner();
    const record = await editor.solveAndPreview();
    setBanner();
    if (record.state === "done") {
      const total = record.timings?.total;
      previewStats.textContent = `job ${record.id}: ${record.frame_count} frames` +
        (total ? `, solved in ${total.toFixed(1)} s` : "");
      startPlayback();
    }
  } catch (err) {
    editor.banner = { kind: "error", text: String(err) };
    setBanner();
  }
});

// --- canvas interaction ------------------------------------------------------

strokeCanvas.addEventListener("mousedown", (ev) => {
  if (!editor.mask) return;
  const p = canvasPoint(ev);
  if (tool === "brush" || tool === "erase") {
    editor.mask.stampBrush(p, brushSize, tool === "erase");
    lastPointer = p;
    redrawMask();
  } else if (tool === "stroke") {
    recorder = new StrokeRecorder();
    recorder.add(p);
  } else if (tool === "polygon") {
    polygonPoints.push(p);
    redrawStrokes();
  }
});

strokeCanvas.addEventListener("mousemove", (ev) => {
  if (!editor.mask || !(ev.buttons & 1)) return;
  const p = canvasPoint(ev);
  if ((tool === "brush" || tool === "erase") && lastPointer) {
    editor.mask.strokeSegment(lastPointer, p, brushSize, tool === "erase");
    lastPointer = p;
    redrawMask();
  } else if (tool === "stroke" && recorder) {
    recorder.add(p);
    redrawStrokes();
  }
});

window.addEventListener("mouseup", () => {
  lastPointer = null;
  if (tool === "stroke" && recorder) {
    const stroke = recorder.finish();
    if (stroke) editor.strokes.push(stroke);
    recorder = null;
    redrawStrokes();
  }
});

strokeCanvas.addEventListener("dblclick", () => {
  if (tool === "polygon" && editor.mask && polygonPoints.length >= 3) {
    editor.mask.fillPolygon(polygonPoints);
    polygonPoints = [];
    redrawMask();
    redrawStrokes();
  }
});

strokeCanvas.addEventListener("contextmenu", (ev) => {
  // right click deletes the nearest stroke
  ev.preventDefault();
  const p = canvasPoint(ev);
  let bestId: string | null = null;
  let bestDist = 24;
  for (const stroke of editor.strokes) {
    for (const q of stroke.points) {
      const d = Math.hypot(q.x - p.x, q.y - p.y);
      if (d < bestDist) {
        bestDist = d;
        bestId = stroke.id;
      }
    }
  }
  if (bestId) {
    editor.strokes = removeStroke(editor.strokes, bestId);
    redrawStrokes();
  }
});

void client.health().then((ok) => {
  if (!ok) {
    editor.banner = { kind: "error", text: "engine unreachable; start `endless-loop serve`" };
    setBanner();
  }
});

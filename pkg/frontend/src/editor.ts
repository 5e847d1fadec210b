/**
 * Editor state machine. One image, one mask layer of matching dimensions,
 * a stroke list, at most one active job. Poll responses for superseded jobs
 * are discarded by id; a failed solve surfaces its stage-tagged diagnostic
 * without touching what the user painted.
 */

import { EngineClient, JobRecord, SolveOptions } from "./api";
import { MaskLayer } from "./maskLayer";
import { Stroke, toStrokesJson } from "./strokes";

export interface Banner {
  kind: "error" | "info";
  text: string;
}

export interface PreviewData {
  jobId: string;
  frameCount: number;
  fps: number;
  frames: Uint8Array[];
}

export class EditorState {
  imagePng: Uint8Array | null = null;
  imageWidth = 0;
  imageHeight = 0;
  mask: MaskLayer | null = null;
  strokes: Stroke[] = [];
  softBoundary = false;
  autoDirection = false;
  frameCount = 80;
  fps = 30;
  activeJobId: string | null = null;
  preview: PreviewData | null = null;
  banner: Banner | null = null;

  constructor(readonly client: EngineClient) {}

  loadImage(png: Uint8Array, width: number, height: number): void {
    this.imagePng = png;
    this.imageWidth = width;
    this.imageHeight = height;
    this.mask = new MaskLayer(width, height);
    this.strokes = [];
    this.preview = null;
    this.activeJobId = null;
    this.banner = null;
  }

  maskCentroid(): { x: number; y: number } {
    const mask = this.mask;
    if (!mask) return { x: 0, y: 0 };
    let sx = 0;
    let sy = 0;
    let n = 0;
    for (let y = 0; y < mask.height; y++) {
      for (let x = 0; x < mask.width; x++) {
        if (mask.data[y * mask.width + x] >= 128) {
          sx += x;
          sy += y;
          n++;
        }
      }
    }
    return n ? { x: sx / n, y: sy / n } : { x: mask.width / 2, y: mask.height / 2 };
  }

  solveOptions(): SolveOptions {
    const options: SolveOptions = {
      frame_count: this.frameCount,
      fps: this.fps,
      soft_boundary: this.softBoundary,
    };
    if (!this.strokes.length) {
      if (this.autoDirection) {
        options.auto_direction = true;
      } else {
        options.direction_deg = 0;
      }
    }
    return options;
  }

  /** Submit a solve; supersedes any previous job. */
  async submit(): Promise<string> {
    if (!this.imagePng || !this.mask) throw new Error("load an image first");
    if (this.mask.activeCount() === 0) throw new Error("paint a mask first");
    const strokes = this.strokes.length ? toStrokesJson(this.strokes).strokes : null;
    const id = await this.client.createJob(this.imagePng, this.mask.toPng(), strokes, this.solveOptions());
    this.activeJobId = id;
    this.banner = { kind: "info", text: "solving…" };
    return id;
  }

  /**
   * Handle one poll response. Returns "stale" when the record belongs to a
   * superseded job, otherwise the job state.
   */
  applyPoll(record: JobRecord): "stale" | JobRecord["state"] {
    if (record.id !== this.activeJobId) return "stale";
    if (record.state === "failed") {
      const stage = record.diagnostics?.stage ?? "unknown";
      const message = record.diagnostics?.message ?? record.error ?? "solve failed";
      this.banner = { kind: "error", text: `[${stage}] ${message}` };
      this.activeJobId = null;
    }
    return record.state;
  }

  /** Fetch all frames of a finished job and install the preview. */
  async installPreview(record: JobRecord): Promise<void> {
    if (record.id !== this.activeJobId || record.state !== "done") return;
    const frames: Uint8Array[] = [];
    for (let k = 0; k < record.frame_count; k++) {
      frames.push(await this.client.fetchFrame(record.id, k));
    }
    this.preview = {
      jobId: record.id,
      frameCount: record.frame_count,
      fps: this.fps,
      frames,
    };
    this.banner = null;
  }

  /** Poll until the active job settles; pollMs matches the 1 Hz contract. */
  async solveAndPreview(pollMs = 1000, timeoutMs = 300000): Promise<JobRecord> {
    const id = await this.submit();
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const record = await this.client.getJob(id);
      const status = this.applyPoll(record);
      if (status === "stale") throw new Error("job superseded");
      if (status === "done") {
        await this.installPreview(record);
        return record;
      }
      if (status === "failed") return record;
      if (Date.now() > deadline) throw new Error("solve timed out");
      await new Promise((r) => setTimeout(r, pollMs));
    }
  }
}

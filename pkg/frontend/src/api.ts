/**
 * Typed client for the engine's HTTP job service. The UI never mutates
 * engine results; everything goes through these endpoints.
 */

export interface JobRecord {
  id: string;
  state: "queued" | "running" | "done" | "failed";
  config_hash: string;
  timings: Record<string, number>;
  frame_count: number;
  diagnostics: { stage?: string; message?: string; [k: string]: unknown };
  error: string | null;
}

export interface DirectionSuggestion {
  x: number;
  y: number;
  votes: number;
}

export interface SolveOptions {
  direction_deg?: number;
  auto_direction?: boolean;
  soft_boundary?: boolean;
  frame_count?: number;
  fps?: number;
  solver_mode?: "crf" | "unary-only";
}

export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const step = 0x8000;
  for (let i = 0; i < bytes.length; i += step) {
    binary += String.fromCharCode(...bytes.subarray(i, i + step));
  }
  return btoa(binary);
}

export class EngineClient {
  constructor(readonly baseUrl: string) {}

  async health(): Promise<boolean> {
    try {
      const res = await fetch(`${this.baseUrl}/healthz`);
      return res.ok;
    } catch {
      return false;
    }
  }

  async createJob(
    imagePng: Uint8Array,
    maskPng: Uint8Array,
    strokes: { points: [number, number][] }[] | null,
    options: SolveOptions,
  ): Promise<string> {
    const payload: Record<string, unknown> = {
      image: bytesToBase64(imagePng),
      mask: bytesToBase64(maskPng),
      options,
    };
    if (strokes && strokes.length) {
      payload.strokes = strokes.map((s) => s.points);
    }
    const res = await fetch(`${this.baseUrl}/jobs`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!res.ok) {
      const body = await res.json().catch(() => ({}));
      throw new Error(`job submission failed (${res.status}): ${body.detail ?? body.error ?? ""}`);
    }
    const data = await res.json();
    return data.id as string;
  }

  async getJob(id: string): Promise<JobRecord> {
    const res = await fetch(`${this.baseUrl}/jobs/${id}`);
    if (!res.ok) throw new Error(`job lookup failed (${res.status})`);
    return (await res.json()) as JobRecord;
  }

  frameUrl(id: string, index: number): string {
    return `${this.baseUrl}/jobs/${id}/frames/${index}.png`;
  }

  gifUrl(id: string): string {
    return `${this.baseUrl}/jobs/${id}/result.gif`;
  }

  async fetchFrame(id: string, index: number): Promise<Uint8Array> {
    const res = await fetch(this.frameUrl(id, index));
    if (!res.ok) throw new Error(`frame fetch failed (${res.status})`);
    return new Uint8Array(await res.arrayBuffer());
  }

  async suggestDirections(imagePng: Uint8Array): Promise<DirectionSuggestion[]> {
    const res = await fetch(`${this.baseUrl}/suggest-directions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image: bytesToBase64(imagePng) }),
    });
    if (!res.ok) throw new Error(`suggestion failed (${res.status})`);
    const data = await res.json();
    return data.directions as DirectionSuggestion[];
  }
}

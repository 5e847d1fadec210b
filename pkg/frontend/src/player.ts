/**
 * Loop playback timing: advances a frame index at a fixed fps and wraps
 * seamlessly (frame K is frame 0 of the next cycle).
 */

export class LoopPlayer {
  private startTime: number | null = null;

  constructor(
    readonly frameCount: number,
    readonly fps: number,
  ) {
    if (frameCount < 1 || fps <= 0) throw new Error("invalid playback parameters");
  }

  start(nowMs: number): void {
    this.startTime = nowMs;
  }

  stop(): void {
    this.startTime = null;
  }

  get playing(): boolean {
    return this.startTime !== null;
  }

  /** Frame index to display at the given time; wraps modulo frameCount. */
  frameAt(nowMs: number): number {
    if (this.startTime === null) return 0;
    const elapsed = (nowMs - this.startTime) / 1000;
    return Math.floor(elapsed * this.fps) % this.frameCount;
  }
}

/**
 * Client-side mask raster. Pixels are 0 or 255 in a flat Uint8Array, same
 * dimensions as the loaded image; the engine treats >= 128 as active. Brush
 * stamps and polygon fills edit it; export goes through the dependency-free
 * PNG writer so the saved file holds exactly the painted pixel set.
 */

import { decodeStoredPng, encodeGrayPng } from "./pngWriter";

export interface Point {
  x: number;
  y: number;
}

export class MaskLayer {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number) {
    if (width < 1 || height < 1) throw new Error("mask needs positive dimensions");
    this.width = width;
    this.height = height;
    this.data = new Uint8Array(width * height);
  }

  clone(): MaskLayer {
    const out = new MaskLayer(this.width, this.height);
    out.data.set(this.data);
    return out;
  }

  activeCount(): number {
    let n = 0;
    for (let i = 0; i < this.data.length; i++) if (this.data[i] >= 128) n++;
    return n;
  }

  fillAll(active: boolean): void {
    this.data.fill(active ? 255 : 0);
  }

  /** Stamp a disk of the given radius; erase=true clears instead of adds. */
  stampBrush(center: Point, radius: number, erase = false): void {
    const value = erase ? 0 : 255;
    const r2 = radius * radius;
    const x0 = Math.max(0, Math.floor(center.x - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(center.x + radius));
    const y0 = Math.max(0, Math.floor(center.y - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(center.y + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - center.x;
        const dy = y - center.y;
        if (dx * dx + dy * dy <= r2) {
          this.data[y * this.width + x] = value;
        }
      }
    }
  }

  /** Stamp along a drag segment so fast pointer moves leave no gaps. */
  strokeSegment(from: Point, to: Point, radius: number, erase = false): void {
    const dist = Math.hypot(to.x - from.x, to.y - from.y);
    const steps = Math.max(1, Math.ceil(dist / Math.max(1, radius * 0.5)));
    for (let k = 0; k <= steps; k++) {
      const t = k / steps;
      this.stampBrush({ x: from.x + t * (to.x - from.x), y: from.y + t * (to.y - from.y) }, radius, erase);
    }
  }

  /** Even-odd scanline fill of a closed polygon. */
  fillPolygon(points: Point[], erase = false): void {
    if (points.length < 3) return;
    const value = erase ? 0 : 255;
    const ys = points.map((p) => p.y);
    const yMin = Math.max(0, Math.floor(Math.min(...ys)));
    const yMax = Math.min(this.height - 1, Math.ceil(Math.max(...ys)));
    for (let y = yMin; y <= yMax; y++) {
      const crossings: number[] = [];
      const cy = y + 0.5;
      for (let i = 0; i < points.length; i++) {
        const a = points[i];
        const b = points[(i + 1) % points.length];
        if (a.y <= cy !== b.y <= cy) {
          crossings.push(a.x + ((cy - a.y) / (b.y - a.y)) * (b.x - a.x));
        }
      }
      crossings.sort((m, n) => m - n);
      for (let k = 0; k + 1 < crossings.length; k += 2) {
        const x0 = Math.max(0, Math.round(crossings[k]));
        const x1 = Math.min(this.width - 1, Math.round(crossings[k + 1]) - 1);
        for (let x = x0; x <= x1; x++) {
          this.data[y * this.width + x] = value;
        }
      }
    }
  }

  /** 8-bit grayscale PNG bytes, >= 128 meaning active. */
  toPng(): Uint8Array {
    return encodeGrayPng(this.width, this.height, this.data);
  }

  static fromPng(bytes: Uint8Array): MaskLayer {
    const { width, height, channels, pixels } = decodeStoredPng(bytes);
    if (channels !== 1) throw new Error("mask PNG must be grayscale");
    const layer = new MaskLayer(width, height);
    layer.data.set(pixels);
    return layer;
  }

  equals(other: MaskLayer): boolean {
    if (other.width !== this.width || other.height !== this.height) return false;
    for (let i = 0; i < this.data.length; i++) {
      if ((this.data[i] >= 128) !== (other.data[i] >= 128)) return false;
    }
    return true;
  }
}

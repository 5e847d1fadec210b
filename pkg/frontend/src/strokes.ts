/**
 * Direction strokes: polylines captured from pointer drags, thinned to a
 * minimum point spacing, serialized to the engine's strokes.json shape.
 */

import type { Point } from "./maskLayer";

export const MIN_POINT_SPACING = 4;

export interface Stroke {
  id: string;
  points: Point[];
}

let strokeCounter = 0;

export function newStrokeId(): string {
  strokeCounter += 1;
  return `stroke-${strokeCounter}`;
}

export class StrokeRecorder {
  private points: Point[] = [];

  add(p: Point): void {
    const last = this.points[this.points.length - 1];
    if (!last || Math.hypot(p.x - last.x, p.y - last.y) >= MIN_POINT_SPACING) {
      this.points.push({ x: p.x, y: p.y });
    }
  }

  /** Returns the stroke, or null when fewer than 2 points were captured. */
  finish(): Stroke | null {
    if (this.points.length < 2) return null;
    return { id: newStrokeId(), points: this.points };
  }
}

export function removeStroke(strokes: Stroke[], id: string): Stroke[] {
  return strokes.filter((s) => s.id !== id);
}

export function toStrokesJson(strokes: Stroke[]): { strokes: { points: [number, number][] }[] } {
  return {
    strokes: strokes.map((s) => ({ points: s.points.map((p) => [p.x, p.y] as [number, number]) })),
  };
}

/**
 * Turn suggested unit directions into arrow strokes anchored at the mask
 * centroid, replacing whatever was drawn.
 */
export function strokesFromDirections(
  directions: { x: number; y: number }[],
  centroid: Point,
  length: number,
): Stroke[] {
  return directions.map((d) => {
    const half = length / 2;
    return {
      id: newStrokeId(),
      points: [
        { x: centroid.x - d.x * half, y: centroid.y - d.y * half },
        { x: centroid.x + d.x * half, y: centroid.y + d.y * half },
      ],
    };
  });
}

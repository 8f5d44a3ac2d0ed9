/**
 * Tasks tab interaction logic: goal placement with a draggable heading
 * arrow, waypoint accumulation, label entry, and freehand plan drawing.
 * Pure state machines — the canvas layer feeds them pointer events in
 * world coordinates and sends the message they produce.
 */

import type { Pose } from "./protocol.js";

export interface GoalDraft {
  x: number;
  y: number;
  /** radians; live-updated while the arrow is dragged */
  theta: number;
}

/** Click places the goal; dragging away from it sets the heading. */
export class GoalPlacement {
  draft: GoalDraft | null = null;

  click(x: number, y: number): void {
    this.draft = { x, y, theta: 0 };
  }

  dragTo(x: number, y: number): void {
    if (this.draft === null) return;
    const dx = x - this.draft.x;
    const dy = y - this.draft.y;
    if (Math.hypot(dx, dy) > 1e-9) {
      this.draft.theta = Math.atan2(dy, dx);
    }
  }

  /** Numeric readout shown next to the arrow while dragging. */
  readoutDegrees(): number {
    return this.draft === null ? 0 : Math.round((this.draft.theta * 180) / Math.PI);
  }

  confirm(): Pose | null {
    const draft = this.draft;
    this.draft = null;
    return draft;
  }
}

/** Waypoint mode: clicks accumulate in order until confirmed. */
export class WaypointCollector {
  points: Pose[] = [];

  click(x: number, y: number, theta = 0): void {
    this.points.push({ x, y, theta });
  }

  undo(): void {
    this.points.pop();
  }

  confirm(): Pose[] {
    const out = this.points;
    this.points = [];
    return out;
  }
}

/**
 * Resample a freehand stroke evenly along its arc length so consecutive
 * points are at most `spacing` meters apart. A stroke of length L yields
 * ceil(L / spacing) + 1 poses; endpoints are preserved exactly and each
 * pose's theta points along the stroke.
 */
export function downsampleStroke(stroke: Pose[], spacing: number): Pose[] {
  if (stroke.length <= 1) return [...stroke];
  const cumulative = [0];
  for (let i = 1; i < stroke.length; i++) {
    cumulative.push(
      cumulative[i - 1] +
        Math.hypot(stroke[i].x - stroke[i - 1].x, stroke[i].y - stroke[i - 1].y),
    );
  }
  const length = cumulative[cumulative.length - 1];
  if (length < 1e-9) return [stroke[0]];

  const intervals = Math.max(1, Math.ceil(length / spacing));
  const out: Pose[] = [];
  let seg = 1;
  for (let k = 0; k <= intervals; k++) {
    const s = (k / intervals) * length;
    while (seg < stroke.length - 1 && cumulative[seg] < s) seg++;
    const a = stroke[seg - 1];
    const b = stroke[seg];
    const span = cumulative[seg] - cumulative[seg - 1];
    const t = span < 1e-12 ? 0 : (s - cumulative[seg - 1]) / span;
    out.push({
      x: a.x + (b.x - a.x) * t,
      y: a.y + (b.y - a.y) * t,
      theta: Math.atan2(b.y - a.y, b.x - a.x),
    });
  }
  return out;
}

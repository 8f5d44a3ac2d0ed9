/**
 * Teleoperation tab: keyboard bindings to teleop events.
 *
 * W/S hold the linear engage (forward), A/D the angular engage; bracket
 * keys step the set-points by 0.1; R resets to defaults. Engage keys are
 * momentary: keydown engages, keyup disengages — releasing everything
 * always yields a zero twist on the robot.
 */

export interface TeleopEventOut {
  event: string;
  value?: boolean;
}

const KEYDOWN_BINDINGS: Record<string, TeleopEventOut> = {
  w: { event: "engage_linear", value: true },
  s: { event: "engage_linear", value: true },
  a: { event: "engage_angular", value: true },
  d: { event: "engage_angular", value: true },
  "]": { event: "speed_up_linear" },
  "[": { event: "speed_down_linear" },
  "'": { event: "speed_up_angular" },
  ";": { event: "speed_down_angular" },
  r: { event: "reset" },
};

const KEYUP_BINDINGS: Record<string, TeleopEventOut> = {
  w: { event: "engage_linear", value: false },
  s: { event: "engage_linear", value: false },
  a: { event: "engage_angular", value: false },
  d: { event: "engage_angular", value: false },
};

export class TeleopInput {
  private held = new Set<string>();

  /** Map a keydown to its event, suppressing auto-repeat for holds. */
  keyDown(key: string): TeleopEventOut | null {
    const k = key.toLowerCase();
    const binding = KEYDOWN_BINDINGS[k];
    if (binding === undefined) return null;
    if (binding.value !== undefined) {
      if (this.held.has(k)) return null; // auto-repeat
      this.held.add(k);
    }
    return binding;
  }

  keyUp(key: string): TeleopEventOut | null {
    const k = key.toLowerCase();
    const binding = KEYUP_BINDINGS[k];
    if (binding === undefined) return null;
    this.held.delete(k);
    return binding;
  }

  /** Disengage everything still held (window blur, tab switch, release). */
  releaseAll(): TeleopEventOut[] {
    const out: TeleopEventOut[] = [];
    for (const k of this.held) {
      const binding = KEYUP_BINDINGS[k];
      if (binding !== undefined) out.push(binding);
    }
    this.held.clear();
    return out;
  }
}

/** Numeric read-out shown next to the sliders. */
export function formatSetPoints(linearSet: number, angularSet: number): string {
  return `lin ${linearSet.toFixed(1)} m/s · ang ${angularSet.toFixed(1)} rad/s`;
}

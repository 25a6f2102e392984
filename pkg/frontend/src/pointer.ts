/**
 * Desktop surrogate for a pair of tracked 6-DOF controllers. The pointer
 * position maps onto a cube cross-section at an adjustable depth (the scroll
 * wheel is the depth dial, per device), a modifier key drives the second
 * device, and an optional twist drag rotates about the view axis. The event
 * protocol is device-agnostic, so a real XR backend can replace this mapping
 * without touching the engine.
 */

import { ButtonFlag, Device, WireEvent } from "./protocol.js";

export interface PointerInput {
  /** Integer milliseconds; must not decrease within one device. */
  timestamp: number;
  /** Normalized screen coordinates in [0,1], origin top-left. */
  x: number;
  y: number;
  /** Depth-dial steps for this sample (wheel notches, signed). */
  wheel?: number;
  /** Twist about the view axis, radians. */
  twist?: number;
  /** Hold the device modifier to drive the secondary controller. */
  secondary?: boolean;
  /** Button edges captured with this sample. */
  press?: readonly ButtonFlag[];
}

function clamp01(x: number): number {
  return Math.min(1, Math.max(0, x));
}

export class PointerMapping {
  /** World depth each device sits at; scroll moves it through the cube. */
  readonly depth: Record<Device, number> = { primary: 0.5, secondary: 0.5 };
  /** Depth change per wheel notch. */
  wheelGain = 0.05;
  /** Accumulated twist per device, radians. */
  readonly twist: Record<Device, number> = { primary: 0, secondary: 0 };

  device(input: PointerInput): Device {
    return input.secondary ? "secondary" : "primary";
  }

  /** Synthesize the 6-DOF controller event for one pointer sample. */
  toEvent(input: PointerInput): WireEvent {
    const device = this.device(input);
    if (input.wheel) {
      this.depth[device] = clamp01(this.depth[device] + input.wheel * this.wheelGain);
    }
    if (input.twist) this.twist[device] += input.twist;
    const half = this.twist[device] / 2;
    // Rotation about the view (z) axis; unit by construction.
    const orientation: [number, number, number, number] = [
      Math.cos(half),
      0,
      0,
      Math.sin(half),
    ];
    return {
      timestamp: input.timestamp,
      device,
      position: [clamp01(input.x), clamp01(1 - input.y), this.depth[device]],
      orientation,
      buttons: input.press ?? [],
    };
  }
}

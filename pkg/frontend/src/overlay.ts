/**
 * Affordance layer drawn over the streamed frame: the five control points of
 * every lens projected into pixel coordinates, lock badges, and the
 * mode/attribute toggles. Which handle counts as hovered is the engine's
 * call (it owns the tie-break); the overlay only echoes the hover it was
 * told about. The output is a plain draw list so any canvas or SVG backend
 * can paint it.
 */

import { HANDLE_KINDS, HandleKind, Hover } from "./protocol.js";
import { SceneCamera, SceneLens, SceneSummary } from "./scene.js";

export interface HandleMark {
  lensId: number;
  kind: HandleKind;
  /** Pixel coordinates in the frame; fractional centers, top-left origin. */
  x: number;
  y: number;
  highlighted: boolean;
  locked: boolean;
}

export interface BadgeMark {
  lensId: number;
  x: number;
  y: number;
}

export interface ToggleMark {
  group: "mode" | "attribute";
  label: string;
  active: boolean;
}

export interface OverlayDrawList {
  handles: HandleMark[];
  lockBadges: BadgeMark[];
  toggles: ToggleMark[];
}

type Vec3 = [number, number, number];

function rotate(q: [number, number, number, number], v: Vec3): Vec3 {
  // q * (0, v) * q̄ expanded: v + 2 w (u × v) + 2 u × (u × v), u = (x, y, z).
  const [w, x, y, z] = q;
  const uvx = y * v[2] - z * v[1];
  const uvy = z * v[0] - x * v[2];
  const uvz = x * v[1] - y * v[0];
  const uuvx = y * uvz - z * uvy;
  const uuvy = z * uvx - x * uvz;
  const uuvz = x * uvy - y * uvx;
  return [
    v[0] + 2 * (w * uvx + uuvx),
    v[1] + 2 * (w * uvy + uuvy),
    v[2] + 2 * (w * uvz + uuvz),
  ];
}

/** The five handle positions in world space: origin, k1+, k1-, k2+, k2-. */
export function handleWorldPositions(lens: SceneLens): Array<[HandleKind, Vec3]> {
  const half = lens.length / 2;
  const zk1 = 0.5 * lens.k1 * half * half;
  const zk2 = 0.5 * lens.k2 * half * half;
  const local: Array<[HandleKind, Vec3]> = [
    ["origin", [0, 0, 0]],
    ["k1_pos", [half, 0, zk1]],
    ["k1_neg", [-half, 0, zk1]],
    ["k2_pos", [0, half, zk2]],
    ["k2_neg", [0, -half, zk2]],
  ];
  return local.map(([kind, p]) => {
    const r = rotate(lens.orientation, p);
    return [kind, [
      r[0] + lens.position[0],
      r[1] + lens.position[1],
      r[2] + lens.position[2],
    ]];
  });
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]);
  return [v[0] / n, v[1] / n, v[2] / n];
}

/**
 * World point to fractional pixel coordinates, inverting the engine's
 * pixel-center ray formula; null when the point is at or behind the eye
 * plane.
 */
export function projectPoint(camera: SceneCamera, p: Vec3): { x: number; y: number } | null {
  const fwd = normalize(sub(camera.lookAt, camera.eye));
  const right = normalize(cross(fwd, camera.up));
  const trueUp = cross(right, fwd);
  const halfH = Math.tan(camera.verticalFov / 2);
  const halfW = halfH * (camera.width / camera.height);

  const v = sub(p, camera.eye);
  const zc = dot(v, fwd);
  if (zc <= 0) return null;
  const sx = dot(v, right) / zc;
  const sy = dot(v, trueUp) / zc;
  return {
    x: ((sx / halfW + 1) / 2) * camera.width - 0.5,
    y: ((1 - sy / halfH) / 2) * camera.height - 0.5,
  };
}

export const MODE_TOGGLES = ["vis1", "vis2", "vis3"] as const;
const MODE_BY_NAME: Record<string, string> = {
  standard: "vis1",
  depth_cull: "vis2",
  neighbor_cull: "vis3",
  vis1: "vis1",
  vis2: "vis2",
  vis3: "vis3",
};
export const ATTRIBUTE_TOGGLES = ["scalar", "gradient_magnitude"] as const;

export function renderOverlay(scene: SceneSummary, hover: Hover | null): OverlayDrawList {
  const handles: HandleMark[] = [];
  const lockBadges: BadgeMark[] = [];
  for (const lens of scene.lenses) {
    for (const [kind, world] of handleWorldPositions(lens)) {
      const pt = projectPoint(scene.camera, world);
      if (pt === null) continue;
      const highlighted =
        hover !== null && hover.lensId === lens.id && hover.kind === kind;
      handles.push({ lensId: lens.id, kind, x: pt.x, y: pt.y, highlighted, locked: lens.locked });
      if (kind === "origin" && lens.locked) {
        lockBadges.push({ lensId: lens.id, x: pt.x, y: pt.y });
      }
    }
  }
  const activeMode = MODE_BY_NAME[scene.mode] ?? scene.mode;
  const toggles: ToggleMark[] = [
    ...MODE_TOGGLES.map((label): ToggleMark => ({
      group: "mode",
      label,
      active: label === activeMode,
    })),
    ...ATTRIBUTE_TOGGLES.map((label): ToggleMark => ({
      group: "attribute",
      label,
      active: label === scene.focusAttribute,
    })),
  ];
  return { handles, lockBadges, toggles };
}

// HANDLE_KINDS is re-exported for draw backends that size handle glyphs by kind.
export { HANDLE_KINDS };

/**
 * Read-only view of the engine's scene document: just enough structure for
 * the workbench to draw overlays and toggles. The engine owns the full
 * grammar; unknown keys and blocks are skipped so snapshots from newer
 * engines still parse.
 */

export class SceneFormatError extends Error {}

export interface SceneCamera {
  eye: [number, number, number];
  lookAt: [number, number, number];
  up: [number, number, number];
  verticalFov: number;
  width: number;
  height: number;
}

export interface SceneLens {
  id: number;
  position: [number, number, number];
  orientation: [number, number, number, number];
  length: number;
  k1: number;
  k2: number;
  locked: boolean;
  attribute: string | null;
}

export interface SceneSummary {
  mode: string;
  focusAttribute: string;
  colormap: string;
  camera: SceneCamera;
  lenses: SceneLens[];
}

interface Line {
  tokens: string[];
}

function tokenize(doc: string): Line[] {
  const lines: Line[] = [];
  for (const raw of doc.split("\n")) {
    const hash = raw.indexOf("#");
    const text = (hash >= 0 ? raw.slice(0, hash) : raw).trim();
    if (!text) continue;
    lines.push({ tokens: text.split(/\s+/) });
  }
  return lines;
}

function num(token: string | undefined, what: string): number {
  const value = Number(token);
  if (token === undefined || token === "" || !Number.isFinite(value)) {
    throw new SceneFormatError(`bad numeric value for ${what}: ${token}`);
  }
  return value;
}

function vec3(tokens: string[], what: string): [number, number, number] {
  return [num(tokens[1], what), num(tokens[2], what), num(tokens[3], what)];
}

/** Consume a block's lines, recursing past nested blocks it does not know. */
function skipBlock(lines: Line[], start: number): number {
  let depth = 1;
  let i = start;
  while (i < lines.length && depth > 0) {
    const tokens = lines[i]!.tokens;
    if (tokens[tokens.length - 1] === "{") depth += 1;
    else if (tokens[0] === "}") depth -= 1;
    i += 1;
  }
  if (depth !== 0) throw new SceneFormatError("unclosed block");
  return i;
}

function parseCamera(lines: Line[], start: number): [SceneCamera, number] {
  const camera: SceneCamera = {
    eye: [0.5, 0.5, 2.2],
    lookAt: [0.5, 0.5, 0.5],
    up: [0, 1, 0],
    verticalFov: 0.9,
    width: 256,
    height: 256,
  };
  let i = start;
  while (i < lines.length) {
    const tokens = lines[i]!.tokens;
    if (tokens[0] === "}") return [camera, i + 1];
    if (tokens[tokens.length - 1] === "{") {
      i = skipBlock(lines, i + 1);
      continue;
    }
    switch (tokens[0]) {
      case "eye": camera.eye = vec3(tokens, "eye"); break;
      case "look_at": camera.lookAt = vec3(tokens, "look_at"); break;
      case "up": camera.up = vec3(tokens, "up"); break;
      case "vertical_fov": camera.verticalFov = num(tokens[1], "vertical_fov"); break;
      case "width": camera.width = num(tokens[1], "width"); break;
      case "height": camera.height = num(tokens[1], "height"); break;
      default: break;
    }
    i += 1;
  }
  throw new SceneFormatError("unclosed camera block");
}

function parseLens(lines: Line[], start: number): [SceneLens, number] {
  const lens: SceneLens = {
    id: 0,
    position: [0.5, 0.5, 0.5],
    orientation: [1, 0, 0, 0],
    length: 0.25,
    k1: 0,
    k2: 0,
    locked: false,
    attribute: null,
  };
  let sawId = false;
  let i = start;
  while (i < lines.length) {
    const tokens = lines[i]!.tokens;
    if (tokens[0] === "}") {
      if (!sawId) throw new SceneFormatError("lens block is missing an id");
      return [lens, i + 1];
    }
    if (tokens[tokens.length - 1] === "{") {
      i = skipBlock(lines, i + 1);
      continue;
    }
    switch (tokens[0]) {
      case "id": lens.id = num(tokens[1], "lens id"); sawId = true; break;
      case "position": lens.position = vec3(tokens, "position"); break;
      case "orientation":
        lens.orientation = [
          num(tokens[1], "orientation"),
          num(tokens[2], "orientation"),
          num(tokens[3], "orientation"),
          num(tokens[4], "orientation"),
        ];
        break;
      case "length": lens.length = num(tokens[1], "length"); break;
      case "k1": lens.k1 = num(tokens[1], "k1"); break;
      case "k2": lens.k2 = num(tokens[1], "k2"); break;
      case "locked": lens.locked = tokens[1] === "true"; break;
      case "attribute": lens.attribute = tokens[1] === "none" ? null : tokens[1] ?? null; break;
      default: break;
    }
    i += 1;
  }
  throw new SceneFormatError("unclosed lens block");
}

function parseSettings(lines: Line[], start: number, out: SceneSummary): number {
  let i = start;
  while (i < lines.length) {
    const tokens = lines[i]!.tokens;
    if (tokens[0] === "}") return i + 1;
    if (tokens[tokens.length - 1] === "{") {
      i = skipBlock(lines, i + 1);
      continue;
    }
    switch (tokens[0]) {
      case "mode": out.mode = tokens[1] ?? out.mode; break;
      case "focus_attribute": out.focusAttribute = tokens[1] ?? out.focusAttribute; break;
      case "colormap": out.colormap = tokens[1] ?? out.colormap; break;
      default: break;
    }
    i += 1;
  }
  throw new SceneFormatError("unclosed settings block");
}

export function parseSceneSummary(doc: string): SceneSummary {
  const lines = tokenize(doc);
  const header = lines[0]?.tokens;
  if (!header || header[0] !== "qscene" || header[1] !== "1") {
    throw new SceneFormatError("expected version header 'qscene 1'");
  }
  const summary: SceneSummary = {
    mode: "standard",
    focusAttribute: "scalar",
    colormap: "cool_to_warm",
    camera: {
      eye: [0.5, 0.5, 2.2],
      lookAt: [0.5, 0.5, 0.5],
      up: [0, 1, 0],
      verticalFov: 0.9,
      width: 256,
      height: 256,
    },
    lenses: [],
  };
  let i = 1;
  while (i < lines.length) {
    const tokens = lines[i]!.tokens;
    const isBlock = tokens[tokens.length - 1] === "{";
    if (!isBlock) {
      i += 1; // top-level pair (volume, background, ...): not our concern
      continue;
    }
    if (tokens[0] === "camera") {
      const [camera, next] = parseCamera(lines, i + 1);
      summary.camera = camera;
      i = next;
    } else if (tokens[0] === "settings") {
      i = parseSettings(lines, i + 1, summary);
    } else if (tokens[0] === "lens") {
      const [lens, next] = parseLens(lines, i + 1);
      summary.lenses.push(lens);
      i = next;
    } else {
      i = skipBlock(lines, i + 1);
    }
  }
  return summary;
}

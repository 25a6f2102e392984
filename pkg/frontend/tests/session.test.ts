/**
 * End-to-end against a real engine process: the handshake refusal, a
 * scripted sculpting session, and the replay guarantee that the emitted
 * event log reproduces the served scene byte for byte.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { EngineConnection } from "../src/connection.js";
import { projectPoint } from "../src/overlay.js";
import { ButtonFlag } from "../src/protocol.js";
import { WorkbenchSession } from "../src/session.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const REPO_ROOT = resolve(HERE, "..", "..");
const SCENE = join(REPO_ROOT, "scenes", "shell.qscene");

interface EngineProcess {
  proc: ChildProcess;
  port: number;
  exited: Promise<number | null>;
}

/** Start `quadriclens serve` and resolve once it prints its port. */
function startEngine(finalScene: string, clients: number): Promise<EngineProcess> {
  return new Promise((resolveEngine, reject) => {
    const proc = spawn(
      "quadriclens",
      [
        "serve",
        "--scene", SCENE,
        "--final-scene", finalScene,
        "--clients", String(clients),
      ],
      { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "inherit"] },
    );
    const exited = new Promise<number | null>((resolveExit) => {
      proc.once("exit", (code) => resolveExit(code));
    });
    let banner = "";
    const onData = (chunk: Buffer) => {
      banner += chunk.toString("utf8");
      const match = banner.match(/listening on [^:\s]+:(\d+)/);
      if (match) {
        proc.stdout!.off("data", onData);
        resolveEngine({ proc, port: Number(match[1]), exited });
      }
    };
    proc.stdout!.on("data", onData);
    proc.once("error", reject);
    void exited.then((code) => reject(new Error(`engine exited early (code ${code})`)));
  });
}

function runReplay(eventsPath: string, outDir: string): Promise<number | null> {
  return new Promise((resolveExit, reject) => {
    const proc = spawn(
      "quadriclens",
      ["replay", "--scene", SCENE, "--events", eventsPath, "--out-dir", outDir],
      { cwd: REPO_ROOT, stdio: ["ignore", "ignore", "inherit"] },
    );
    proc.once("exit", (code) => resolveExit(code));
    proc.once("error", reject);
  });
}

describe("workbench session against a live engine", () => {
  it("refuses a version mismatch, scripts a session, and replays it bitwise", async () => {
    const tmp = mkdtempSync(join(tmpdir(), "workbench-"));
    const finalPath = join(tmp, "final.qscene");
    const engine = await startEngine(finalPath, 2);
    let finalDoc = "";
    const warnings: string[] = [];
    try {
      // Client 1: wrong protocol version. The engine answers with its own
      // version and hangs up; the connection surfaces that as a refusal.
      await expect(
        EngineConnection.connect({ port: engine.port, version: 99 }),
      ).rejects.toThrow(/engine speaks v1, this client speaks v99/);

      // Client 2: the scripted session.
      const session = await WorkbenchSession.connect({
        port: engine.port,
        onWarning: (w) => warnings.push(w),
      });
      expect(session.scene).not.toBeNull();
      expect(session.scene!.mode).toBe("standard");
      expect(session.scene!.lenses).toHaveLength(1);
      expect(session.scene!.lenses[0]!.position).toEqual([0.5, 0.5, 0.78]);
      expect(session.lastAck).toEqual({ seq: 0, stateVersion: 0 });
      expect(session.frames.displayedVersions).toEqual([0]);

      // Park the cursor plane on the shipped lens depth.
      session.pointer.depth.primary = 0.78;
      let ts = 0;
      const step = (x: number, y: number, press?: readonly ButtonFlag[], secondary?: boolean) =>
        session.emitPointer({ timestamp: (ts += 10), x, y, press, secondary });

      // Hover the lens origin, then grab it.
      expect(await step(0.5, 0.5)).toEqual({ seq: 1, stateVersion: 1 });
      expect(session.hover).toEqual({ lensId: 1, kind: "origin" });
      expect(await step(0.5, 0.5, ["trigger_pressed"])).toEqual({ seq: 2, stateVersion: 2 });
      expect(session.selectedLensId).toBe(1);

      // Drag: the overlay previews the move while the authoritative summary
      // stays put until the next snapshot.
      expect(await step(0.6, 0.45)).toEqual({ seq: 3, stateVersion: 3 });
      expect(session.scene!.lenses[0]!.position).toEqual([0.5, 0.5, 0.78]);
      const dragged: [number, number, number] = [0.6, 1 - 0.45, 0.78];
      const drawn = session.overlay();
      const origin = drawn.handles.find((h) => h.lensId === 1 && h.kind === "origin")!;
      const previewPt = projectPoint(session.scene!.camera, dragged)!;
      const restingPt = projectPoint(session.scene!.camera, [0.5, 0.5, 0.78])!;
      expect(origin.x).toBe(previewPt.x);
      expect(origin.y).toBe(previewPt.y);
      expect(Math.abs(origin.x - restingPt.x)).toBeGreaterThan(1);
      expect(origin.highlighted).toBe(true);

      const f1 = await session.requestFrame();
      expect(f1.displayed).toBe(true);
      expect(f1.frame.stateVersion).toBe(3);
      expect(f1.frame.width).toBe(256);
      expect(f1.frame.height).toBe(256);
      expect(f1.frame.pixels.length).toBe(256 * 256 * 4);
      expect(f1.frame.pixels.some((v) => v !== 0)).toBe(true);

      expect(await step(0.6, 0.45, ["trigger_released"])).toEqual({ seq: 4, stateVersion: 4 });
      const moved = await session.refreshScene();
      expect(moved.lenses[0]!.position).toEqual(dragged);

      // Lock the lens; hover feedback goes quiet over locked handles.
      expect(await step(0.6, 0.45, ["toggle_lock"])).toEqual({ seq: 5, stateVersion: 5 });
      expect(session.hover).toBeNull();
      const locked = await session.refreshScene();
      expect(locked.lenses[0]!.locked).toBe(true);
      expect(session.overlay().lockBadges).toHaveLength(1);

      // A grab attempt on the locked lens is a state-changing no-op (the
      // engine records a notice), so it still lands in the log.
      expect(await step(0.6, 0.45, ["trigger_pressed"])).toEqual({ seq: 6, stateVersion: 6 });
      expect(session.hover).toBeNull();
      expect(session.overlay().handles.filter((h) => h.highlighted)).toHaveLength(0);

      expect(await step(0.6, 0.45, ["toggle_lock"])).toEqual({ seq: 7, stateVersion: 7 });
      const f2 = await session.requestFrame();
      expect(f2.displayed).toBe(true);
      expect(f2.frame.stateVersion).toBe(7);
      expect(await step(0.6, 0.45, ["trigger_released"])).toEqual({ seq: 8, stateVersion: 8 });

      // Global toggles work from anywhere.
      expect(await step(0.2, 0.2, ["toggle_attribute"])).toEqual({ seq: 9, stateVersion: 9 });
      expect(await step(0.2, 0.2, ["cycle_mode"])).toEqual({ seq: 10, stateVersion: 10 });

      // A malformed pose is acknowledged but rejected: no version bump, a
      // user-facing warning, and no entry in the replay log.
      const rejected = await session.emitEvent({
        timestamp: (ts += 10),
        device: "primary",
        position: [0.5, 0.5, 0.5],
        orientation: [2, 0, 0, 0],
        buttons: [],
      });
      expect(rejected).toEqual({ seq: 11, stateVersion: 10 });
      expect(warnings).toContain("engine rejected event seq 11");
      expect(session.emittedEvents).toHaveLength(10);

      // Second controller drops a fresh lens.
      expect(await step(0.3, 0.7, ["grip_pressed"], true)).toEqual({ seq: 12, stateVersion: 11 });
      expect(session.hover).toEqual({ lensId: 2, kind: "origin" });

      const f3 = await session.requestFrame();
      expect(f3.displayed).toBe(true);
      expect(f3.frame.stateVersion).toBe(11);
      expect(session.frames.displayedVersions).toEqual([0, 3, 7, 11]);
      expect(session.frames.discarded).toBe(0);

      const finalScene = await session.refreshScene();
      finalDoc = session.sceneDoc;
      expect(finalScene.mode).toBe("depth_cull");
      expect(finalScene.focusAttribute).toBe("gradient_magnitude");
      expect(finalScene.lenses).toHaveLength(2);
      expect(finalScene.lenses[0]!).toMatchObject({ id: 1, locked: false });
      expect(finalScene.lenses[0]!.position).toEqual(dragged);
      expect(finalScene.lenses[1]!).toMatchObject({ id: 2, length: 0.25, k1: 0, k2: 0 });
      expect(finalScene.lenses[1]!.position).toEqual([0.3, 1 - 0.7, 0.5]);
      const active = session.overlay().toggles.filter((t) => t.active).map((t) => t.label);
      expect(active).toEqual(["vis2", "gradient_magnitude"]);

      // Session log: accepted events only, canonical CSV.
      const log = session.eventLog();
      const lines = log.trim().split("\n");
      expect(lines).toHaveLength(11);
      expect(lines[0]).toBe("10,primary,0.5,0.5,0.78,1,0,0,0");
      expect(lines[10]).toContain("grip_pressed");
      expect(log).not.toContain(",2,0,0,0");

      session.close();
      expect(await engine.exited).toBe(0);

      // Served scene on disk == the last snapshot the client saw.
      const served = readFileSync(finalPath, "utf8");
      expect(served).toBe(finalDoc);

      // Replaying the emitted log headlessly reproduces it byte for byte.
      const logPath = join(tmp, "session.qevents");
      writeFileSync(logPath, log);
      const replayDir = join(tmp, "replay");
      expect(await runReplay(logPath, replayDir)).toBe(0);
      const replayed = readFileSync(join(replayDir, "final.qscene"), "utf8");
      expect(replayed).toBe(served);
    } finally {
      engine.proc.kill();
    }
  });

  it("queues events while offline and flushes them on reconnect", async () => {
    const tmp = mkdtempSync(join(tmpdir(), "workbench-"));
    const engine = await startEngine(join(tmp, "final.qscene"), 2);
    const warnings: string[] = [];
    try {
      const session = await WorkbenchSession.connect({
        port: engine.port,
        eventQueueCap: 2,
        onWarning: (w) => warnings.push(w),
      });
      expect(await session.emitPointer({ timestamp: 10, x: 0.4, y: 0.4 })).toEqual({
        seq: 1,
        stateVersion: 1,
      });

      session.close();
      expect(session.connected).toBe(false);
      expect(await session.emitPointer({ timestamp: 20, x: 0.45, y: 0.45 })).toBeNull();
      expect(await session.emitPointer({ timestamp: 30, x: 0.46, y: 0.46 })).toBeNull();
      // Cap is 2: this drops the oldest queued event with a warning.
      expect(await session.emitPointer({ timestamp: 40, x: 0.47, y: 0.47 })).toBeNull();
      expect(warnings).toContain("offline event queue full, dropping the oldest event");

      await session.reconnect();
      expect(session.connected).toBe(true);
      expect(session.lastAck).toEqual({ seq: 3, stateVersion: 3 });
      expect(session.emittedEvents).toHaveLength(3);
      expect(session.scene).not.toBeNull();

      session.close();
      expect(await engine.exited).toBe(0);
    } finally {
      engine.proc.kill();
    }
  });
});

/**
 * Frame sequencing: the engine stamps every frame with the state version it
 * rendered, and the viewer must show those versions in order even when the
 * transport or a slow decode delivers them shuffled. Stale frames (version
 * at or below the one on screen) are dropped, never displayed.
 */

import { FramePacket } from "./protocol.js";

export class FrameStore {
  /** Frame currently on screen, if any. */
  latest: FramePacket | null = null;
  /** Versions in the order they were displayed; strictly increasing. */
  readonly displayedVersions: number[] = [];
  /** Count of frames dropped as stale. */
  discarded = 0;

  /** Returns true when the frame became the displayed one. */
  offer(frame: FramePacket): boolean {
    if (this.latest !== null && frame.stateVersion <= this.latest.stateVersion) {
      this.discarded += 1;
      return false;
    }
    this.latest = frame;
    this.displayedVersions.push(frame.stateVersion);
    return true;
  }
}

import { describe, expect, it } from "vitest";

import { FlyCamera, IDLE_KEYS, ViewCellLimits } from "../src/camera.js";

const CELL: ViewCellLimits = {
  center: [0, 0, 0],
  size: [1.2, 0.8, 1.2],
  forward: [0, 0, 1],
  maxYawDeg: 20,
  maxPitchDeg: 30,
};

describe("FlyCamera", () => {
  it("starts at the cell center looking forward", () => {
    const cam = new FlyCamera(CELL);
    expect(cam.pose()).toEqual({ pos: [0, 0, 0], yaw: 0, pitch: 0 });
    expect(cam.direction()[2]).toBeCloseTo(1, 12);
  });

  it("never leaves the position box, and reports the clamp", () => {
    const cam = new FlyCamera(CELL);
    cam.speed = 10;
    for (let i = 0; i < 50; i++) {
      cam.step({ ...IDLE_KEYS, forward: true }, 0.1);
    }
    expect(cam.pos[2]).toBeCloseTo(0.6, 12);
    expect(cam.clamped).toBe(true);
    // stepping away from the wall clears the indicator
    cam.step({ ...IDLE_KEYS, back: true }, 0.001);
    expect(cam.clamped).toBe(false);
  });

  it("clamps yaw and pitch to the cell limits", () => {
    const cam = new FlyCamera(CELL);
    cam.look(1000, 0);
    expect(cam.yaw).toBe(20);
    expect(cam.clamped).toBe(true);
    cam.look(0, 1000);
    expect(cam.pitch).toBe(-30);
  });

  it("matches the server clamp rule on every axis", () => {
    const cam = new FlyCamera(CELL);
    cam.pos = [5, -5, 0.1];
    cam.yaw = -45;
    cam.pitch = 90;
    cam.look(0, 0); // applies the clamp
    expect(cam.pos).toEqual([0.6, -0.4, 0.1]);
    expect(cam.yaw).toBe(-20);
    expect(cam.pitch).toBe(30);
    expect(cam.clamped).toBe(true);
  });

  it("reports whether a step changed the pose", () => {
    const cam = new FlyCamera(CELL);
    expect(cam.step(IDLE_KEYS, 0.1)).toBe(false);
    expect(cam.step({ ...IDLE_KEYS, right: true }, 0.1)).toBe(true);
  });

  it("movement keys translate along the camera frame", () => {
    const cam = new FlyCamera(CELL);
    cam.speed = 1;
    cam.step({ ...IDLE_KEYS, right: true }, 0.25);
    expect(cam.pos[0]).toBeCloseTo(0.25, 9);
    cam.step({ ...IDLE_KEYS, up: true }, 0.25);
    expect(cam.pos[1]).toBeCloseTo(0.25, 9);
  });
});

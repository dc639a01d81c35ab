/** First-person fly camera constrained to the server's view cell.
 *
 * The clamp mirrors the server exactly (axis-aligned position box plus
 * yaw/pitch limits) so the client never sends a pose the server would have
 * to move; when the user pushes against a bound the `clamped` flag lights
 * up locally before the server confirms it.
 */

export interface ViewCellLimits {
  center: [number, number, number];
  size: [number, number, number];
  forward: [number, number, number];
  maxYawDeg: number;
  maxPitchDeg: number;
}

export interface CameraPose {
  pos: [number, number, number];
  yaw: number;
  pitch: number;
}

export interface KeyState {
  forward: boolean;
  back: boolean;
  left: boolean;
  right: boolean;
  up: boolean;
  down: boolean;
}

export const IDLE_KEYS: KeyState = {
  forward: false,
  back: false,
  left: false,
  right: false,
  up: false,
  down: false,
};

const DEG = Math.PI / 180;

function norm(v: [number, number, number]): [number, number, number] {
  const n = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
}

function cross(
  a: [number, number, number],
  b: [number, number, number],
): [number, number, number] {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

export class FlyCamera {
  pos: [number, number, number];
  yaw = 0;
  pitch = 0;
  clamped = false;
  speed = 1.0;
  lookSpeed = 0.12;

  constructor(readonly cell: ViewCellLimits) {
    this.pos = [...cell.center];
  }

  /** Cell-frame axes derived from the forward direction (world up hint). */
  private axes(): {
    f: [number, number, number];
    r: [number, number, number];
    u: [number, number, number];
  } {
    const f = norm(this.cell.forward);
    const upHint: [number, number, number] =
      Math.abs(f[1]) < 0.999 ? [0, 1, 0] : [0, 0, 1];
    const r = norm(cross(upHint, f));
    const u = cross(f, r);
    return { f, r, u };
  }

  /** Camera forward in world space for the current yaw/pitch. */
  direction(): [number, number, number] {
    const { f, r, u } = this.axes();
    const cy = Math.cos(-this.yaw * DEG);
    const sy = Math.sin(-this.yaw * DEG);
    const cp = Math.cos(this.pitch * DEG);
    const sp = Math.sin(this.pitch * DEG);
    // yaw about the cell up axis, then pitch about the yawed right axis
    const fy: [number, number, number] = [
      f[0] * cy + (u[1] * f[2] - u[2] * f[1]) * sy,
      f[1] * cy + (u[2] * f[0] - u[0] * f[2]) * sy,
      f[2] * cy + (u[0] * f[1] - u[1] * f[0]) * sy,
    ];
    const ry = [
      r[0] * cy + (u[1] * r[2] - u[2] * r[1]) * sy,
      r[1] * cy + (u[2] * r[0] - u[0] * r[2]) * sy,
      r[2] * cy + (u[0] * r[1] - u[1] * r[0]) * sy,
    ] as [number, number, number];
    return [
      fy[0] * cp + (ry[1] * fy[2] - ry[2] * fy[1]) * sp,
      fy[1] * cp + (ry[2] * fy[0] - ry[0] * fy[2]) * sp,
      fy[2] * cp + (ry[0] * fy[1] - ry[1] * fy[0]) * sp,
    ];
  }

  look(dxPixels: number, dyPixels: number): void {
    this.yaw += dxPixels * this.lookSpeed;
    this.pitch -= dyPixels * this.lookSpeed;
    this.applyClamp();
  }

  /** Advance by dt seconds of key input; returns true if the pose moved. */
  step(keys: KeyState, dt: number): boolean {
    const { r, u } = this.axes();
    const f = this.direction();
    const before = this.pose();
    const v = this.speed * dt;
    const move = (a: [number, number, number], s: number) => {
      this.pos[0] += a[0] * s;
      this.pos[1] += a[1] * s;
      this.pos[2] += a[2] * s;
    };
    if (keys.forward) move(f, v);
    if (keys.back) move(f, -v);
    if (keys.right) move(r, v);
    if (keys.left) move(r, -v);
    if (keys.up) move(u, v);
    if (keys.down) move(u, -v);
    this.applyClamp();
    const after = this.pose();
    return (
      before.pos[0] !== after.pos[0] ||
      before.pos[1] !== after.pos[1] ||
      before.pos[2] !== after.pos[2] ||
      before.yaw !== after.yaw ||
      before.pitch !== after.pitch
    );
  }

  private applyClamp(): void {
    this.clamped = false;
    for (let i = 0; i < 3; i++) {
      const lo = this.cell.center[i] - this.cell.size[i] / 2;
      const hi = this.cell.center[i] + this.cell.size[i] / 2;
      if (this.pos[i] < lo) {
        this.pos[i] = lo;
        this.clamped = true;
      } else if (this.pos[i] > hi) {
        this.pos[i] = hi;
        this.clamped = true;
      }
    }
    const y = Math.max(-this.cell.maxYawDeg, Math.min(this.cell.maxYawDeg, this.yaw));
    const p = Math.max(-this.cell.maxPitchDeg, Math.min(this.cell.maxPitchDeg, this.pitch));
    if (y !== this.yaw || p !== this.pitch) this.clamped = true;
    this.yaw = y;
    this.pitch = p;
  }

  pose(): CameraPose {
    return { pos: [...this.pos], yaw: this.yaw, pitch: this.pitch };
  }
}

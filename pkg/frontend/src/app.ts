/** Browser entry point: canvas, HUD, and input wiring.
 *
 * Fetches /info for the view cell and resolution, opens the frame stream,
 * and runs a WASD + mouse-look loop clamped to the cell. The HUD shows fps,
 * server render time, the current pose, and a clamp indicator.
 */
import { FlyCamera, IDLE_KEYS, KeyState } from "./camera.js";
import { FrameMeta, rgbToRgba, ServerInfo } from "./protocol.js";
import { FrameStream, SocketLike } from "./stream.js";

const KEYMAP: Record<string, keyof KeyState> = {
  KeyW: "forward",
  KeyS: "back",
  KeyA: "left",
  KeyD: "right",
  KeyE: "up",
  KeyQ: "down",
};

async function main(): Promise<void> {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const hud = document.getElementById("hud") as HTMLElement;
  const banner = document.getElementById("banner") as HTMLElement;
  const ctx = canvas.getContext("2d")!;

  const info: ServerInfo = await (await fetch("/info")).json();
  const [width, height] = info.resolution;
  canvas.width = width;
  canvas.height = height;

  const camera = new FlyCamera({
    center: info.view_cell.center,
    size: info.view_cell.size,
    forward: info.view_cell.forward,
    maxYawDeg: info.view_cell.max_yaw_deg,
    maxPitchDeg: info.view_cell.max_pitch_deg,
  });
  camera.speed = Math.max(...info.view_cell.size);

  const image = new ImageData(width, height);
  let framesShown = 0;
  let lastMeta: FrameMeta | null = null;
  let serverClamped = false;

  const proto = location.protocol === "https:" ? "wss" : "ws";
  const stream = new FrameStream(
    `${proto}://${location.host}/stream`,
    {
      onFrame(frame) {
        rgbToRgba(frame.pixels, image.data);
        ctx.putImageData(image, 0, 0);
        framesShown += 1;
        serverClamped = frame.clamped;
      },
      onMeta(meta) {
        if (meta.type === "frame") lastMeta = meta;
      },
      onConnection(state) {
        banner.style.display = state === "connected" ? "none" : "block";
        banner.textContent =
          state === "connecting" ? "connecting…" : "connection lost — reconnecting…";
      },
    },
    {
      makeSocket: (url) => {
        const ws = new WebSocket(url);
        ws.binaryType = "arraybuffer";
        return ws as unknown as SocketLike;
      },
    },
  );

  const keys: KeyState = { ...IDLE_KEYS };
  window.addEventListener("keydown", (e) => {
    const k = KEYMAP[e.code];
    if (k) keys[k] = true;
  });
  window.addEventListener("keyup", (e) => {
    const k = KEYMAP[e.code];
    if (k) keys[k] = false;
  });
  canvas.addEventListener("click", () => canvas.requestPointerLock());
  window.addEventListener("mousemove", (e) => {
    if (document.pointerLockElement === canvas) {
      camera.look(e.movementX, e.movementY);
      stream.sendPose(camera.pose());
    }
  });

  let fps = 0;
  let fpsFrames = 0;
  let fpsAt = performance.now();
  let last = performance.now();

  stream.sendPose(camera.pose());

  function tick(now: number): void {
    const dt = Math.min((now - last) / 1000, 0.1);
    last = now;
    if (camera.step(keys, dt)) {
      stream.sendPose(camera.pose());
    }
    if (now - fpsAt >= 1000) {
      fps = ((framesShown - fpsFrames) * 1000) / (now - fpsAt);
      fpsFrames = framesShown;
      fpsAt = now;
    }
    const [x, y, z] = camera.pos;
    const clamp = camera.clamped || serverClamped ? "  [clamped]" : "";
    const ms = lastMeta ? lastMeta.render_ms.toFixed(1) : "-";
    hud.textContent =
      `${fps.toFixed(1)} fps  render ${ms} ms\n` +
      `pos (${x.toFixed(2)}, ${y.toFixed(2)}, ${z.toFixed(2)})  ` +
      `yaw ${camera.yaw.toFixed(1)}° pitch ${camera.pitch.toFixed(1)}°${clamp}`;
    requestAnimationFrame(tick);
  }
  requestAnimationFrame(tick);
}

main().catch((e) => {
  const banner = document.getElementById("banner");
  if (banner) {
    banner.style.display = "block";
    banner.textContent = `failed to start: ${e}`;
  }
});

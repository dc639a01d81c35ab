/** Wire protocol shared with the rendering server.
 *
 * Client -> server: JSON pose messages `{id, pos: [x,y,z], yaw, pitch}`.
 * Server -> client: a binary frame per pose -- 16-byte little-endian header
 * (id u32, width u32, height u32, flags u32; bit 0 set when the pose was
 * clamped) followed by raw RGB8 pixels -- plus JSON messages: `frame` meta
 * (render time, clamped pose echo), `superseded` acks for poses dropped by
 * backpressure, and `error`.
 */

export const FLAG_CLAMPED = 1;

export interface PoseMessage {
  id: number;
  pos: [number, number, number];
  yaw: number;
  pitch: number;
}

export interface Frame {
  id: number;
  width: number;
  height: number;
  clamped: boolean;
  pixels: Uint8Array;
}

export interface FrameMeta {
  type: "frame";
  id: number;
  clamped: boolean;
  render_ms: number;
  pose: {
    position: [number, number, number];
    yaw_deg: number;
    pitch_deg: number;
    fov_deg: number;
  };
}

export interface SupersededMeta {
  type: "superseded";
  id: number | null;
}

export interface ErrorMeta {
  type: "error";
  id: number | null;
  message: string;
}

export type MetaMessage = FrameMeta | SupersededMeta | ErrorMeta;

export interface ServerInfo {
  view_cell: {
    center: [number, number, number];
    size: [number, number, number];
    forward: [number, number, number];
    max_pitch_deg: number;
    max_yaw_deg: number;
  };
  resolution: [number, number];
  fov_deg: number;
  samples: number;
  mode: string;
  mflop_per_pixel: number;
}

export function parseFrame(buffer: ArrayBuffer): Frame {
  if (buffer.byteLength < 16) {
    throw new Error(`frame too short: ${buffer.byteLength} bytes`);
  }
  const view = new DataView(buffer);
  const id = view.getUint32(0, true);
  const width = view.getUint32(4, true);
  const height = view.getUint32(8, true);
  const flags = view.getUint32(12, true);
  const pixels = new Uint8Array(buffer, 16);
  if (pixels.length !== width * height * 3) {
    throw new Error(`frame payload ${pixels.length} != ${width}x${height}x3`);
  }
  return { id, width, height, clamped: (flags & FLAG_CLAMPED) !== 0, pixels };
}

export function parseMeta(text: string): MetaMessage {
  const msg = JSON.parse(text);
  if (msg.type !== "frame" && msg.type !== "superseded" && msg.type !== "error") {
    throw new Error(`unknown message type ${msg.type}`);
  }
  return msg as MetaMessage;
}

/** RGB8 -> RGBA bytes for ImageData. */
export function rgbToRgba(pixels: Uint8Array, out?: Uint8ClampedArray): Uint8ClampedArray {
  const n = pixels.length / 3;
  const rgba = out ?? new Uint8ClampedArray(n * 4);
  for (let i = 0, j = 0; i < pixels.length; i += 3, j += 4) {
    rgba[j] = pixels[i];
    rgba[j + 1] = pixels[i + 1];
    rgba[j + 2] = pixels[i + 2];
    rgba[j + 3] = 255;
  }
  return rgba;
}

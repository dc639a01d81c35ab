import { describe, expect, it } from "vitest";

import { FLAG_CLAMPED, parseFrame, parseMeta, rgbToRgba } from "../src/protocol.js";

function makeFrame(id: number, w: number, h: number, flags: number): ArrayBuffer {
  const buf = new ArrayBuffer(16 + w * h * 3);
  const view = new DataView(buf);
  view.setUint32(0, id, true);
  view.setUint32(4, w, true);
  view.setUint32(8, h, true);
  view.setUint32(12, flags, true);
  new Uint8Array(buf, 16).fill(7);
  return buf;
}

describe("parseFrame", () => {
  it("decodes the little-endian header and pixel payload", () => {
    const frame = parseFrame(makeFrame(42, 4, 3, 0));
    expect(frame.id).toBe(42);
    expect(frame.width).toBe(4);
    expect(frame.height).toBe(3);
    expect(frame.clamped).toBe(false);
    expect(frame.pixels.length).toBe(4 * 3 * 3);
    expect(frame.pixels[0]).toBe(7);
  });

  it("reads the clamp flag", () => {
    expect(parseFrame(makeFrame(1, 2, 2, FLAG_CLAMPED)).clamped).toBe(true);
    expect(parseFrame(makeFrame(1, 2, 2, 2)).clamped).toBe(false);
  });

  it("rejects truncated buffers", () => {
    expect(() => parseFrame(new ArrayBuffer(8))).toThrow(/too short/);
    const bad = makeFrame(1, 4, 4, 0).slice(0, 16 + 5);
    expect(() => parseFrame(bad)).toThrow(/payload/);
  });
});

describe("parseMeta", () => {
  it("accepts the three server message types", () => {
    expect(parseMeta('{"type":"superseded","id":3}')).toEqual({ type: "superseded", id: 3 });
    expect(parseMeta('{"type":"error","id":null,"message":"x"}').type).toBe("error");
    const meta = parseMeta(
      '{"type":"frame","id":1,"clamped":true,"render_ms":12.5,' +
        '"pose":{"position":[0,0,0],"yaw_deg":0,"pitch_deg":0,"fov_deg":55}}',
    );
    expect(meta.type).toBe("frame");
  });

  it("rejects unknown types", () => {
    expect(() => parseMeta('{"type":"nope"}')).toThrow(/unknown/);
  });
});

describe("rgbToRgba", () => {
  it("expands triplets with opaque alpha", () => {
    const rgba = rgbToRgba(new Uint8Array([1, 2, 3, 4, 5, 6]));
    expect(Array.from(rgba)).toEqual([1, 2, 3, 255, 4, 5, 6, 255]);
  });
});

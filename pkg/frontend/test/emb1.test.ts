import { describe, expect, it } from "vitest";

import { EmbeddingFormatError, decodeEmb1, encodeEmb1 } from "../src/emb1.js";

function sample(frames = 10, dim = 768) {
  const data = new Float32Array(frames * dim);
  for (let i = 0; i < data.length; i++) data[i] = Math.sin(i * 0.37) * 2;
  return { data, dim, frames, frameRateHz: 50.0, encoderId: "wavlm_base" };
}

describe("EMB1 format", () => {
  it("round trips bit-exactly", () => {
    const original = sample();
    const bytes = encodeEmb1(original);
    const decoded = decodeEmb1(bytes);
    expect(decoded.dim).toBe(768);
    expect(decoded.frames).toBe(10);
    expect(decoded.frameRateHz).toBeCloseTo(50.0, 6);
    expect(decoded.encoderId).toBe("wavlm_base");
    expect(Buffer.compare(encodeEmb1(decoded), bytes)).toBe(0);
    expect(Array.from(decoded.data)).toEqual(Array.from(original.data));
  });

  it("rejects bad magic", () => {
    const bytes = encodeEmb1(sample());
    bytes.write("XXXX", 0, "ascii");
    expect(() => decodeEmb1(bytes)).toThrow(/bad magic/);
  });

  it("rejects version mismatch", () => {
    const bytes = encodeEmb1(sample());
    bytes.writeUInt32LE(9, 4);
    expect(() => decodeEmb1(bytes)).toThrow(/unsupported version/);
  });

  it("rejects truncated payload", () => {
    const bytes = encodeEmb1(sample());
    expect(() => decodeEmb1(bytes.subarray(0, bytes.length - 4))).toThrow(
      /truncated payload/);
  });

  it("rejects dim mismatch with implied dim", () => {
    const bytes = encodeEmb1(sample(10, 100));
    bytes.writeUInt32LE(768, 8);
    expect(() => decodeEmb1(bytes)).toThrow(/dim mismatch.*768.*100/);
  });

  it("rejects zero dim", () => {
    const bytes = encodeEmb1(sample());
    bytes.writeUInt32LE(0, 8);
    expect(() => decodeEmb1(bytes)).toThrow(/dim field is zero/);
    expect(() => encodeEmb1({ ...sample(), dim: 0 })).toThrow(EmbeddingFormatError);
  });
});

/** EMB1 binary embedding files, bit-exact with the enhancement pipeline.
 *
 * Layout: "EMB1" | u32 LE version=1 | u32 LE dim | u32 LE n_frames |
 * f32 LE frame_rate_hz | u8 id length + UTF-8 encoder id |
 * n_frames*dim float32 LE row-major.
 */

export const EMB_MAGIC = "EMB1";
export const EMB_VERSION = 1;

export interface EmbeddingFile {
  data: Float32Array; // row-major (frames, dim)
  dim: number;
  frames: number;
  frameRateHz: number;
  encoderId: string;
}

export class EmbeddingFormatError extends Error {}

export function encodeEmb1(emb: EmbeddingFile): Buffer {
  if (emb.dim <= 0) throw new EmbeddingFormatError("dim must be positive");
  if (emb.frames * emb.dim !== emb.data.length) {
    throw new EmbeddingFormatError(
      `data length ${emb.data.length} != frames ${emb.frames} * dim ${emb.dim}`);
  }
  const idBytes = Buffer.from(emb.encoderId, "utf-8");
  if (idBytes.length > 255) throw new EmbeddingFormatError("encoder id too long");
  const header = Buffer.alloc(21 + idBytes.length);
  header.write(EMB_MAGIC, 0, "ascii");
  header.writeUInt32LE(EMB_VERSION, 4);
  header.writeUInt32LE(emb.dim, 8);
  header.writeUInt32LE(emb.frames, 12);
  header.writeFloatLE(emb.frameRateHz, 16);
  header.writeUInt8(idBytes.length, 20);
  idBytes.copy(header, 21);
  const payload = Buffer.alloc(emb.data.length * 4);
  for (let i = 0; i < emb.data.length; i++) payload.writeFloatLE(emb.data[i], 4 * i);
  return Buffer.concat([header, payload]);
}

export function decodeEmb1(raw: Buffer, label = "buffer"): EmbeddingFile {
  if (raw.length < 4 || raw.toString("ascii", 0, 4) !== EMB_MAGIC) {
    throw new EmbeddingFormatError(`${label}: bad magic, not an EMB1 file`);
  }
  if (raw.length < 21) throw new EmbeddingFormatError(`${label}: truncated header`);
  const version = raw.readUInt32LE(4);
  if (version !== EMB_VERSION) {
    throw new EmbeddingFormatError(`${label}: unsupported version ${version}`);
  }
  const dim = raw.readUInt32LE(8);
  if (dim === 0) throw new EmbeddingFormatError(`${label}: dim field is zero`);
  const frames = raw.readUInt32LE(12);
  const frameRateHz = raw.readFloatLE(16);
  const idLen = raw.readUInt8(20);
  if (raw.length < 21 + idLen) throw new EmbeddingFormatError(`${label}: truncated encoder id`);
  const encoderId = raw.toString("utf-8", 21, 21 + idLen);
  const payload = raw.subarray(21 + idLen);
  const expected = 4 * dim * frames;
  if (payload.length !== expected) {
    if (frames > 0 && payload.length % (4 * frames) === 0) {
      const implied = payload.length / (4 * frames);
      throw new EmbeddingFormatError(
        `${label}: dim mismatch, header says ${dim} but payload implies ${implied}`);
    }
    throw new EmbeddingFormatError(
      `${label}: truncated payload, expected ${expected} bytes, found ${payload.length}`);
  }
  const data = new Float32Array(frames * dim);
  for (let i = 0; i < data.length; i++) data[i] = payload.readFloatLE(4 * i);
  return { data, dim, frames, frameRateHz, encoderId };
}

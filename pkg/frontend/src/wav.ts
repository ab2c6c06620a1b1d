/** Minimal RIFF/WAVE reader: mono PCM (16/24/32-bit int) and IEEE float. */

import { readFileSync } from "node:fs";

export interface WavData {
  samples: Float32Array;
  sampleRateHz: number;
}

export class WavFormatError extends Error {}

export function readWav(path: string): WavData {
  const buf = readFileSync(path);
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== "RIFF" ||
      buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new WavFormatError(`${path}: not a RIFF/WAVE file`);
  }
  let fmt: { tag: number; channels: number; rate: number; bits: number } | null = null;
  let data: Buffer | null = null;
  let pos = 12;
  while (pos + 8 <= buf.length) {
    const chunkId = buf.toString("ascii", pos, pos + 4);
    const chunkSize = buf.readUInt32LE(pos + 4);
    const body = buf.subarray(pos + 8, pos + 8 + chunkSize);
    if (chunkId === "fmt ") {
      if (body.length < 16) throw new WavFormatError(`${path}: truncated fmt chunk`);
      fmt = {
        tag: body.readUInt16LE(0),
        channels: body.readUInt16LE(2),
        rate: body.readUInt32LE(4),
        bits: body.readUInt16LE(14),
      };
    } else if (chunkId === "data") {
      data = body;
    }
    pos += 8 + chunkSize + (chunkSize & 1);
  }
  if (!fmt) throw new WavFormatError(`${path}: missing fmt chunk`);
  if (!data) throw new WavFormatError(`${path}: missing data chunk`);
  if (fmt.channels !== 1) {
    throw new WavFormatError(
      `${path}: expected mono audio, got ${fmt.channels} channels`);
  }

  let samples: Float32Array;
  if (fmt.tag === 1 && fmt.bits === 16) {
    const n = Math.floor(data.length / 2);
    samples = new Float32Array(n);
    for (let i = 0; i < n; i++) samples[i] = data.readInt16LE(2 * i) / 32767;
  } else if (fmt.tag === 1 && fmt.bits === 24) {
    const n = Math.floor(data.length / 3);
    samples = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      let v = data[3 * i] | (data[3 * i + 1] << 8) | (data[3 * i + 2] << 16);
      if (v >= 1 << 23) v -= 1 << 24;
      samples[i] = v / (1 << 23);
    }
  } else if (fmt.tag === 1 && fmt.bits === 32) {
    const n = Math.floor(data.length / 4);
    samples = new Float32Array(n);
    for (let i = 0; i < n; i++) samples[i] = data.readInt32LE(4 * i) / 2 ** 31;
  } else if (fmt.tag === 3 && fmt.bits === 32) {
    const n = Math.floor(data.length / 4);
    samples = new Float32Array(n);
    for (let i = 0; i < n; i++) samples[i] = data.readFloatLE(4 * i);
  } else if (fmt.tag === 3 && fmt.bits === 64) {
    const n = Math.floor(data.length / 8);
    samples = new Float32Array(n);
    for (let i = 0; i < n; i++) samples[i] = data.readDoubleLE(8 * i);
  } else {
    throw new WavFormatError(
      `${path}: unsupported format tag ${fmt.tag} / bit depth ${fmt.bits}`);
  }
  if (fmt.rate <= 0) throw new WavFormatError(`${path}: invalid sample rate ${fmt.rate}`);
  return { samples, sampleRateHz: fmt.rate };
}

/** 16-bit PCM writer (test fixtures only). */
export function encodeWav(samples: Float32Array, sampleRateHz: number): Buffer {
  const pcm = Buffer.alloc(samples.length * 2);
  for (let i = 0; i < samples.length; i++) {
    const clipped = Math.max(-1, Math.min(1, samples[i]));
    pcm.writeInt16LE(Math.round(clipped * 32767), 2 * i);
  }
  const header = Buffer.alloc(44);
  header.write("RIFF", 0, "ascii");
  header.writeUInt32LE(36 + pcm.length, 4);
  header.write("WAVE", 8, "ascii");
  header.write("fmt ", 12, "ascii");
  header.writeUInt32LE(16, 16);
  header.writeUInt16LE(1, 20);
  header.writeUInt16LE(1, 22);
  header.writeUInt32LE(sampleRateHz, 24);
  header.writeUInt32LE(sampleRateHz * 2, 28);
  header.writeUInt16LE(2, 32);
  header.writeUInt16LE(16, 34);
  header.write("data", 36, "ascii");
  header.writeUInt32LE(pcm.length, 40);
  return Buffer.concat([header, pcm]);
}

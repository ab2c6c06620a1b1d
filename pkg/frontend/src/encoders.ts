/** Encoder backends: the ONNX runner plus the model registry.
 *
 * Each model id resolves to `<modelDir>/<id>.onnx` with an optional
 * `<id>.json` sidecar ({"inputLayout": "B1T" | "BT"}). Published encoder
 * checkpoints exported to ONNX run unmodified; the three audio encoder
 * ids must emit 768-dim frames. Frame rate is measured from the model's
 * actual output length against the input duration, never hard-coded.
 */

import { existsSync, readFileSync } from "node:fs";
import { join } from "node:path";

export interface EncodedSequence {
  data: Float32Array; // (frames, dim) row-major
  frames: number;
  dim: number;
  frameRateHz: number;
}

export interface Encoder {
  readonly id: string;
  /** Expected embedding width, checked after inference; null = free. */
  readonly expectedDim: number | null;
  encode(samples: Float32Array, sampleRateHz: number): Promise<EncodedSequence>;
}

export class ModelError extends Error {}

export const MODEL_IDS = ["wavlm_base", "whisper_small", "dasheng_base", "speaker"] as const;
export type ModelId = (typeof MODEL_IDS)[number];

const AUDIO_ENCODER_DIM = 768;

export function expectedDimFor(modelId: string): number | null {
  return modelId === "speaker" ? null : AUDIO_ENCODER_DIM;
}

interface Sidecar {
  inputLayout?: "B1T" | "BT";
}

export class OnnxEncoder implements Encoder {
  readonly id: string;
  readonly expectedDim: number | null;
  private modelPath: string;
  private layout: "B1T" | "BT";
  private session: any | null = null;

  constructor(id: string, modelDir: string) {
    this.id = id;
    this.expectedDim = expectedDimFor(id);
    this.modelPath = join(modelDir, `${id}.onnx`);
    if (!existsSync(this.modelPath)) {
      throw new ModelError(
        `model checkpoint not found: ${this.modelPath} (export the encoder to ONNX first)`);
    }
    let sidecar: Sidecar = {};
    const sidecarPath = join(modelDir, `${id}.json`);
    if (existsSync(sidecarPath)) {
      sidecar = JSON.parse(readFileSync(sidecarPath, "utf-8"));
    }
    this.layout = sidecar.inputLayout ?? "B1T";
  }

  private async getSession(): Promise<any> {
    if (this.session === null) {
      const ort = await import("onnxruntime-web");
      ort.env.wasm.numThreads = 1; // deterministic single-threaded inference
      this.session = await ort.InferenceSession.create(
        readFileSync(this.modelPath), { executionProviders: ["wasm"] });
    }
    return this.session;
  }

  async encode(samples: Float32Array, sampleRateHz: number): Promise<EncodedSequence> {
    if (sampleRateHz !== 16000) {
      throw new ModelError(
        `encoders expect 16 kHz input, got ${sampleRateHz} Hz; resample first`);
    }
    const ort = await import("onnxruntime-web");
    const session = await this.getSession();
    const dims = this.layout === "B1T" ? [1, 1, samples.length] : [1, samples.length];
    const feeds: Record<string, any> = {
      [session.inputNames[0]]: new ort.Tensor("float32", samples, dims),
    };
    const outputs = await session.run(feeds);
    const out = outputs[session.outputNames[0]];
    if (out.dims.length !== 3 || out.dims[0] !== 1) {
      throw new ModelError(
        `${this.id}: expected (1, frames, dim) output, got [${out.dims.join(", ")}]`);
    }
    const frames = out.dims[1];
    const dim = out.dims[2];
    if (this.expectedDim !== null && dim !== this.expectedDim) {
      throw new ModelError(
        `${this.id}: embedding dim ${dim} != required ${this.expectedDim}`);
    }
    const durationS = samples.length / sampleRateHz;
    return {
      data: Float32Array.from(out.data as Float32Array),
      frames,
      dim,
      frameRateHz: frames / durationS,
    };
  }
}

export function resolveEncoder(modelId: string, modelDir: string): Encoder {
  if (!(MODEL_IDS as readonly string[]).includes(modelId)) {
    throw new ModelError(`unknown model id ${modelId!}; known: ${MODEL_IDS.join(", ")}`);
  }
  return new OnnxEncoder(modelId, modelDir);
}

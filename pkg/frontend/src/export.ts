/** Batch export: run an encoder over a WAV directory, write EMB1 files. */

import { readdirSync, writeFileSync, mkdirSync } from "node:fs";
import { basename, join } from "node:path";

import { encodeEmb1 } from "./emb1.js";
import { Encoder } from "./encoders.js";
import { readWav } from "./wav.js";

export interface ExportJob {
  encoder: Encoder;
  inputDir: string;
  outputDir: string;
  log?: (message: string) => void;
}

export interface ExportResult {
  written: number;
  failed: number;
  failures: { file: string; error: string }[];
}

export async function exportEmbeddings(job: ExportJob): Promise<ExportResult> {
  const log = job.log ?? (() => {});
  const wavs = readdirSync(job.inputDir)
    .filter((f) => f.toLowerCase().endsWith(".wav"))
    .sort();
  if (wavs.length === 0) {
    throw new Error(`no .wav files in ${job.inputDir}`);
  }
  mkdirSync(job.outputDir, { recursive: true });

  const result: ExportResult = { written: 0, failed: 0, failures: [] };
  for (const name of wavs) {
    const inPath = join(job.inputDir, name);
    try {
      const wav = readWav(inPath);
      const seq = await job.encoder.encode(wav.samples, wav.sampleRateHz);
      const outPath = join(job.outputDir, basename(name, ".wav") + ".emb");
      writeFileSync(outPath, encodeEmb1({
        data: seq.data,
        dim: seq.dim,
        frames: seq.frames,
        frameRateHz: seq.frameRateHz,
        encoderId: job.encoder.id,
      }));
      result.written += 1;
      log(`${name} -> ${outPath} (${seq.frames} x ${seq.dim} @ ${seq.frameRateHz.toFixed(2)} Hz)`);
    } catch (err) {
      result.failed += 1;
      result.failures.push({ file: name, error: String(err) });
      log(`ERROR ${name}: ${err}`);
    }
  }
  return result;
}

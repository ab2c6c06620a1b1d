#!/usr/bin/env node
/** export-emb: run a pre-trained encoder over a WAV directory.
 *
 * Usage: export-emb --model <id> --in <dir> --out <dir> [--model-dir <dir>]
 * Exit codes: 0 success (some files may have failed), 1 nothing exported,
 * 2 bad arguments or missing model.
 */

import { MODEL_IDS, ModelError, resolveEncoder } from "./encoders.js";
import { exportEmbeddings } from "./export.js";

function parseArgs(argv: string[]): Record<string, string> {
  const args: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new ModelError(`malformed arguments near ${key}`);
    }
    args[key.slice(2)] = argv[i + 1];
  }
  return args;
}

export async function main(argv: string[]): Promise<number> {
  let args: Record<string, string>;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err));
    return 2;
  }
  const missing = ["model", "in", "out"].filter((k) => !(k in args));
  if (missing.length > 0) {
    console.error(`missing required arguments: ${missing.map((m) => "--" + m).join(", ")}`);
    console.error(`usage: export-emb --model {${MODEL_IDS.join("|")}} --in dir --out dir [--model-dir dir]`);
    return 2;
  }
  try {
    const encoder = resolveEncoder(args.model, args["model-dir"] ?? "models");
    const result = await exportEmbeddings({
      encoder,
      inputDir: args.in,
      outputDir: args.out,
      log: (m) => console.error(m),
    });
    console.log(JSON.stringify({ written: result.written, failed: result.failed }));
    return result.written > 0 ? 0 : 1;
  } catch (err) {
    console.error(String(err));
    return err instanceof ModelError ? 2 : 1;
  }
}

const invokedDirectly = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}

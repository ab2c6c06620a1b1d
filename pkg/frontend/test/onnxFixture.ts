/** Build a tiny valid ONNX model in-process (hand-encoded protobuf):
 * waveform (1,1,T) -> Conv(kernel 32, stride 320, `dim` channels) ->
 * Transpose -> embeddings (1, F, dim). 50 Hz frame rate at 16 kHz input,
 * deterministic weights from a seeded PRNG.
 */

function varint(n: number | bigint): Buffer {
  let v = BigInt(n);
  const out: number[] = [];
  for (;;) {
    const b7 = Number(v & 0x7fn);
    v >>= 7n;
    if (v !== 0n) out.push(b7 | 0x80);
    else {
      out.push(b7);
      return Buffer.from(out);
    }
  }
}

function tag(field: number, wire: number): Buffer {
  return varint((field << 3) | wire);
}

function fVarint(field: number, value: number): Buffer {
  return Buffer.concat([tag(field, 0), varint(value)]);
}

function fBytes(field: number, payload: Buffer): Buffer {
  return Buffer.concat([tag(field, 2), varint(payload.length), payload]);
}

function fString(field: number, s: string): Buffer {
  return fBytes(field, Buffer.from(s, "utf-8"));
}

function attrInts(name: string, values: number[]): Buffer {
  return Buffer.concat([
    fString(1, name),
    ...values.map((v) => fVarint(8, v)),
    fVarint(20, 7), // AttributeType.INTS
  ]);
}

function node(opType: string, inputs: string[], outputs: string[], attrs: Buffer[]): Buffer {
  return Buffer.concat([
    ...inputs.map((i) => fString(1, i)),
    ...outputs.map((o) => fString(2, o)),
    fString(3, opType.toLowerCase()),
    fString(4, opType),
    ...attrs.map((a) => fBytes(5, a)),
  ]);
}

function tensorF32(name: string, dims: number[], data: Float32Array): Buffer {
  const raw = Buffer.alloc(data.length * 4);
  for (let i = 0; i < data.length; i++) raw.writeFloatLE(data[i], 4 * i);
  return Buffer.concat([
    ...dims.map((d) => fVarint(1, d)),
    fVarint(2, 1), // FLOAT
    fString(8, name),
    fBytes(9, raw),
  ]);
}

function dimValue(v: number): Buffer {
  return fVarint(1, v);
}

function dimParam(s: string): Buffer {
  return fString(2, s);
}

function valueInfo(name: string, dims: Buffer[]): Buffer {
  const shape = Buffer.concat(dims.map((d) => fBytes(1, d)));
  const tensorType = Buffer.concat([fVarint(1, 1), fBytes(2, shape)]);
  return Buffer.concat([fString(1, name), fBytes(2, fBytes(1, tensorType))]);
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function buildToyOnnxModel(dim = 768, kernel = 32, stride = 320, seed = 0): Buffer {
  const rand = mulberry32(seed + 1);
  const weights = new Float32Array(dim * kernel);
  for (let i = 0; i < weights.length; i++) weights[i] = (rand() - 0.5) * 0.1;

  const conv = node("Conv", ["waveform", "proj_weight"], ["conv_out"], [
    attrInts("kernel_shape", [kernel]),
    attrInts("strides", [stride]),
  ]);
  const transpose = node("Transpose", ["conv_out"], ["embeddings"], [
    attrInts("perm", [0, 2, 1]),
  ]);
  const graph = Buffer.concat([
    fBytes(1, conv),
    fBytes(1, transpose),
    fString(2, "toy_audio_encoder"),
    fBytes(5, tensorF32("proj_weight", [dim, 1, kernel], weights)),
    fBytes(11, valueInfo("waveform", [dimValue(1), dimValue(1), dimParam("T")])),
    fBytes(12, valueInfo("embeddings", [dimValue(1), dimParam("F"), dimValue(dim)])),
  ]);
  const opset = Buffer.concat([fString(1, ""), fVarint(2, 17)]);
  return Buffer.concat([
    fVarint(1, 8), // ir_version
    fString(2, "embden-export-fixture"),
    fBytes(7, graph),
    fBytes(8, opset),
  ]);
}

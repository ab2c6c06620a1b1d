export { readWav, encodeWav, WavFormatError } from "./wav.js";
export { encodeEmb1, decodeEmb1, EmbeddingFormatError, type EmbeddingFile } from "./emb1.js";
export {
  MODEL_IDS,
  ModelError,
  OnnxEncoder,
  expectedDimFor,
  resolveEncoder,
  type EncodedSequence,
  type Encoder,
} from "./encoders.js";
export { exportEmbeddings, type ExportJob, type ExportResult } from "./export.js";

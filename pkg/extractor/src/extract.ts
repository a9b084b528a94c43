/** Treebank-to-PCFS extraction with pooling, truncation, and baselines. */

import { parseConllu } from "./conllu";
import { Encoder, Pooling, ReferenceEncoder, subwordize } from "./encoder";
import { FeatureStore, Manifest, writeStore } from "./pcfs";
import * as fs from "fs";
import * as path from "path";

export type BaselineMode = "none" | "layer0" | "random-weights";

export interface ExtractionJob {
  modelName: string;
  layer: number;
  treebankPath: string;
  pooling: Pooling;
  maxSequenceLength: number;
  baseline: BaselineMode;
  language: string;
  nDim: number;
  seed: number;
}

export const DEFAULT_JOB: Omit<ExtractionJob, "treebankPath" | "language"> = {
  modelName: "reference-encoder",
  layer: 7,
  pooling: "mean",
  maxSequenceLength: 128,
  baseline: "none",
  nDim: 64,
  seed: 0,
};

export interface ExtractionResult {
  storePath: string;
  truncated: { sentenceId: string; kept: number; total: number }[];
}

const RANDOM_WEIGHTS_SEED_OFFSET = 7919;

export function encoderForJob(job: ExtractionJob): Encoder {
  const seed =
    job.baseline === "random-weights"
      ? job.seed + RANDOM_WEIGHTS_SEED_OFFSET
      : job.seed;
  return new ReferenceEncoder(job.nDim, seed);
}

export function extractFeatures(
  job: ExtractionJob,
  outDir: string,
  log: (message: string) => void = console.error,
): ExtractionResult {
  const text = fs.readFileSync(job.treebankPath, "utf-8");
  const sentences = parseConllu(text);
  const encoder = encoderForJob(job);
  const layer = job.baseline === "layer0" ? 0 : job.layer;
  const truncated: ExtractionResult["truncated"] = [];
  const matrices: Float32Array[] = [];
  for (const sentence of sentences) {
    let forms = sentence.forms;
    if (forms.length > job.maxSequenceLength) {
      truncated.push({
        sentenceId: sentence.id,
        kept: job.maxSequenceLength,
        total: forms.length,
      });
      log(
        `truncating ${sentence.id}: ${forms.length} -> ${job.maxSequenceLength} tokens`,
      );
      forms = forms.slice(0, job.maxSequenceLength);
    }
    const subwords = forms.map((form) => subwordize(form));
    const vectors = encoder.encode(subwords, layer, job.pooling);
    const flat = new Float32Array(vectors.length * job.nDim);
    vectors.forEach((vec, i) => flat.set(vec, i * job.nDim));
    matrices.push(flat);
  }
  const manifest: Manifest = {
    language: job.language,
    model_name:
      job.baseline === "random-weights"
        ? `${job.modelName}[random-weights seed=${job.seed + RANDOM_WEIGHTS_SEED_OFFSET}]`
        : job.modelName,
    layer,
    treebank_file: path.basename(job.treebankPath),
    n_sentences: matrices.length,
    n_dim: job.nDim,
    content_checksum: "0".repeat(16),
    pooling: job.pooling,
  };
  const store: FeatureStore = { nDim: job.nDim, sentences: matrices, manifest };
  fs.mkdirSync(outDir, { recursive: true });
  const base = path.basename(job.treebankPath).replace(/\.conllu$/, "");
  const storePath = path.join(outDir, `${base}.pcfs`);
  writeStore(store, storePath);
  return { storePath, truncated };
}

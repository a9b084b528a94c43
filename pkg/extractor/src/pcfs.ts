/**
 * PCFS feature-store container, bit-exact with the analysis toolkit.
 *
 * Layout (little-endian): magic "PCFS" | u32 version=1 | u32 nDim |
 * u32 nSentences | per sentence: u32 nTokens then nTokens*nDim float32 |
 * trailing u64 FNV-1a checksum of every preceding byte. A JSON manifest
 * is written beside the store as `<path>.manifest.json`.
 */

import * as fs from "fs";

const MAGIC = Buffer.from("PCFS", "ascii");
const VERSION = 1;

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

export function fnv1a64(data: Buffer): bigint {
  let hash = FNV_OFFSET;
  for (const byte of data) {
    hash = ((hash ^ BigInt(byte)) * FNV_PRIME) & MASK64;
  }
  return hash;
}

export interface Manifest {
  language: string;
  model_name: string;
  layer: number;
  treebank_file: string;
  n_sentences: number;
  n_dim: number;
  content_checksum: string; // 16 hex chars
  pooling: string;
}

export interface FeatureStore {
  nDim: number;
  sentences: Float32Array[]; // row-major nTokens x nDim each
  manifest: Manifest;
}

export function manifestPath(path: string): string {
  return path + ".manifest.json";
}

function manifestJson(manifest: Manifest): string {
  const ordered: Record<string, unknown> = {};
  for (const key of Object.keys(manifest).sort()) {
    ordered[key] = (manifest as unknown as Record<string, unknown>)[key];
  }
  return JSON.stringify(ordered, null, 2) + "\n";
}

export function writeStore(store: FeatureStore, path: string): void {
  const { nDim, sentences } = store;
  const parts: Buffer[] = [MAGIC, Buffer.alloc(12)];
  parts[1].writeUInt32LE(VERSION, 0);
  parts[1].writeUInt32LE(nDim, 4);
  parts[1].writeUInt32LE(sentences.length, 8);
  for (const sentence of sentences) {
    if (sentence.length % nDim !== 0) {
      throw new Error(`sentence payload not a multiple of nDim=${nDim}`);
    }
    const header = Buffer.alloc(4);
    header.writeUInt32LE(sentence.length / nDim, 0);
    parts.push(header);
    const payload = Buffer.alloc(4 * sentence.length);
    for (let i = 0; i < sentence.length; i++) {
      payload.writeFloatLE(sentence[i], 4 * i);
    }
    parts.push(payload);
  }
  const body = Buffer.concat(parts);
  const checksum = fnv1a64(body);
  const trailer = Buffer.alloc(8);
  trailer.writeBigUInt64LE(checksum, 0);
  fs.writeFileSync(path, Buffer.concat([body, trailer]));
  store.manifest.n_sentences = sentences.length;
  store.manifest.n_dim = nDim;
  store.manifest.content_checksum = checksum.toString(16).padStart(16, "0");
  fs.writeFileSync(manifestPath(path), manifestJson(store.manifest), "utf-8");
}

export function readStore(path: string): FeatureStore {
  const data = fs.readFileSync(path);
  if (data.length < 4 || !data.subarray(0, 4).equals(MAGIC)) {
    throw new Error(`${path}: bad magic`);
  }
  const version = data.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  const nDim = data.readUInt32LE(8);
  const nSentences = data.readUInt32LE(12);
  const bodyEnd = data.length - 8;
  const stored = data.readBigUInt64LE(bodyEnd);
  const computed = fnv1a64(data.subarray(0, bodyEnd));
  if (stored !== computed) {
    throw new Error(`${path}: checksum mismatch`);
  }
  let offset = 16;
  const sentences: Float32Array[] = [];
  for (let s = 0; s < nSentences; s++) {
    const nTokens = data.readUInt32LE(offset);
    offset += 4;
    const values = new Float32Array(nTokens * nDim);
    for (let i = 0; i < values.length; i++) {
      values[i] = data.readFloatLE(offset + 4 * i);
    }
    offset += 4 * values.length;
    sentences.push(values);
  }
  if (offset !== bodyEnd) {
    throw new Error(`${path}: trailing payload bytes`);
  }
  const manifest = JSON.parse(
    fs.readFileSync(manifestPath(path), "utf-8"),
  ) as Manifest;
  return { nDim, sentences, manifest };
}

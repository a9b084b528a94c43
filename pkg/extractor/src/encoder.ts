/**
 * Deterministic reference encoder.
 *
 * Stands in for a transformer backend when no model weights are available:
 * hash-seeded subword embeddings mixed through seeded linear layers with
 * neighbor context, so deeper layers carry more contextual information and
 * layer 0 carries none. Real backends only need to implement `Encoder`.
 */

export interface Encoder {
  readonly nDim: number;
  /** One vector per word for a tokenized sentence (subwords per word). */
  encode(subwordsPerWord: string[][], layer: number, pooling: Pooling): Float32Array[];
}

export type Pooling = "mean" | "first-subtoken";

function mix64(value: bigint): bigint {
  let v = value & 0xffffffffffffffffn;
  v ^= v >> 33n;
  v = (v * 0xff51afd7ed558ccdn) & 0xffffffffffffffffn;
  v ^= v >> 33n;
  v = (v * 0xc4ceb9fe1a85ec53n) & 0xffffffffffffffffn;
  v ^= v >> 33n;
  return v;
}

function hashString(text: string, seed: bigint): bigint {
  let hash = seed ^ 0xcbf29ce484222325n;
  for (let i = 0; i < text.length; i++) {
    hash = ((hash ^ BigInt(text.charCodeAt(i))) * 0x100000001b3n) & 0xffffffffffffffffn;
  }
  return mix64(hash);
}

/** Uniform in [-1, 1), deterministic in (key, index). */
function unit(key: bigint, index: number): number {
  const bits = mix64(key + BigInt(index) * 0x9e3779b97f4a7c15n);
  return Number(bits >> 11n) / 2 ** 53 * 2 - 1;
}

export class ReferenceEncoder implements Encoder {
  readonly nDim: number;
  private readonly seed: bigint;
  private readonly nLayers: number;

  constructor(nDim = 64, seed = 0, nLayers = 12) {
    this.nDim = nDim;
    this.seed = mix64(BigInt(seed) ^ 0xa0761fe2d8f6a245n);
    this.nLayers = nLayers;
  }

  private embedding(subword: string): Float64Array {
    const key = hashString(subword, this.seed);
    const vec = new Float64Array(this.nDim);
    for (let d = 0; d < this.nDim; d++) {
      vec[d] = unit(key, d);
    }
    return vec;
  }

  private layerWeight(layer: number, row: number, col: number): number {
    const key = mix64(this.seed ^ (BigInt(layer + 1) * 0xd6e8feb86659fd93n));
    return unit(key, row * this.nDim + col) / Math.sqrt(this.nDim);
  }

  encode(subwordsPerWord: string[][], layer: number, pooling: Pooling): Float32Array[] {
    if (layer < 0 || layer > this.nLayers) {
      throw new Error(`layer ${layer} outside [0, ${this.nLayers}]`);
    }
    // subword states, then per-layer context mixing across the sentence
    const flat: Float64Array[] = [];
    const wordOf: number[] = [];
    subwordsPerWord.forEach((subwords, w) => {
      for (const sw of subwords) {
        flat.push(this.embedding(sw));
        wordOf.push(w);
      }
    });
    let states = flat;
    for (let l = 1; l <= layer; l++) {
      const next: Float64Array[] = [];
      for (let i = 0; i < states.length; i++) {
        const left = states[i - 1] ?? states[i];
        const right = states[i + 1] ?? states[i];
        const ctx = new Float64Array(this.nDim);
        for (let d = 0; d < this.nDim; d++) {
          ctx[d] = states[i][d] + 0.5 * (left[d] + right[d]);
        }
        const out = new Float64Array(this.nDim);
        for (let r = 0; r < this.nDim; r++) {
          let sum = 0;
          for (let c = 0; c < this.nDim; c++) {
            sum += this.layerWeight(l, r, c) * ctx[c];
          }
          out[r] = Math.tanh(sum) + states[i][r] * 0.5;
        }
        next.push(out);
      }
      states = next;
    }
    // pool subwords back to words
    const words: Float32Array[] = [];
    subwordsPerWord.forEach((subwords, w) => {
      const rows = states.filter((_, i) => wordOf[i] === w);
      const out = new Float32Array(this.nDim);
      if (pooling === "first-subtoken") {
        for (let d = 0; d < this.nDim; d++) {
          out[d] = rows[0][d];
        }
      } else {
        for (const row of rows) {
          for (let d = 0; d < this.nDim; d++) {
            out[d] += row[d];
          }
        }
        for (let d = 0; d < this.nDim; d++) {
          out[d] /= rows.length;
        }
      }
      words.push(out);
    });
    return words;
  }
}

/** Deterministic subword splitter: fixed-width chunks of the lowercased form. */
export function subwordize(form: string, width = 4): string[] {
  const lower = form.toLowerCase();
  if (lower.length <= width) {
    return [lower];
  }
  const pieces: string[] = [];
  for (let i = 0; i < lower.length; i += width) {
    pieces.push((i === 0 ? "" : "##") + lower.slice(i, i + width));
  }
  return pieces;
}

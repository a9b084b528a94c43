import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { fnv1a64, readStore, writeStore, FeatureStore, Manifest } from "../src/pcfs";

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "pcfs-"));
}

function makeStore(sentences: number[][][], language = "en"): FeatureStore {
  const nDim = sentences[0][0].length;
  const manifest: Manifest = {
    language,
    model_name: "test",
    layer: 7,
    treebank_file: "x.conllu",
    n_sentences: sentences.length,
    n_dim: nDim,
    content_checksum: "0".repeat(16),
    pooling: "mean",
  };
  return {
    nDim,
    sentences: sentences.map((rows) => Float32Array.from(rows.flat())),
    manifest,
  };
}

describe("fnv1a64", () => {
  it("matches the reference vectors", () => {
    expect(fnv1a64(Buffer.from(""))).toBe(0xcbf29ce484222325n);
    expect(fnv1a64(Buffer.from("a"))).toBe(0xaf63dc4c8601ec8cn);
    expect(fnv1a64(Buffer.from("foobar"))).toBe(0x85944171f73967e8n);
  });
});

describe("writeStore", () => {
  it("produces the documented byte layout", () => {
    const dir = tmpdir();
    const file = path.join(dir, "s.pcfs");
    writeStore(makeStore([[[0, 0, 0], [0, 0, 0]]]), file);
    // magic+version+dims+count (16) + sentence header (4) + 24 payload + 8
    expect(fs.statSync(file).size).toBe(52);
    const data = fs.readFileSync(file);
    expect(data.subarray(0, 4).toString("ascii")).toBe("PCFS");
    expect(data.readUInt32LE(4)).toBe(1);
    expect(data.readUInt32LE(8)).toBe(3);
    expect(data.readUInt32LE(12)).toBe(1);
  });

  it("round-trips through its own reader", () => {
    const dir = tmpdir();
    const file = path.join(dir, "s.pcfs");
    const store = makeStore([[[1.5, -2.25]], [[0.125, 4096], [3, -0.5]]]);
    writeStore(store, file);
    const loaded = readStore(file);
    expect(loaded.nDim).toBe(2);
    expect(loaded.sentences.length).toBe(2);
    expect([...loaded.sentences[1]]).toEqual([0.125, 4096, 3, -0.5]);
    expect(loaded.manifest.content_checksum).toBe(
      store.manifest.content_checksum,
    );
  });

  it("rejects corrupted payloads", () => {
    const dir = tmpdir();
    const file = path.join(dir, "s.pcfs");
    writeStore(makeStore([[[1, 2], [3, 4]]]), file);
    const data = fs.readFileSync(file);
    data[18] ^= 0xff;
    fs.writeFileSync(file, data);
    expect(() => readStore(file)).toThrow(/checksum/);
  });

  it("is byte-deterministic", () => {
    const dir = tmpdir();
    const a = path.join(dir, "a.pcfs");
    const b = path.join(dir, "b.pcfs");
    writeStore(makeStore([[[1, 2, 3]]]), a);
    writeStore(makeStore([[[1, 2, 3]]]), b);
    expect(fs.readFileSync(a).equals(fs.readFileSync(b))).toBe(true);
  });
});

describe("cross-component contract", () => {
  it("stores load in the analysis toolkit with matching counts", () => {
    const dir = tmpdir();
    const file = path.join(dir, "tiny.pcfs");
    writeStore(makeStore([[[1, 2], [3, 4], [5, 6]], [[7, 8]]]), file);
    const script = [
      "import sys",
      "from protoalign.featurestore import read_store",
      `store = read_store(${JSON.stringify(file)})`,
      "print(store.n_dim, store.n_sentences, store.token_counts())",
    ].join("\n");
    const out = execFileSync("python3", ["-c", script], { encoding: "utf-8" });
    expect(out.trim()).toBe("2 2 [3, 1]");
  });
});

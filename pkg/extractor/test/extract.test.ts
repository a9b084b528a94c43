import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { parseConllu } from "../src/conllu";
import { ReferenceEncoder, subwordize } from "../src/encoder";
import { DEFAULT_JOB, extractFeatures } from "../src/extract";
import { readStore } from "../src/pcfs";
import { englishSample } from "./fixtures";

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "extract-"));
}

function writeFixture(dir: string, nSentences: number): string {
  const treebank = path.join(dir, "en_sample.conllu");
  fs.writeFileSync(treebank, englishSample(nSentences), "utf-8");
  return treebank;
}

describe("subword pooling", () => {
  it("mean pooling of a single subtoken is that subtoken's vector", () => {
    const enc = new ReferenceEncoder(16, 1);
    const single = enc.encode([["cat"]], 3, "mean");
    const first = enc.encode([["cat"]], 3, "first-subtoken");
    expect([...single[0]]).toEqual([...first[0]]);
  });

  it("splits long forms into deterministic chunks", () => {
    expect(subwordize("cat")).toEqual(["cat"]);
    expect(subwordize("measurement")).toEqual(["meas", "##urem", "##ent"]);
  });
});

describe("extractFeatures", () => {
  it("writes one vector per treebank token", () => {
    const dir = tmpdir();
    const treebank = writeFixture(dir, 100);
    const result = extractFeatures(
      { ...DEFAULT_JOB, treebankPath: treebank, language: "en" },
      path.join(dir, "out"),
      () => {},
    );
    const store = readStore(result.storePath);
    const sentences = parseConllu(fs.readFileSync(treebank, "utf-8"));
    expect(store.n_sentences ?? store.sentences.length).toBe(sentences.length);
    sentences.forEach((sentence, i) => {
      expect(store.sentences[i].length / store.nDim).toBe(sentence.forms.length);
    });
    expect(result.truncated).toEqual([]);
  });

  it("truncates over-long sentences and reports them", () => {
    const dir = tmpdir();
    const treebank = writeFixture(dir, 3);
    const logs: string[] = [];
    const result = extractFeatures(
      { ...DEFAULT_JOB, treebankPath: treebank, language: "en",
        maxSequenceLength: 5 },
      path.join(dir, "out"),
      (message) => logs.push(message),
    );
    expect(result.truncated.length).toBe(3);
    expect(logs.length).toBe(3);
    const store = readStore(result.storePath);
    expect(store.sentences[0].length / store.nDim).toBe(5);
  });

  it("layer0 ignores context while deeper layers use it", () => {
    const enc = new ReferenceEncoder(16, 0);
    const isolated = enc.encode([["cat"]], 0, "mean");
    const inContext = enc.encode([["the"], ["cat"], ["sleeps"]], 0, "mean");
    expect([...inContext[1]]).toEqual([...isolated[0]]);
    const deepIsolated = enc.encode([["cat"]], 7, "mean");
    const deepContext = enc.encode([["the"], ["cat"], ["sleeps"]], 7, "mean");
    expect([...deepContext[1]]).not.toEqual([...deepIsolated[0]]);
  });

  it("random-weights baseline differs and is recorded in the manifest", () => {
    const dir = tmpdir();
    const treebank = writeFixture(dir, 2);
    const base = extractFeatures(
      { ...DEFAULT_JOB, treebankPath: treebank, language: "en" },
      path.join(dir, "base"), () => {});
    const rand = extractFeatures(
      { ...DEFAULT_JOB, treebankPath: treebank, language: "en",
        baseline: "random-weights" },
      path.join(dir, "rand"), () => {});
    const s1 = readStore(base.storePath);
    const s2 = readStore(rand.storePath);
    expect([...s1.sentences[0]]).not.toEqual([...s2.sentences[0]]);
    expect(s2.manifest.model_name).toMatch(/random-weights/);
  });

  it("is deterministic byte for byte", () => {
    const dir = tmpdir();
    const treebank = writeFixture(dir, 5);
    const r1 = extractFeatures({ ...DEFAULT_JOB, treebankPath: treebank,
      language: "en" }, path.join(dir, "o1"), () => {});
    const r2 = extractFeatures({ ...DEFAULT_JOB, treebankPath: treebank,
      language: "en" }, path.join(dir, "o2"), () => {});
    expect(fs.readFileSync(r1.storePath).equals(fs.readFileSync(r2.storePath)))
      .toBe(true);
  });
});

describe("extraction round-trip acceptance", () => {
  it("a 100-sentence English sample loads in the analysis toolkit with "
     + "matching token counts", () => {
    const dir = tmpdir();
    const treebank = writeFixture(dir, 100);
    const result = extractFeatures(
      { ...DEFAULT_JOB, treebankPath: treebank, language: "en" },
      path.join(dir, "out"), () => {});
    const script = [
      "from pathlib import Path",
      "from protoalign.featurestore import read_store",
      "from protoalign.treebank import parse_conllu, build_pos_dataset",
      `store = read_store(${JSON.stringify(result.storePath)})`,
      `sentences = parse_conllu(Path(${JSON.stringify(treebank)}).read_text())`,
      "assert store.n_sentences == len(sentences) == 100",
      "assert store.token_counts() == [len(s.tokens) for s in sentences]",
      "ds = build_pos_dataset(sentences, store)",
      "print('OK', ds.n_samples, len(ds.vocab))",
    ].join("\n");
    const out = execFileSync("python3", ["-c", script], { encoding: "utf-8" });
    expect(out).toMatch(/^OK 800 6/);
    console.log(`[ACCEPTANCE] extraction-round-trip: PASS (${out.trim()})`);
  });
});

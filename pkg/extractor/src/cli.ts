#!/usr/bin/env node
/**
 * concept-extract <extract|icl> ...
 *
 * extract --treebank P --out DIR [--model NAME] [--layer 7] [--pooling mean]
 *         [--language xx] [--dim 64] [--seed 0] [--baseline none]
 *         [--max-len 128]
 * icl     --spec S.json --sentences F.conllu --out DIR [--dim 64] [--seed 0]
 *
 * The icl spec JSON: {"demonstrations_treebank": path, "n_demonstrations": 9,
 * "label_form": "UPOS"|"SHFL"|"PXY"|"Word", "delimiter": ": "}.
 */

import * as fs from "fs";
import * as path from "path";

import { parseConllu } from "./conllu";
import { DEFAULT_JOB, extractFeatures, BaselineMode } from "./extract";
import { iclTag, writeHiddenStates } from "./icl";
import { DemoLookupTagger } from "./mocktagger";
import { Demonstration, LabelForm, labelInventory, makePromptSpec } from "./prompt";
import { Pooling } from "./encoder";

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near ${argv[i]}`);
    }
    args.set(argv[i].slice(2), argv[i + 1]);
  }
  return args;
}

function required(args: Map<string, string>, name: string): string {
  const value = args.get(name);
  if (value === undefined) {
    throw new Error(`missing required --${name}`);
  }
  return value;
}

/** Greedy demonstration choice: prefer sentences adding unseen labels. */
export function chooseDemonstrations(
  sentences: { forms: string[]; upos: string[] }[],
  count: number,
): Demonstration[] {
  const chosen: Demonstration[] = [];
  const used = new Set<number>();
  const covered = new Set<string>();
  while (chosen.length < Math.min(count, sentences.length)) {
    let best = -1;
    let bestGain = -1;
    for (let i = 0; i < sentences.length; i++) {
      if (used.has(i)) continue;
      const gain = new Set(sentences[i].upos.filter((t) => !covered.has(t))).size;
      if (gain > bestGain) {
        best = i;
        bestGain = gain;
      }
    }
    used.add(best);
    for (const tag of sentences[best].upos) covered.add(tag);
    chosen.push({ forms: sentences[best].forms, upos: sentences[best].upos });
  }
  return chosen;
}

function cmdExtract(args: Map<string, string>): number {
  const job = {
    ...DEFAULT_JOB,
    treebankPath: required(args, "treebank"),
    language: args.get("language") ?? "und",
    modelName: args.get("model") ?? DEFAULT_JOB.modelName,
    layer: Number(args.get("layer") ?? DEFAULT_JOB.layer),
    pooling: (args.get("pooling") ?? DEFAULT_JOB.pooling) as Pooling,
    maxSequenceLength: Number(args.get("max-len") ?? DEFAULT_JOB.maxSequenceLength),
    baseline: (args.get("baseline") ?? "none") as BaselineMode,
    nDim: Number(args.get("dim") ?? DEFAULT_JOB.nDim),
    seed: Number(args.get("seed") ?? DEFAULT_JOB.seed),
  };
  if (!["mean", "first-subtoken"].includes(job.pooling)) {
    throw new Error(`unknown pooling ${job.pooling}`);
  }
  if (!["none", "layer0", "random-weights"].includes(job.baseline)) {
    throw new Error(`unknown baseline ${job.baseline}`);
  }
  const result = extractFeatures(job, required(args, "out"));
  console.log(result.storePath);
  return 0;
}

function cmdIcl(args: Map<string, string>): number {
  const spec = JSON.parse(fs.readFileSync(required(args, "spec"), "utf-8"));
  const labelForm = (spec.label_form ?? "UPOS") as LabelForm;
  if (!["UPOS", "SHFL", "PXY", "Word"].includes(labelForm)) {
    throw new Error(`unknown label form ${labelForm}`);
  }
  const demoSentences = parseConllu(
    fs.readFileSync(spec.demonstrations_treebank, "utf-8"),
  );
  const demonstrations = chooseDemonstrations(
    demoSentences,
    spec.n_demonstrations ?? 9,
  );
  const promptSpec = makePromptSpec(
    demonstrations,
    labelForm,
    spec.delimiter ?? ": ",
  );
  const nDim = Number(args.get("dim") ?? 64);
  const tagger = new DemoLookupTagger(nDim, Number(args.get("seed") ?? 0));
  const sentences = parseConllu(
    fs.readFileSync(required(args, "sentences"), "utf-8"),
  );
  const tagged = sentences.map((sentence) => iclTag(tagger, promptSpec, sentence));
  const outDir = required(args, "out");
  fs.mkdirSync(outDir, { recursive: true });
  writeHiddenStates(tagged, nDim, args.get("language") ?? "und", tagger.name,
    path.join(outDir, "icl_hidden.pcfs"));
  const predictions = tagged.map((sentence) => ({
    sentence_id: sentence.sentenceId,
    predicted: sentence.predicted,
    gold: sentence.gold,
  }));
  fs.writeFileSync(
    path.join(outDir, "icl_predictions.json"),
    JSON.stringify({ label_form: labelForm,
                     inventory: labelInventory(labelForm),
                     sentences: predictions }, null, 2) + "\n",
    "utf-8",
  );
  console.log(path.join(outDir, "icl_predictions.json"));
  return 0;
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    const args = parseArgs(rest);
    if (command === "extract") {
      return cmdExtract(args);
    }
    if (command === "icl") {
      return cmdIcl(args);
    }
    console.error("usage: concept-extract <extract|icl> --help-free options");
    return 2;
  } catch (error) {
    console.error(String(error));
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}

/**
 * Iterative structured-prompt tagging.
 *
 * A causal tagger consumes the running prompt and emits the next word plus
 * the hidden state at that step; labels come out as raw strings (the first
 * generated word), scoring happens downstream. Hidden states per labeling
 * step are exported as a PCFS store so the contextualized-alignment trainer
 * can consume them.
 */

import { ConlluSentence } from "./conllu";
import { FeatureStore, Manifest, writeStore } from "./pcfs";
import { PromptSpec, buildPrompt, renderLabel } from "./prompt";

export interface StepOutput {
  word: string;
  hidden: Float32Array;
}

export interface CausalTagger {
  readonly nDim: number;
  readonly name: string;
  /** First word generated after the prompt's trailing delimiter. */
  labelStep(prompt: string): StepOutput;
}

export interface TaggedSentence {
  sentenceId: string;
  predicted: string[]; // raw generated words, one per token
  gold: string[]; // gold labels rendered in the prompt's label form
  hidden: Float32Array[]; // one per labeling step
}

export function iclTag(
  tagger: CausalTagger,
  spec: PromptSpec,
  sentence: ConlluSentence,
): TaggedSentence {
  const predicted: string[] = [];
  const hidden: Float32Array[] = [];
  for (let t = 0; t < sentence.forms.length; t++) {
    const prompt = buildPrompt(spec, sentence.forms, predicted);
    const step = tagger.labelStep(prompt);
    predicted.push(step.word);
    hidden.push(step.hidden);
  }
  return {
    sentenceId: sentence.id,
    predicted,
    gold: sentence.upos.map((tag) => renderLabel(tag, spec.labelForm)),
    hidden,
  };
}

export function writeHiddenStates(
  tagged: TaggedSentence[],
  nDim: number,
  language: string,
  taggerName: string,
  storePath: string,
): void {
  const sentences = tagged.map((sentence) => {
    const flat = new Float32Array(sentence.hidden.length * nDim);
    sentence.hidden.forEach((vec, i) => flat.set(vec, i * nDim));
    return flat;
  });
  const manifest: Manifest = {
    language,
    model_name: taggerName,
    layer: -1,
    treebank_file: "",
    n_sentences: sentences.length,
    n_dim: nDim,
    content_checksum: "0".repeat(16),
    pooling: "labeling-step",
  };
  const store: FeatureStore = { nDim, sentences, manifest };
  writeStore(store, storePath);
}

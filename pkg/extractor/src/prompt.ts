/** Structured-prompting templates for sequential word-class tagging. */

export const UPOS_TAGS = [
  "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
  "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
] as const;

const SHFL_TAGS = [
  "PUNCT", "DET", "AUX", "ADJ", "PRON", "X", "PART", "CCONJ", "INTJ",
  "NUM", "SCONJ", "ADV", "SYM", "VERB", "PROPN", "ADP", "NOUN",
] as const;

const PXY_TAGS = [
  "A", "B", "C", "D", "E", "F", "G", "H", "I",
  "J", "K", "L", "M", "N", "O", "P", "Q",
] as const;

const WORD_TAGS = [
  "adjective", "adposition", "adverb", "auxiliary",
  "coordinating_conjunction", "determiner", "interjection", "noun",
  "numeral", "particle", "pronoun", "proper_noun", "punctuation",
  "subordinating_conjunction", "symbol", "verb", "other",
] as const;

export type LabelForm = "UPOS" | "SHFL" | "PXY" | "Word";

const FORMS: Record<LabelForm, readonly string[]> = {
  UPOS: UPOS_TAGS,
  SHFL: SHFL_TAGS,
  PXY: PXY_TAGS,
  Word: WORD_TAGS,
};

export function labelInventory(form: LabelForm): string[] {
  return [...FORMS[form]];
}

/** Surface form of a UPOS tag under the given label form. */
export function renderLabel(upos: string, form: LabelForm): string {
  const index = (UPOS_TAGS as readonly string[]).indexOf(upos);
  if (index < 0) {
    throw new Error(`unknown UPOS tag ${upos}`);
  }
  return FORMS[form][index];
}

export interface Demonstration {
  forms: string[];
  upos: string[];
}

export interface PromptSpec {
  demonstrations: Demonstration[];
  labelForm: LabelForm;
  delimiter: string; // between a word and its tag, ": " by default
}

export function makePromptSpec(
  demonstrations: Demonstration[],
  labelForm: LabelForm = "UPOS",
  delimiter = ": ",
): PromptSpec {
  if (demonstrations.length < 1) {
    throw new Error("at least one demonstration is required");
  }
  for (const demo of demonstrations) {
    if (demo.forms.length !== demo.upos.length || demo.forms.length === 0) {
      throw new Error("demonstration forms and tags must align and be non-empty");
    }
  }
  return { demonstrations, labelForm, delimiter };
}

/**
 * Deterministic tagging prompt: every demonstration as word-per-line
 * `word<delimiter>TAG` blocks, then the query sentence with the already
 * predicted tags, ending at the current word followed by the delimiter.
 */
export function buildPrompt(
  spec: PromptSpec,
  queryForms: string[],
  predictedTags: string[],
): string {
  if (predictedTags.length >= queryForms.length) {
    throw new Error("all query words already tagged");
  }
  const blocks: string[] = [];
  for (const demo of spec.demonstrations) {
    const lines = demo.forms.map(
      (form, i) =>
        `${form}${spec.delimiter}${renderLabel(demo.upos[i], spec.labelForm)}`,
    );
    blocks.push(lines.join("\n"));
  }
  const queryLines: string[] = [];
  for (let i = 0; i < predictedTags.length; i++) {
    queryLines.push(`${queryForms[i]}${spec.delimiter}${predictedTags[i]}`);
  }
  const current = queryForms[predictedTags.length];
  queryLines.push(`${current}${spec.delimiter.trimEnd()}`);
  blocks.push(queryLines.join("\n"));
  return blocks.join("\n\n");
}

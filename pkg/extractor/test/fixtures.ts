/** Small English UD-style sample built from templates, 10 columns per row. */

const SUBJECTS: [string, string][] = [
  ["The", "DET"], ["A", "DET"], ["Every", "DET"], ["That", "DET"],
];
const NOUNS = ["cat", "dog", "child", "teacher", "measurement", "river",
  "committee", "library", "garden", "question"];
const VERBS = ["sees", "finds", "takes", "describes", "remembers",
  "crosses", "answers", "builds", "paints", "reads"];
const ADJS = ["old", "small", "careful", "bright", "unusual"];
const ADVS = ["quickly", "often", "rarely", "yesterday", "together"];

function row(id: number, form: string, upos: string, head: number,
             deprel: string): string {
  return [id, form, "_", upos, "_", "_", head, deprel, "_", "_"].join("\t");
}

export function englishSample(nSentences: number): string {
  const blocks: string[] = [];
  for (let i = 0; i < nSentences; i++) {
    const det = SUBJECTS[i % SUBJECTS.length];
    const subj = NOUNS[i % NOUNS.length];
    const adj = ADJS[i % ADJS.length];
    const verb = VERBS[(i * 3 + 1) % VERBS.length];
    const obj = NOUNS[(i * 7 + 3) % NOUNS.length];
    const adv = ADVS[(i * 5 + 2) % ADVS.length];
    const lines = [
      `# sent_id = en-fixture-${i}`,
      row(1, det[0], det[1], 3, "det"),
      row(2, adj, "ADJ", 3, "amod"),
      row(3, subj, "NOUN", 4, "nsubj"),
      row(4, verb, "VERB", 0, "root"),
      row(5, "the", "DET", 6, "det"),
      row(6, obj, "NOUN", 4, "obj"),
      row(7, adv, "ADV", 4, "advmod"),
      row(8, ".", "PUNCT", 4, "punct"),
    ];
    blocks.push(lines.join("\n"));
  }
  return blocks.join("\n\n") + "\n";
}

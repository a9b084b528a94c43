/** Minimal CoNLL-U reading: token forms and UPOS tags per sentence. */

export interface ConlluSentence {
  id: string;
  forms: string[];
  upos: string[];
}

export function parseConllu(text: string): ConlluSentence[] {
  const sentences: ConlluSentence[] = [];
  let forms: string[] = [];
  let upos: string[] = [];
  let sentId: string | null = null;

  const flush = () => {
    if (forms.length > 0) {
      sentences.push({
        id: sentId ?? `s${sentences.length}`,
        forms,
        upos,
      });
    }
    forms = [];
    upos = [];
    sentId = null;
  };

  for (const raw of text.split("\n")) {
    const line = raw.replace(/\r$/, "");
    if (line === "") {
      flush();
      continue;
    }
    if (line.startsWith("#")) {
      const match = line.match(/^#\s*sent_id\s*=\s*(.+)$/);
      if (match) {
        sentId = match[1].trim();
      }
      continue;
    }
    const fields = line.split("\t");
    if (fields.length !== 10) {
      throw new Error(`malformed CoNLL-U row: expected 10 columns, got ${fields.length}`);
    }
    if (fields[0].includes("-") || fields[0].includes(".")) {
      continue; // multiword ranges and empty nodes carry no token vector
    }
    forms.push(fields[1]);
    upos.push(fields[3]);
  }
  flush();
  return sentences;
}

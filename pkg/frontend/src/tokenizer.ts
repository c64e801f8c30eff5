/**
 * Tokenizers for prompt-set construction.
 *
 * The byte tokenizer maps text to its UTF-8 bytes (vocabulary 256): it
 * is total, deterministic, and needs no vocabulary files, which keeps
 * extraction self-contained. Models declare which tokenizer they pair
 * with in their config.
 */

export interface Tokenizer {
  readonly name: string;
  readonly vocabSize: number;
  encode(text: string): number[];
}

export function byteTokenizer(): Tokenizer {
  return {
    name: 'byte',
    vocabSize: 256,
    encode(text: string): number[] {
      return Array.from(Buffer.from(text, 'utf-8'));
    },
  };
}

export function tokenizerByName(name: string): Tokenizer {
  if (name === 'byte') return byteTokenizer();
  throw new Error(`unknown tokenizer '${name}' (supported: byte)`);
}

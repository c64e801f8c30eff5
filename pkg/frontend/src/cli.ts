#!/usr/bin/env node
/**
 * injx-extract: build a deduplicated fixed-length prompt set from text
 * files and write per-layer last-token hidden states in injx formats.
 *
 * Usage:
 *   injx-extract --model toy-4x32 --k 4 --n 8 --corpus texts.txt --out out/
 *
 * Corpus files contribute one text per line, in order. --model is a
 * directory (config.json + .ijxm weight tensors) or a built-in toy id.
 * --batch is accepted for interface compatibility; prompts are processed
 * independently, so batching cannot change the output.
 */

import { readFileSync } from 'node:fs';
import { parseArgs } from 'node:util';

import { buildPromptSet, extractHiddenStates } from './extract.js';
import { resolveModel } from './model.js';
import { tokenizerByName } from './tokenizer.js';

function usage(message?: string): never {
  if (message) console.error(`error: ${message}`);
  console.error(
    'usage: injx-extract --model ID --k K --n N --corpus PATH [--corpus PATH ...] ' +
      '--out DIR [--min-chars M] [--batch B] [--device cpu]',
  );
  process.exit(1);
}

function main(): void {
  let parsed;
  try {
    parsed = parseArgs({
      options: {
        model: { type: 'string' },
        k: { type: 'string' },
        n: { type: 'string' },
        corpus: { type: 'string', multiple: true },
        out: { type: 'string' },
        'min-chars': { type: 'string', default: '1' },
        batch: { type: 'string', default: '1' },
        device: { type: 'string', default: 'cpu' },
      },
    });
  } catch (exc) {
    usage((exc as Error).message);
  }
  const v = parsed.values;
  if (!v.model || !v.k || !v.n || !v.corpus?.length || !v.out) {
    usage('--model, --k, --n, --corpus, and --out are required');
  }
  if (v.device !== 'cpu') usage(`unsupported device '${v.device}' (only cpu)`);

  const k = parseInt(v.k, 10);
  const n = parseInt(v.n, 10);
  const minChars = parseInt(v['min-chars']!, 10);
  if (!Number.isInteger(k) || !Number.isInteger(n)) usage('--k and --n must be integers');

  try {
    const model = resolveModel(v.model);
    const tokenizer = tokenizerByName(model.config.tokenizer);
    const texts: string[] = [];
    for (const path of v.corpus) {
      for (const line of readFileSync(path, 'utf-8').split('\n')) {
        if (line.trim().length > 0) texts.push(line);
      }
    }
    const prompts = buildPromptSet(texts, tokenizer, { k, maxPrompts: n, minChars });
    const result = extractHiddenStates(model, prompts, v.out);
    console.log(result.manifestPath);
    console.error(
      `extracted ${result.n} prompts x ${result.layers} layers ` +
        `(d=${result.hiddenDim}) from ${v.model}`,
    );
  } catch (exc) {
    console.error(`error: ${(exc as Error).message}`);
    process.exit(1);
  }
}

main();

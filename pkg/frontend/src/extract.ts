/**
 * Prompt-set construction and hidden-state extraction.
 *
 * Pipeline: tokenize each corpus text, keep those with at least K
 * tokens, truncate to the K-token prefix, deduplicate in token space
 * (first occurrence wins, corpus order preserved), cap at N, then run
 * the model prompt by prompt and collect the last-token state of every
 * layer. States are computed in float64 and written as binary32, one
 * matrix per layer, plus the token file and manifest the analyzer
 * loads directly.
 */

import { join } from 'node:path';

import { writeManifest, writeMatrix, writeTokens } from './formats.js';
import { DecoderModel } from './model.js';
import { Tokenizer } from './tokenizer.js';

export interface PromptSet {
  n: number;
  k: number;
  ids: Uint32Array; // (n, k) row-major
}

export interface PromptSetOptions {
  k: number;
  maxPrompts: number;
  minChars?: number;
}

export function buildPromptSet(texts: string[], tokenizer: Tokenizer, opts: PromptSetOptions): PromptSet {
  const { k, maxPrompts, minChars = 1 } = opts;
  if (k < 1) throw new Error(`k must be >= 1, got ${k}`);
  if (maxPrompts < 2) throw new Error(`need room for at least 2 prompts, got maxPrompts=${maxPrompts}`);
  const kept: number[][] = [];
  const seen = new Set<string>();
  for (const text of texts) {
    if (text.length < minChars) continue;
    const tokens = tokenizer.encode(text);
    if (tokens.length < k) continue;
    const prefix = tokens.slice(0, k);
    const key = prefix.join(',');
    if (seen.has(key)) continue;
    seen.add(key);
    kept.push(prefix);
    if (kept.length === maxPrompts) break;
  }
  if (kept.length < 2) {
    throw new Error(`fewer than 2 distinct ${k}-token prefixes in the corpus (got ${kept.length})`);
  }
  const ids = new Uint32Array(kept.length * k);
  kept.forEach((row, i) => ids.set(row, i * k));
  return { n: kept.length, k, ids };
}

export interface ExtractionResult {
  manifestPath: string;
  n: number;
  layers: number;
  hiddenDim: number;
}

export function extractHiddenStates(model: DecoderModel, prompts: PromptSet, outDir: string): ExtractionResult {
  const { n, k, ids } = prompts;
  const d = model.config.d_model;
  const L = model.config.n_layers;
  const states = Array.from({ length: L }, () => new Float32Array(n * d));
  for (let i = 0; i < n; i++) {
    const tokens = ids.subarray(i * k, (i + 1) * k);
    const perLayer = model.hiddenStates(tokens);
    for (let l = 0; l < L; l++) {
      const h = perLayer[l];
      for (let j = 0; j < d; j++) {
        const v = Math.fround(h[j]);
        if (!Number.isFinite(v)) {
          throw new Error(`non-finite activation at layer ${l + 1}, row ${i}`);
        }
        states[l][i * d + j] = v;
      }
    }
  }

  const tokenFile = 'tokens.ijxt';
  writeTokens(join(outDir, tokenFile), n, k, ids);
  const layers = [];
  for (let l = 0; l < L; l++) {
    const file = `layer_${String(l + 1).padStart(3, '0')}.ijxm`;
    writeMatrix(join(outDir, file), n, d, states[l]);
    layers.push({ index: l + 1, file });
  }
  const manifestPath = join(outDir, 'manifest.json');
  writeManifest(manifestPath, {
    model_id: model.config.model_id,
    k,
    n,
    hidden_dim: d,
    token_file: tokenFile,
    layers,
    meta: {
      source: 'injx-extract',
      tokenizer: model.config.tokenizer,
      n_heads: model.config.n_heads,
      d_ff: model.config.d_ff,
    },
  });
  return { manifestPath, n, layers: L, hiddenDim: d };
}

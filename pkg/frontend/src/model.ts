/**
 * Minimal decoder-only transformer, enough to extract per-layer
 * last-token hidden states deterministically on CPU.
 *
 * Pre-LN blocks: x += attn(ln1(x)); x += mlp(ln2(x)), with learned token
 * and position embeddings, causal multi-head attention, and a GELU MLP.
 * The layer-l hidden state is the residual stream after block l.
 *
 * Models come from two sources: built-in toy ids ("toy-<layers>x<dmodel>",
 * weights seeded from the id string), or a directory holding config.json
 * plus weight tensors in the .ijxm matrix format (the same format the
 * analyzer reads, so exported models round-trip bit-exactly). Weights
 * are rounded to binary32 at initialization so export/load is lossless.
 */

import { readFileSync, writeFileSync, mkdirSync, existsSync } from 'node:fs';
import { join } from 'node:path';

import { readMatrix, writeMatrix } from './formats.js';
import { SplitMix64, hashSeed } from './rng.js';

export interface ModelConfig {
  model_id: string;
  vocab_size: number;
  d_model: number;
  n_heads: number;
  n_layers: number;
  d_ff: number;
  max_seq: number;
  tokenizer: string;
}

interface LayerWeights {
  ln: Float64Array; // (4, d): ln1_g, ln1_b, ln2_g, ln2_b
  qkvW: Float64Array; // (d, 3d)
  qkvB: Float64Array; // (3d)
  outW: Float64Array; // (d, d)
  outB: Float64Array; // (d)
  mlpW1: Float64Array; // (d, d_ff)
  mlpB1: Float64Array; // (d_ff)
  mlpW2: Float64Array; // (d_ff, d)
  mlpB2: Float64Array; // (d)
}

const LN_EPS = 1e-5;

function gelu(x: number): number {
  return 0.5 * x * (1 + Math.tanh(Math.sqrt(2 / Math.PI) * (x + 0.044715 * x * x * x)));
}

export class DecoderModel {
  constructor(
    readonly config: ModelConfig,
    readonly tokEmb: Float64Array, // (vocab, d)
    readonly posEmb: Float64Array, // (max_seq, d)
    readonly layers: LayerWeights[],
  ) {}

  /** Last-token hidden state after each block, for one prompt. */
  hiddenStates(tokens: ArrayLike<number>): Float64Array[] {
    const { d_model: d, n_heads: heads, vocab_size: vocab, max_seq: maxSeq, d_ff: dff } = this.config;
    const k = tokens.length;
    if (k < 1) throw new Error('empty prompt');
    if (k > maxSeq) throw new Error(`prompt length ${k} exceeds model max_seq ${maxSeq}`);
    const dh = d / heads;
    const x = new Float64Array(k * d);
    for (let p = 0; p < k; p++) {
      const t = tokens[p];
      if (!(t >= 0 && t < vocab)) {
        throw new Error(`token id ${t} at position ${p} outside model vocabulary (${vocab})`);
      }
      for (let j = 0; j < d; j++) x[p * d + j] = this.tokEmb[t * d + j] + this.posEmb[p * d + j];
    }

    const out: Float64Array[] = [];
    const normed = new Float64Array(k * d);
    const qkv = new Float64Array(k * 3 * d);
    const ctx = new Float64Array(k * d);
    const scores = new Float64Array(k);
    const hidden = new Float64Array(dff);

    for (const layer of this.layers) {
      // Attention sublayer.
      layerNormRows(x, normed, k, d, layer.ln, 0);
      matmulRows(normed, layer.qkvW, layer.qkvB, qkv, k, d, 3 * d);
      ctx.fill(0);
      for (let h = 0; h < heads; h++) {
        const qOff = h * dh;
        const kOff = d + h * dh;
        const vOff = 2 * d + h * dh;
        for (let i = 0; i < k; i++) {
          let maxScore = -Infinity;
          for (let j = 0; j <= i; j++) {
            let s = 0;
            for (let c = 0; c < dh; c++) s += qkv[i * 3 * d + qOff + c] * qkv[j * 3 * d + kOff + c];
            s /= Math.sqrt(dh);
            scores[j] = s;
            if (s > maxScore) maxScore = s;
          }
          let total = 0;
          for (let j = 0; j <= i; j++) {
            scores[j] = Math.exp(scores[j] - maxScore);
            total += scores[j];
          }
          for (let j = 0; j <= i; j++) {
            const w = scores[j] / total;
            for (let c = 0; c < dh; c++) ctx[i * d + qOff + c] += w * qkv[j * 3 * d + vOff + c];
          }
        }
      }
      for (let i = 0; i < k; i++) {
        for (let o = 0; o < d; o++) {
          let s = layer.outB[o];
          for (let c = 0; c < d; c++) s += ctx[i * d + c] * layer.outW[c * d + o];
          x[i * d + o] += s;
        }
      }
      // MLP sublayer.
      layerNormRows(x, normed, k, d, layer.ln, 2);
      for (let i = 0; i < k; i++) {
        for (let o = 0; o < dff; o++) {
          let s = layer.mlpB1[o];
          for (let c = 0; c < d; c++) s += normed[i * d + c] * layer.mlpW1[c * dff + o];
          hidden[o] = gelu(s);
        }
        for (let o = 0; o < d; o++) {
          let s = layer.mlpB2[o];
          for (let c = 0; c < dff; c++) s += hidden[c] * layer.mlpW2[c * d + o];
          x[i * d + o] += s;
        }
      }
      out.push(x.slice((k - 1) * d, k * d));
    }
    return out;
  }
}

function layerNormRows(
  x: Float64Array,
  out: Float64Array,
  rows: number,
  d: number,
  ln: Float64Array,
  which: 0 | 2,
): void {
  const g = which * d;
  const b = (which + 1) * d;
  for (let i = 0; i < rows; i++) {
    let mean = 0;
    for (let j = 0; j < d; j++) mean += x[i * d + j];
    mean /= d;
    let variance = 0;
    for (let j = 0; j < d; j++) {
      const c = x[i * d + j] - mean;
      variance += c * c;
    }
    variance /= d;
    const inv = 1 / Math.sqrt(variance + LN_EPS);
    for (let j = 0; j < d; j++) out[i * d + j] = ln[g + j] * (x[i * d + j] - mean) * inv + ln[b + j];
  }
}

function matmulRows(
  x: Float64Array,
  w: Float64Array,
  bias: Float64Array,
  out: Float64Array,
  rows: number,
  dIn: number,
  dOut: number,
): void {
  for (let i = 0; i < rows; i++) {
    for (let o = 0; o < dOut; o++) {
      let s = bias[o];
      for (let c = 0; c < dIn; c++) s += x[i * dIn + c] * w[c * dOut + o];
      out[i * dOut + o] = s;
    }
  }
}

// ---------------------------------------------------------------------------
// Construction

const TOY_ID = /^toy-(\d+)x(\d+)(?:-h(\d+))?$/;
const INIT_SCALE = 0.02;

function filledRounded(gen: SplitMix64, length: number, scale: number): Float64Array {
  const out = new Float64Array(length);
  for (let i = 0; i < length; i++) out[i] = Math.fround(gen.normal() * scale);
  return out;
}

function initLayers(config: ModelConfig, gen: SplitMix64): LayerWeights[] {
  const { d_model: d, d_ff: dff, n_layers: L } = config;
  const layers: LayerWeights[] = [];
  for (let l = 0; l < L; l++) {
    const ln = new Float64Array(4 * d);
    ln.fill(1, 0, d); // ln1 gain
    ln.fill(1, 2 * d, 3 * d); // ln2 gain
    layers.push({
      ln,
      qkvW: filledRounded(gen, d * 3 * d, INIT_SCALE),
      qkvB: new Float64Array(3 * d),
      outW: filledRounded(gen, d * d, INIT_SCALE),
      outB: new Float64Array(d),
      mlpW1: filledRounded(gen, d * dff, INIT_SCALE),
      mlpB1: new Float64Array(dff),
      mlpW2: filledRounded(gen, dff * d, INIT_SCALE),
      mlpB2: new Float64Array(d),
    });
  }
  return layers;
}

export function builtinModel(modelId: string): DecoderModel {
  const match = TOY_ID.exec(modelId);
  if (!match) throw new Error(`unknown built-in model '${modelId}' (expected toy-<layers>x<dmodel>)`);
  const nLayers = parseInt(match[1], 10);
  const dModel = parseInt(match[2], 10);
  const nHeads = match[3] ? parseInt(match[3], 10) : dModel % 4 === 0 ? 4 : 1;
  if (nLayers < 1 || dModel < nHeads || dModel % nHeads !== 0) {
    throw new Error(`invalid toy model shape ${modelId}: d_model must be a multiple of n_heads`);
  }
  const config: ModelConfig = {
    model_id: modelId,
    vocab_size: 256,
    d_model: dModel,
    n_heads: nHeads,
    n_layers: nLayers,
    d_ff: 4 * dModel,
    max_seq: 64,
    tokenizer: 'byte',
  };
  const gen = new SplitMix64(hashSeed(modelId));
  const tokEmb = filledRounded(gen, config.vocab_size * dModel, INIT_SCALE);
  const posEmb = filledRounded(gen, config.max_seq * dModel, INIT_SCALE);
  return new DecoderModel(config, tokEmb, posEmb, initLayers(config, gen));
}

function tensorName(layer: number, part: string): string {
  return `layer_${String(layer).padStart(3, '0')}.${part}.ijxm`;
}

export function exportModel(model: DecoderModel, dir: string): void {
  mkdirSync(dir, { recursive: true });
  writeFileSync(join(dir, 'config.json'), JSON.stringify(model.config, null, 2) + '\n');
  const d = model.config.d_model;
  const dff = model.config.d_ff;
  const f32 = (a: Float64Array) => Float32Array.from(a);
  writeMatrix(join(dir, 'tok_emb.ijxm'), model.config.vocab_size, d, f32(model.tokEmb));
  writeMatrix(join(dir, 'pos_emb.ijxm'), model.config.max_seq, d, f32(model.posEmb));
  model.layers.forEach((layer, l) => {
    writeMatrix(join(dir, tensorName(l, 'ln')), 4, d, f32(layer.ln));
    writeMatrix(join(dir, tensorName(l, 'qkv_w')), d, 3 * d, f32(layer.qkvW));
    writeMatrix(join(dir, tensorName(l, 'qkv_b')), 1, 3 * d, f32(layer.qkvB));
    writeMatrix(join(dir, tensorName(l, 'out_w')), d, d, f32(layer.outW));
    writeMatrix(join(dir, tensorName(l, 'out_b')), 1, d, f32(layer.outB));
    writeMatrix(join(dir, tensorName(l, 'mlp_w1')), d, dff, f32(layer.mlpW1));
    writeMatrix(join(dir, tensorName(l, 'mlp_b1')), 1, dff, f32(layer.mlpB1));
    writeMatrix(join(dir, tensorName(l, 'mlp_w2')), dff, d, f32(layer.mlpW2));
    writeMatrix(join(dir, tensorName(l, 'mlp_b2')), 1, d, f32(layer.mlpB2));
  });
}

function readTensor(dir: string, name: string, rows: number, cols: number): Float64Array {
  const m = readMatrix(join(dir, name));
  if (m.rows !== rows || m.cols !== cols) {
    throw new Error(`${name}: expected ${rows}x${cols}, got ${m.rows}x${m.cols}`);
  }
  return Float64Array.from(m.data);
}

export function loadModelDir(dir: string): DecoderModel {
  const configPath = join(dir, 'config.json');
  if (!existsSync(configPath)) throw new Error(`model directory has no config.json: ${dir}`);
  const config = JSON.parse(readFileSync(configPath, 'utf-8')) as ModelConfig;
  for (const key of ['vocab_size', 'd_model', 'n_heads', 'n_layers', 'd_ff', 'max_seq'] as const) {
    if (typeof config[key] !== 'number' || config[key] < 1) {
      throw new Error(`model config missing or invalid '${key}': ${configPath}`);
    }
  }
  const d = config.d_model;
  const dff = config.d_ff;
  const tokEmb = readTensor(dir, 'tok_emb.ijxm', config.vocab_size, d);
  const posEmb = readTensor(dir, 'pos_emb.ijxm', config.max_seq, d);
  const layers: LayerWeights[] = [];
  for (let l = 0; l < config.n_layers; l++) {
    layers.push({
      ln: readTensor(dir, tensorName(l, 'ln'), 4, d),
      qkvW: readTensor(dir, tensorName(l, 'qkv_w'), d, 3 * d),
      qkvB: readTensor(dir, tensorName(l, 'qkv_b'), 1, 3 * d),
      outW: readTensor(dir, tensorName(l, 'out_w'), d, d),
      outB: readTensor(dir, tensorName(l, 'out_b'), 1, d),
      mlpW1: readTensor(dir, tensorName(l, 'mlp_w1'), d, dff),
      mlpB1: readTensor(dir, tensorName(l, 'mlp_b1'), 1, dff),
      mlpW2: readTensor(dir, tensorName(l, 'mlp_w2'), dff, d),
      mlpB2: readTensor(dir, tensorName(l, 'mlp_b2'), 1, d),
    });
  }
  return new DecoderModel(config, tokEmb, posEmb, layers);
}

/** Resolve --model: a directory path if it exists, else a built-in id. */
export function resolveModel(spec: string): DecoderModel {
  if (existsSync(spec)) return loadModelDir(spec);
  return builtinModel(spec);
}

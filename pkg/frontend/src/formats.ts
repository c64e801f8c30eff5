/**
 * Binary file formats shared with the core analyzer.
 *
 * Matrix (.ijxm): "IJXM" | u16 version=1 | u8 dtype=1 (binary32) | u8 0
 *                 | u64 rows | u64 cols | rows*cols float32 LE, row-major.
 * Tokens (.ijxt): "IJXT" | u16 version=1 | u16 0 | u64 n_seqs | u64 seq_len
 *                 | n_seqs*seq_len uint32 LE.
 *
 * Everything is little-endian regardless of host. Writers validate what
 * the core loader validates (finite values, pairwise-distinct sequences)
 * so emitted files always load cleanly.
 */

import { writeFileSync, readFileSync, mkdirSync } from 'node:fs';
import { dirname } from 'node:path';

const MATRIX_MAGIC = 'IJXM';
const TOKEN_MAGIC = 'IJXT';
const HEADER_BYTES = 24;

function ensureDir(path: string): void {
  mkdirSync(dirname(path), { recursive: true });
}

export function writeMatrix(path: string, rows: number, cols: number, data: Float32Array): void {
  if (rows < 1 || cols < 1) throw new Error(`matrix must be at least 1x1, got ${rows}x${cols}`);
  if (data.length !== rows * cols) {
    throw new Error(`expected ${rows * cols} values, got ${data.length}`);
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new Error(`non-finite value at row ${Math.floor(i / cols)}, col ${i % cols}`);
    }
  }
  const buf = Buffer.alloc(HEADER_BYTES + data.length * 4);
  buf.write(MATRIX_MAGIC, 0, 'ascii');
  buf.writeUInt16LE(1, 4); // version
  buf.writeUInt8(1, 6); // dtype: binary32
  buf.writeUInt8(0, 7);
  buf.writeBigUInt64LE(BigInt(rows), 8);
  buf.writeBigUInt64LE(BigInt(cols), 16);
  for (let i = 0; i < data.length; i++) buf.writeFloatLE(data[i], HEADER_BYTES + i * 4);
  ensureDir(path);
  writeFileSync(path, buf);
}

export function readMatrix(path: string): { rows: number; cols: number; data: Float32Array } {
  const buf = readFileSync(path);
  if (buf.length < HEADER_BYTES || buf.toString('ascii', 0, 4) !== MATRIX_MAGIC) {
    throw new Error(`not a matrix file: ${path}`);
  }
  const rows = Number(buf.readBigUInt64LE(8));
  const cols = Number(buf.readBigUInt64LE(16));
  if (buf.length - HEADER_BYTES !== rows * cols * 4) {
    throw new Error(`expected rows*cols values in ${path}`);
  }
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) data[i] = buf.readFloatLE(HEADER_BYTES + i * 4);
  return { rows, cols, data };
}

export function writeTokens(path: string, nSeqs: number, seqLen: number, ids: Uint32Array): void {
  if (nSeqs < 1 || seqLen < 1) throw new Error(`need n_seqs >= 1 and seq_len >= 1, got ${nSeqs}x${seqLen}`);
  if (ids.length !== nSeqs * seqLen) {
    throw new Error(`expected ${nSeqs * seqLen} ids, got ${ids.length}`);
  }
  const seen = new Map<string, number>();
  for (let i = 0; i < nSeqs; i++) {
    const key = ids.subarray(i * seqLen, (i + 1) * seqLen).join(',');
    const prev = seen.get(key);
    if (prev !== undefined) throw new Error(`duplicate token sequences at indices ${prev} and ${i}`);
    seen.set(key, i);
  }
  const buf = Buffer.alloc(HEADER_BYTES + ids.length * 4);
  buf.write(TOKEN_MAGIC, 0, 'ascii');
  buf.writeUInt16LE(1, 4);
  buf.writeUInt16LE(0, 6);
  buf.writeBigUInt64LE(BigInt(nSeqs), 8);
  buf.writeBigUInt64LE(BigInt(seqLen), 16);
  for (let i = 0; i < ids.length; i++) buf.writeUInt32LE(ids[i], HEADER_BYTES + i * 4);
  ensureDir(path);
  writeFileSync(path, buf);
}

export function readTokens(path: string): { nSeqs: number; seqLen: number; ids: Uint32Array } {
  const buf = readFileSync(path);
  if (buf.length < HEADER_BYTES || buf.toString('ascii', 0, 4) !== TOKEN_MAGIC) {
    throw new Error(`not a token file: ${path}`);
  }
  const nSeqs = Number(buf.readBigUInt64LE(8));
  const seqLen = Number(buf.readBigUInt64LE(16));
  if (buf.length - HEADER_BYTES !== nSeqs * seqLen * 4) {
    throw new Error(`expected n_seqs*seq_len ids in ${path}`);
  }
  const ids = new Uint32Array(nSeqs * seqLen);
  for (let i = 0; i < ids.length; i++) ids[i] = buf.readUInt32LE(HEADER_BYTES + i * 4);
  return { nSeqs, seqLen, ids };
}

export interface ManifestLayer {
  index: number;
  file: string;
}

export function writeManifest(
  path: string,
  doc: {
    model_id: string;
    k: number;
    n: number;
    hidden_dim: number;
    token_file: string;
    layers: ManifestLayer[];
    meta: Record<string, unknown>;
  },
): void {
  ensureDir(path);
  writeFileSync(path, JSON.stringify(doc, null, 2) + '\n', 'utf-8');
}

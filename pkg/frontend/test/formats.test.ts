import { describe, expect, it } from 'vitest';
import { mkdtempSync, readFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { readMatrix, readTokens, writeMatrix, writeTokens } from '../src/formats.js';

function scratch(): string {
  return mkdtempSync(join(tmpdir(), 'injx-extract-'));
}

describe('matrix files', () => {
  it('round-trips bit-exactly', () => {
    const dir = scratch();
    const data = Float32Array.from([1.5, -2.25, 3.125, 0, 1e-30, 4096]);
    writeMatrix(join(dir, 'm.ijxm'), 2, 3, data);
    const back = readMatrix(join(dir, 'm.ijxm'));
    expect(back.rows).toBe(2);
    expect(back.cols).toBe(3);
    expect(Array.from(back.data)).toEqual(Array.from(data));
  });

  it('writes the documented little-endian layout', () => {
    const dir = scratch();
    writeMatrix(join(dir, 'm.ijxm'), 1, 1, Float32Array.from([1]));
    const raw = readFileSync(join(dir, 'm.ijxm'));
    expect(raw.toString('ascii', 0, 4)).toBe('IJXM');
    expect(raw.readUInt16LE(4)).toBe(1); // version
    expect(raw.readUInt8(6)).toBe(1); // dtype binary32
    expect(Number(raw.readBigUInt64LE(8))).toBe(1);
    expect(Number(raw.readBigUInt64LE(16))).toBe(1);
    expect(raw.readFloatLE(24)).toBe(1);
    expect(raw.length).toBe(28);
  });

  it('rejects non-finite values with their position', () => {
    const dir = scratch();
    expect(() => writeMatrix(join(dir, 'm.ijxm'), 1, 2, Float32Array.from([1, NaN]))).toThrow(
      /row 0, col 1/,
    );
  });
});

describe('token files', () => {
  it('round-trips', () => {
    const dir = scratch();
    const ids = Uint32Array.from([1, 2, 1, 3, 4, 4]);
    writeTokens(join(dir, 't.ijxt'), 3, 2, ids);
    const back = readTokens(join(dir, 't.ijxt'));
    expect(back.nSeqs).toBe(3);
    expect(back.seqLen).toBe(2);
    expect(Array.from(back.ids)).toEqual(Array.from(ids));
  });

  it('rejects duplicate sequences naming both indices', () => {
    const dir = scratch();
    expect(() => writeTokens(join(dir, 't.ijxt'), 2, 2, Uint32Array.from([1, 2, 1, 2]))).toThrow(
      /indices 0 and 1/,
    );
  });
});

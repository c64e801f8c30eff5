/**
 * Deterministic PRNG for weight initialization.
 *
 * splitmix64 over BigInt state: exact integer arithmetic, so streams are
 * identical on every platform. Normal-ish draws use the Irwin-Hall sum
 * of twelve uniforms, which avoids transcendental functions whose last
 * bits vary between math libraries.
 */

const MASK64 = (1n << 64n) - 1n;

export class SplitMix64 {
  private state: bigint;

  constructor(seed: bigint) {
    this.state = seed & MASK64;
  }

  nextU64(): bigint {
    this.state = (this.state + 0x9e3779b97f4a7c15n) & MASK64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
    return z ^ (z >> 31n);
  }

  /** Uniform double in [0, 1) with 53 random bits. */
  uniform(): number {
    return Number(this.nextU64() >> 11n) / 2 ** 53;
  }

  /** Approximately standard normal (Irwin-Hall, 12 uniforms). */
  normal(): number {
    let sum = 0;
    for (let i = 0; i < 12; i++) sum += this.uniform();
    return sum - 6;
  }

  fillNormal(out: Float64Array, scale: number): void {
    for (let i = 0; i < out.length; i++) out[i] = this.normal() * scale;
  }
}

/** FNV-1a over the UTF-8 bytes of a string, as a 64-bit BigInt. */
export function hashSeed(text: string): bigint {
  let h = 0xcbf29ce484222325n;
  for (const byte of Buffer.from(text, 'utf-8')) {
    h = ((h ^ BigInt(byte)) * 0x100000001b3n) & MASK64;
  }
  return h;
}

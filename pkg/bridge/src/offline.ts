/**
 * Deterministic embedding backend with no model downloads.
 *
 * Vectors are derived from content hashes through a small seeded PRNG, so
 * reruns are byte-identical and tests stay hermetic. The geometry is
 * meaningless; only the wire-format and determinism contracts matter.
 */

import { BridgeConfig, DataError, Encoders } from "./types.js";

const UTF8 = new TextEncoder();

/** 32-bit FNV-1a over UTF-8 bytes. */
export function fnv1a(data: string | Uint8Array): number {
  const bytes = typeof data === "string" ? UTF8.encode(data) : data;
  let h = 0x811c9dc5;
  for (const b of bytes) {
    h ^= b;
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32 PRNG: maps a 32-bit seed to a stream of floats in [0, 1). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Unit-norm vector determined entirely by (key, dim, seed). */
export function unitVector(key: string, dim: number, seed: number): number[] {
  const next = mulberry32(fnv1a(key) ^ Math.imul(seed, 0x9e3779b9));
  const v = new Array<number>(dim);
  let sq = 0;
  for (let i = 0; i < dim; i++) {
    const x = 2 * next() - 1;
    v[i] = x;
    sq += x * x;
  }
  if (sq < 1e-24) {
    v[0] = 1;
    return v;
  }
  const inv = 1 / Math.sqrt(sq);
  for (let i = 0; i < dim; i++) {
    v[i] *= inv;
  }
  return v;
}

/** Lowercase unicode word tokens, same token class the engine's BM25 uses. */
export function tokenize(text: string): string[] {
  return text.toLowerCase().match(/[\p{L}\p{N}]+/gu) ?? [];
}

export function createOfflineEncoders(config: BridgeConfig): Encoders {
  const { seed, denseDim, multiDim, maxVectorsPerPage, patchBytes } = config;

  return {
    async denseText(text: string): Promise<number[]> {
      const tokens = tokenize(text);
      if (tokens.length === 0) {
        throw new DataError("no tokens to embed");
      }
      const acc = new Array<number>(denseDim).fill(0);
      for (const tok of tokens) {
        const tv = unitVector(`t:${tok}`, denseDim, seed);
        for (let i = 0; i < denseDim; i++) {
          acc[i] += tv[i];
        }
      }
      let sq = 0;
      for (const x of acc) {
        sq += x * x;
      }
      if (sq < 1e-24) {
        acc[0] = 1;
        return acc;
      }
      const inv = 1 / Math.sqrt(sq);
      return acc.map((x) => x * inv);
    },

    async multiText(text: string): Promise<number[][]> {
      const tokens = tokenize(text).slice(0, maxVectorsPerPage);
      if (tokens.length === 0) {
        throw new DataError("no tokens to embed");
      }
      // position salt keeps repeated tokens distinct, like real token vectors
      return tokens.map((tok, i) => unitVector(`mt:${i}:${tok}`, multiDim, seed));
    },

    async multiImage(bytes: Uint8Array): Promise<number[][]> {
      if (bytes.length === 0) {
        throw new DataError("empty image payload");
      }
      const patches = Math.min(
        maxVectorsPerPage,
        Math.max(1, Math.ceil(bytes.length / patchBytes)),
      );
      const out: number[][] = [];
      for (let i = 0; i < patches; i++) {
        const chunk = bytes.subarray(i * patchBytes, (i + 1) * patchBytes);
        out.push(unitVector(`img:${i}:${fnv1a(chunk)}`, multiDim, seed));
      }
      return out;
    },
  };
}

import { readFileSync } from "node:fs";

import { BackendName, BridgeConfig, DataError } from "./types.js";

export const DEFAULT_CONFIG: BridgeConfig = {
  backend: "offline",
  imageModel: "offline-sim/patch-hash",
  textModel: "offline-sim/token-bag",
  batchSize: 8,
  device: "cpu",
  seed: 0,
  denseDim: 64,
  multiDim: 32,
  maxVectorsPerPage: 16,
  patchBytes: 64,
  imageRoot: ".",
  outDir: ".",
};

// small helper so error messages quote the raw text
function r(value: string): string {
  return JSON.stringify(value);
}

/** Parse `key = value` lines; '#' starts a comment, blank lines are skipped. */
export function parseKeyValue(text: string, source = "<config>"): Map<string, string> {
  const out = new Map<string, string>();
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const stripped = lines[i].replace(/#.*$/, "").trim();
    if (!stripped) {
      continue;
    }
    const eq = stripped.indexOf("=");
    if (eq < 1) {
      throw new DataError(`${source}:${i + 1}: expected "key = value"`);
    }
    const key = stripped.slice(0, eq).trim();
    const value = stripped.slice(eq + 1).trim();
    if (out.has(key)) {
      throw new DataError(`${source}:${i + 1}: duplicate key ${r(key)}`);
    }
    out.set(key, value);
  }
  return out;
}

/** Build a BridgeConfig from a plain key-value file, applying defaults. */
export function loadBridgeConfig(path: string): BridgeConfig {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (e) {
    throw new DataError(`cannot read config ${path}: ${(e as Error).message}`);
  }
  return configFromPairs(parseKeyValue(text, path));
}

export function configFromPairs(pairs: Map<string, string>): BridgeConfig {
  const config: BridgeConfig = { ...DEFAULT_CONFIG };
  for (const [key, value] of pairs) {
    switch (key) {
      case "backend":
        if (value !== "offline" && value !== "transformers") {
          throw new DataError(`config key backend: unknown backend ${r(value)}`);
        }
        config.backend = value as BackendName;
        break;
      case "image_model":
        config.imageModel = value;
        break;
      case "text_model":
        config.textModel = value;
        break;
      case "device":
        config.device = value;
        break;
      case "image_root":
        config.imageRoot = value;
        break;
      case "out_dir":
        config.outDir = value;
        break;
      case "corpus":
        config.corpus = value;
        break;
      case "queries":
        config.queries = value;
        break;
      case "batch_size":
        config.batchSize = requirePositive(key, value);
        break;
      case "seed":
        config.seed = requireInt(key, value);
        break;
      case "dense_dim":
        config.denseDim = requirePositive(key, value);
        break;
      case "multi_dim":
        config.multiDim = requirePositive(key, value);
        break;
      case "max_vectors_per_page":
        config.maxVectorsPerPage = requirePositive(key, value);
        break;
      case "patch_bytes":
        config.patchBytes = requirePositive(key, value);
        break;
      default:
        throw new DataError(`unknown config key ${r(key)}`);
    }
  }
  return config;
}

function requireInt(key: string, value: string): number {
  if (!/^-?\d+$/.test(value)) {
    throw new DataError(`config key ${key}: expected an integer, got ${r(value)}`);
  }
  return Number(value);
}

function requirePositive(key: string, value: string): number {
  const n = requireInt(key, value);
  if (n < 1) {
    throw new DataError(`config key ${key}: must be >= 1, got ${n}`);
  }
  return n;
}

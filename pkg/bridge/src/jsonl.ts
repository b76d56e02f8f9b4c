import { createWriteStream, readFileSync } from "node:fs";
import { once } from "node:events";

import { DataError } from "./types.js";

/**
 * Parse a JSONL file into (lineNumber, object) pairs.
 * Blank lines are skipped; anything that is not a JSON object is an error.
 */
export function readJsonl(path: string): Array<[number, Record<string, unknown>]> {
  let raw: string;
  try {
    raw = readFileSync(path, "utf-8");
  } catch (e) {
    throw new DataError(`cannot read ${path}: ${(e as Error).message}`);
  }
  const rows: Array<[number, Record<string, unknown>]> = [];
  const lines = raw.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) {
      continue;
    }
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch (e) {
      throw new DataError(`${path}:${i + 1}: invalid JSON (${(e as Error).message})`);
    }
    if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
      throw new DataError(`${path}:${i + 1}: record is not an object`);
    }
    rows.push([i + 1, obj as Record<string, unknown>]);
  }
  return rows;
}

/** Write rows as JSONL, one record per line, failing fast on stream errors. */
export async function writeJsonl(path: string, rows: unknown[]): Promise<void> {
  const ws = createWriteStream(path, { encoding: "utf-8" });
  const done = Promise.race([
    once(ws, "finish"),
    once(ws, "error").then(([e]) => Promise.reject(e)),
  ]);
  for (const row of rows) {
    if (!ws.write(JSON.stringify(row) + "\n")) {
      await once(ws, "drain");
    }
  }
  ws.end();
  await done;
}

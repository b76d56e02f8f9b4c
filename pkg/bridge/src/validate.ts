import { readFileSync } from "node:fs";

import { readJsonl } from "./jsonl.js";
import { ChannelMeta, DataError } from "./types.js";

export interface ChannelShape {
  kind: "dense" | "multi";
  dim: number;
  count: number;
  side: "page" | "query";
  vectorsTotal: number;
}

function checkRow(path: string, line: number, row: unknown[], dim: number): void {
  if (row.length !== dim) {
    throw new DataError(`${path}:${line}: dim ${row.length}, expected ${dim}`);
  }
  for (const v of row) {
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new DataError(`${path}:${line}: non-finite or non-numeric value`);
    }
  }
}

/**
 * Check an emitted channel file against the engine's ingestion schema:
 * one id per record, vector xor vectors, one kind and one dim per file,
 * finite values, no duplicates, at least one record.
 */
export function validateChannelFile(path: string): ChannelShape {
  const seen = new Set<string>();
  let kind: "dense" | "multi" | null = null;
  let side: "page" | "query" | null = null;
  let dim = -1;
  let count = 0;
  let vectorsTotal = 0;

  for (const [line, obj] of readJsonl(path)) {
    const hasPage = "page_id" in obj;
    const hasQuery = "query_id" in obj;
    if (hasPage === hasQuery) {
      throw new DataError(
        `${path}:${line}: record needs exactly one of page_id or query_id`,
      );
    }
    const recSide = hasPage ? "page" : "query";
    if (side === null) {
      side = recSide;
    } else if (side !== recSide) {
      throw new DataError(`${path}:${line}: mixed page and query records`);
    }
    const id = String(hasPage ? obj.page_id : obj.query_id);
    if (seen.has(id)) {
      throw new DataError(`${path}:${line}: duplicate id "${id}"`);
    }
    seen.add(id);

    const hasVector = "vector" in obj;
    const hasVectors = "vectors" in obj;
    if (hasVector === hasVectors) {
      throw new DataError(
        `${path}:${line}: record needs exactly one of vector or vectors`,
      );
    }
    const recKind = hasVector ? "dense" : "multi";
    if (kind === null) {
      kind = recKind;
    } else if (kind !== recKind) {
      throw new DataError(`${path}:${line}: mixed dense and multi records`);
    }

    if (recKind === "dense") {
      const row = obj.vector;
      if (!Array.isArray(row) || row.length === 0) {
        throw new DataError(`${path}:${line}: vector must be a non-empty array`);
      }
      if (dim === -1) {
        dim = row.length;
      }
      checkRow(path, line, row, dim);
      vectorsTotal += 1;
    } else {
      const rows = obj.vectors;
      if (!Array.isArray(rows) || rows.length === 0) {
        throw new DataError(`${path}:${line}: vectors must be a non-empty array`);
      }
      for (const row of rows) {
        if (!Array.isArray(row) || row.length === 0) {
          throw new DataError(`${path}:${line}: vectors rows must be non-empty arrays`);
        }
        if (dim === -1) {
          dim = row.length;
        }
        checkRow(path, line, row, dim);
      }
      vectorsTotal += rows.length;
    }
    count += 1;
  }

  if (count === 0 || kind === null || side === null) {
    throw new DataError(`${path}: channel file is empty`);
  }
  return { kind, dim, count, side, vectorsTotal };
}

/** Enforce the header invariant: meta dims/counts equal the observed file. */
export function validateAgainstMeta(path: string, metaPath: string): ChannelShape {
  const shape = validateChannelFile(path);
  let meta: ChannelMeta;
  try {
    meta = JSON.parse(readFileSync(metaPath, "utf-8")) as ChannelMeta;
  } catch (e) {
    throw new DataError(`cannot read meta ${metaPath}: ${(e as Error).message}`);
  }
  if (meta.dim !== shape.dim) {
    throw new DataError(`${metaPath}: dim ${meta.dim} != observed ${shape.dim}`);
  }
  if (meta.records !== shape.count) {
    throw new DataError(`${metaPath}: records ${meta.records} != observed ${shape.count}`);
  }
  if (meta.kind !== shape.kind) {
    throw new DataError(`${metaPath}: kind ${meta.kind} != observed ${shape.kind}`);
  }
  if (meta.side !== shape.side) {
    throw new DataError(`${metaPath}: side ${meta.side} != observed ${shape.side}`);
  }
  if (meta.vectors_total !== shape.vectorsTotal) {
    throw new DataError(
      `${metaPath}: vectors_total ${meta.vectors_total} != observed ${shape.vectorsTotal}`,
    );
  }
  return shape;
}

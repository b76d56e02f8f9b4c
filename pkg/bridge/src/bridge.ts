import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { readJsonl, writeJsonl } from "./jsonl.js";
import { createOfflineEncoders } from "./offline.js";
import { createTransformersEncoders } from "./transformers.js";
import {
  BridgeConfig,
  ChannelMeta,
  DataError,
  EmbedSummary,
  Encoders,
  PageInput,
  QueryInput,
  SkippedInput,
} from "./types.js";

export async function createEncoders(config: BridgeConfig): Promise<Encoders> {
  if (config.backend === "offline") {
    return createOfflineEncoders(config);
  }
  return createTransformersEncoders(config);
}

function round6(v: number): number {
  return Math.round(v * 1e6) / 1e6;
}

function roundRows(rows: number[][]): number[][] {
  return rows.map((row) => row.map(round6));
}

/** Read corpus.jsonl (the engine's ingest format) into PageInput records. */
export function readCorpus(path: string): PageInput[] {
  const pages: PageInput[] = [];
  const seen = new Set<string>();
  for (const [line, obj] of readJsonl(path)) {
    for (const key of ["doc_id", "page_id", "page_index", "text"]) {
      if (!(key in obj)) {
        throw new DataError(`${path}:${line}: missing field "${key}"`);
      }
    }
    const pageId = String(obj.page_id);
    if (seen.has(pageId)) {
      throw new DataError(`${path}:${line}: duplicate page_id "${pageId}"`);
    }
    seen.add(pageId);
    pages.push({
      doc_id: String(obj.doc_id),
      page_id: pageId,
      page_index: Number(obj.page_index),
      text: String(obj.text),
      image_ref: obj.image_ref == null ? null : String(obj.image_ref),
    });
  }
  return pages;
}

/** Read queries.jsonl; only query_id and question matter to the bridge. */
export function readQueries(path: string): QueryInput[] {
  const queries: QueryInput[] = [];
  const seen = new Set<string>();
  for (const [line, obj] of readJsonl(path)) {
    for (const key of ["query_id", "question"]) {
      if (!(key in obj)) {
        throw new DataError(`${path}:${line}: missing field "${key}"`);
      }
    }
    const queryId = String(obj.query_id);
    if (seen.has(queryId)) {
      throw new DataError(`${path}:${line}: duplicate query_id "${queryId}"`);
    }
    seen.add(queryId);
    queries.push({ query_id: queryId, question: String(obj.question) });
  }
  return queries;
}

/** Resolve an image_ref to raw bytes: inline payload or file under imageRoot. */
function resolveImage(ref: string, imageRoot: string): Uint8Array {
  if (ref.startsWith("inline:")) {
    return new TextEncoder().encode(ref.slice("inline:".length));
  }
  return new Uint8Array(readFileSync(join(imageRoot, ref)));
}

interface ChannelWrite {
  channel: string;
  side: "page" | "query";
  kind: "dense" | "multi";
  model: string;
  rows: Array<Record<string, unknown>>;
  vectorsTotal: number;
  dim: number;
}

async function writeChannel(
  config: BridgeConfig,
  w: ChannelWrite,
  skipped: SkippedInput[],
): Promise<EmbedSummary> {
  if (w.rows.length === 0) {
    throw new DataError(`channel ${w.channel}: no inputs could be embedded`);
  }
  mkdirSync(config.outDir, { recursive: true });
  const prefix = w.side === "query" ? "emb.query." : "emb.";
  const outputPath = join(config.outDir, `${prefix}${w.channel}.jsonl`);
  const metaPath = `${outputPath.slice(0, -".jsonl".length)}.meta.json`;
  await writeJsonl(outputPath, w.rows);
  const meta: ChannelMeta = {
    channel: w.channel,
    side: w.side,
    kind: w.kind,
    dim: w.dim,
    records: w.rows.length,
    vectors_total: w.vectorsTotal,
    vectors_avg: round6(w.vectorsTotal / w.rows.length),
    model: w.model,
    backend: config.backend,
    seed: config.seed,
  };
  writeFileSync(metaPath, JSON.stringify(meta, Object.keys(meta).sort(), 2) + "\n");
  return {
    channel: w.channel,
    side: w.side,
    kind: w.kind,
    records: w.rows.length,
    skipped,
    dim: w.dim,
    vectorsTotal: w.vectorsTotal,
    outputPath,
    metaPath,
  };
}

function checkDim(dim: number, rows: number, channel: string, id: string): void {
  if (dim !== rows) {
    throw new DataError(
      `channel ${channel}: dim drift at id "${id}" (${rows} != ${dim})`,
    );
  }
}

/**
 * Encode one multi-vector image record per corpus page into
 * emb.multivector_image.jsonl. Pages whose image cannot be resolved or
 * decoded are skipped and logged, never silently dropped.
 */
export async function embedPages(
  dataset: string | PageInput[],
  config: BridgeConfig,
  encoders?: Encoders,
): Promise<EmbedSummary> {
  const pages = typeof dataset === "string" ? readCorpus(dataset) : dataset;
  const enc = encoders ?? (await createEncoders(config));
  const rows: Array<Record<string, unknown>> = [];
  const skipped: SkippedInput[] = [];
  let dim = -1;
  let vectorsTotal = 0;

  for (let start = 0; start < pages.length; start += config.batchSize) {
    const batch = pages.slice(start, start + config.batchSize);
    for (const page of batch) {
      if (page.image_ref == null) {
        skipped.push({ id: page.page_id, reason: "no image_ref" });
        console.error(`skipping page ${page.page_id}: no image_ref`);
        continue;
      }
      let vectors: number[][];
      try {
        const bytes = resolveImage(page.image_ref, config.imageRoot);
        vectors = roundRows(await enc.multiImage(bytes));
      } catch (e) {
        const reason = `image decode failed (${(e as Error).message})`;
        skipped.push({ id: page.page_id, reason });
        console.error(`skipping page ${page.page_id}: ${reason}`);
        continue;
      }
      if (dim === -1) {
        dim = vectors[0].length;
      }
      checkDim(dim, vectors[0].length, "multivector_image", page.page_id);
      vectorsTotal += vectors.length;
      rows.push({ page_id: page.page_id, vectors });
    }
  }

  return writeChannel(
    config,
    {
      channel: "multivector_image",
      side: "page",
      kind: "multi",
      model: config.imageModel,
      rows,
      vectorsTotal,
      dim,
    },
    skipped,
  );
}

/**
 * Encode each query's question into two query-side channels: a dense vector
 * (emb.query.dense_text.jsonl) and a multi-vector set
 * (emb.query.multivector_text.jsonl). Empty questions are skipped and logged.
 */
export async function embedQueries(
  source: string | QueryInput[],
  config: BridgeConfig,
  encoders?: Encoders,
): Promise<{ dense: EmbedSummary; multi: EmbedSummary }> {
  const queries = typeof source === "string" ? readQueries(source) : source;
  const enc = encoders ?? (await createEncoders(config));
  const denseRows: Array<Record<string, unknown>> = [];
  const multiRows: Array<Record<string, unknown>> = [];
  const skipped: SkippedInput[] = [];
  let denseDim = -1;
  let multiDim = -1;
  let multiTotal = 0;

  for (let start = 0; start < queries.length; start += config.batchSize) {
    const batch = queries.slice(start, start + config.batchSize);
    for (const query of batch) {
      if (query.question.trim() === "") {
        skipped.push({ id: query.query_id, reason: "empty question" });
        console.error(`skipping query ${query.query_id}: empty question`);
        continue;
      }
      const vector = (await enc.denseText(query.question)).map(round6);
      const vectors = roundRows(await enc.multiText(query.question));
      if (denseDim === -1) {
        denseDim = vector.length;
        multiDim = vectors[0].length;
      }
      checkDim(denseDim, vector.length, "dense_text", query.query_id);
      checkDim(multiDim, vectors[0].length, "multivector_text", query.query_id);
      multiTotal += vectors.length;
      denseRows.push({ query_id: query.query_id, vector });
      multiRows.push({ query_id: query.query_id, vectors });
    }
  }

  const dense = await writeChannel(
    config,
    {
      channel: "dense_text",
      side: "query",
      kind: "dense",
      model: config.textModel,
      rows: denseRows,
      vectorsTotal: denseRows.length,
      dim: denseDim,
    },
    skipped,
  );
  const multi = await writeChannel(
    config,
    {
      channel: "multivector_text",
      side: "query",
      kind: "multi",
      model: config.textModel,
      rows: multiRows,
      vectorsTotal: multiTotal,
      dim: multiDim,
    },
    skipped,
  );
  return { dense, multi };
}

/** Shared types and the error taxonomy mirrored from the engine's CLI. */

/** Bad invocation or unusable option combination (CLI exit 2). */
export class UsageError extends Error {}

/** Malformed or inconsistent input data (CLI exit 3). */
export class DataError extends Error {}

/** Model backend unavailable or failing (CLI exit 4). */
export class BackendError extends Error {}

export type BackendName = "offline" | "transformers";

export interface BridgeConfig {
  backend: BackendName;
  /** Multi-vector image model identifier, recorded in channel meta. */
  imageModel: string;
  /** Dense text model identifier, recorded in channel meta. */
  textModel: string;
  batchSize: number;
  device: string;
  seed: number;
  /** Offline backend output dims; transformers backends report their own. */
  denseDim: number;
  multiDim: number;
  /** Cap on vectors kept per page or query in multi-vector channels. */
  maxVectorsPerPage: number;
  /** Bytes per pseudo-patch for the offline image encoder. */
  patchBytes: number;
  /** Directory that relative image_ref paths resolve against. */
  imageRoot: string;
  outDir: string;
  /** Optional dataset locators; CLI flags override these. */
  corpus?: string;
  queries?: string;
}

/** One page record from corpus.jsonl (the engine's ingest format). */
export interface PageInput {
  doc_id: string;
  page_id: string;
  page_index: number;
  text: string;
  image_ref?: string | null;
}

/** One query record from queries.jsonl; only id and question are needed here. */
export interface QueryInput {
  query_id: string;
  question: string;
}

/** Backend-agnostic encoder bundle. */
export interface Encoders {
  denseText(text: string): Promise<number[]>;
  multiText(text: string): Promise<number[][]>;
  multiImage(bytes: Uint8Array): Promise<number[][]>;
}

export interface SkippedInput {
  id: string;
  reason: string;
}

/** Result of writing one embedding channel file plus its meta sidecar. */
export interface EmbedSummary {
  channel: string;
  side: "page" | "query";
  kind: "dense" | "multi";
  records: number;
  skipped: SkippedInput[];
  dim: number;
  vectorsTotal: number;
  outputPath: string;
  metaPath: string;
}

/** Sidecar written next to each channel file; dims must match every record. */
export interface ChannelMeta {
  channel: string;
  side: "page" | "query";
  kind: "dense" | "multi";
  dim: number;
  records: number;
  vectors_total: number;
  vectors_avg: number;
  model: string;
  backend: BackendName;
  seed: number;
}

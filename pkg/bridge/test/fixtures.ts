import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { DEFAULT_CONFIG } from "../src/config.js";
import type { BridgeConfig, PageInput } from "../src/types.js";

export function tempDir(prefix = "bridge-test-"): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function testConfig(overrides: Partial<BridgeConfig> = {}): BridgeConfig {
  return { ...DEFAULT_CONFIG, outDir: tempDir(), ...overrides };
}

/** Three embeddable pages (inline images), varied payload sizes. */
export function samplePages(): PageInput[] {
  return [
    {
      doc_id: "d1",
      page_id: "d1_p0",
      page_index: 0,
      text: "alpha page about tokens",
      image_ref: "inline:" + "x".repeat(100),
    },
    {
      doc_id: "d1",
      page_id: "d1_p1",
      page_index: 1,
      text: "beta page",
      image_ref: "inline:tiny",
    },
    {
      doc_id: "d2",
      page_id: "d2_p0",
      page_index: 0,
      text: "gamma page",
      image_ref: "inline:" + "y".repeat(500),
    },
  ];
}

export function writeCorpusFile(dir: string, pages: PageInput[]): string {
  const path = join(dir, "corpus.jsonl");
  writeFileSync(path, pages.map((p) => JSON.stringify(p)).join("\n") + "\n");
  return path;
}

export interface QueryRow {
  query_id: string;
  question: string;
  gold_page_id: string;
  reference_answer: string;
}

export function sampleQueries(): QueryRow[] {
  return [
    {
      query_id: "q0",
      question: "where is alpha",
      gold_page_id: "d1_p0",
      reference_answer: "alpha answer",
    },
    {
      query_id: "q1",
      question: "where is beta",
      gold_page_id: "d1_p1",
      reference_answer: "beta answer",
    },
    {
      query_id: "q2",
      question: "where is gamma",
      gold_page_id: "d2_p0",
      reference_answer: "gamma answer",
    },
  ];
}

export function writeQueriesFile(dir: string, queries: QueryRow[]): string {
  const path = join(dir, "queries.jsonl");
  writeFileSync(path, queries.map((q) => JSON.stringify(q)).join("\n") + "\n");
  return path;
}

export function writeConfigFile(dir: string, lines: string[]): string {
  const path = join(dir, "bridge.conf");
  writeFileSync(path, lines.join("\n") + "\n");
  return path;
}

#!/usr/bin/env node
/**
 * Thin CLI over the bridge: embed-pages, embed-queries, validate.
 * Exit codes match the engine's convention: 0 ok, 2 usage, 3 data, 4 backend.
 */

import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";

import { embedPages, embedQueries } from "./bridge.js";
import { loadBridgeConfig } from "./config.js";
import { BackendError, DataError, UsageError } from "./types.js";
import { validateAgainstMeta, validateChannelFile } from "./validate.js";

const USAGE = `usage: pagesearch-embed-bridge <command> [options]

commands:
  embed-pages    --config FILE [--corpus FILE] [--out-dir DIR]
  embed-queries  --config FILE [--queries FILE] [--out-dir DIR]
  validate       --file FILE [--meta FILE]
`;

function emit(payload: unknown): void {
  console.log(JSON.stringify(payload, null, 2));
}

export async function main(argv: string[]): Promise<number> {
  try {
    const command = argv[0];
    const rest = argv.slice(1);
    switch (command) {
      case "embed-pages": {
        const { values } = parseArgs({
          args: rest,
          options: {
            config: { type: "string" },
            corpus: { type: "string" },
            "out-dir": { type: "string" },
          },
        });
        if (!values.config) {
          throw new UsageError("embed-pages requires --config");
        }
        const config = loadBridgeConfig(values.config);
        if (values["out-dir"]) {
          config.outDir = values["out-dir"];
        }
        const corpus = values.corpus ?? config.corpus;
        if (!corpus) {
          throw new UsageError("no corpus: pass --corpus or set it in the config");
        }
        emit(await embedPages(corpus, config));
        return 0;
      }
      case "embed-queries": {
        const { values } = parseArgs({
          args: rest,
          options: {
            config: { type: "string" },
            queries: { type: "string" },
            "out-dir": { type: "string" },
          },
        });
        if (!values.config) {
          throw new UsageError("embed-queries requires --config");
        }
        const config = loadBridgeConfig(values.config);
        if (values["out-dir"]) {
          config.outDir = values["out-dir"];
        }
        const queries = values.queries ?? config.queries;
        if (!queries) {
          throw new UsageError("no queries: pass --queries or set it in the config");
        }
        emit(await embedQueries(queries, config));
        return 0;
      }
      case "validate": {
        const { values } = parseArgs({
          args: rest,
          options: {
            file: { type: "string" },
            meta: { type: "string" },
          },
        });
        if (!values.file) {
          throw new UsageError("validate requires --file");
        }
        const shape = values.meta
          ? validateAgainstMeta(values.file, values.meta)
          : validateChannelFile(values.file);
        emit(shape);
        return 0;
      }
      case undefined:
      case "--help":
      case "-h":
        process.stderr.write(USAGE);
        return command === undefined ? 2 : 0;
      default:
        throw new UsageError(`unknown command "${command}"`);
    }
  } catch (e) {
    if (e instanceof UsageError || (e as { code?: string }).code?.startsWith("ERR_PARSE_ARGS")) {
      console.error(`usage error: ${(e as Error).message}`);
      process.stderr.write(USAGE);
      return 2;
    }
    if (e instanceof DataError) {
      console.error(`data error: ${e.message}`);
      return 3;
    }
    if (e instanceof BackendError) {
      console.error(`backend error: ${e.message}`);
      return 4;
    }
    throw e;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  main(process.argv.slice(2)).then(
    (code) => process.exit(code),
    (e) => {
      console.error(e);
      process.exit(1);
    },
  );
}

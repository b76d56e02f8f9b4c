import assert from "node:assert/strict";
import { describe, it } from "node:test";

import { DEFAULT_CONFIG, configFromPairs, loadBridgeConfig, parseKeyValue } from "../src/config.js";
import { DataError } from "../src/types.js";
import { tempDir, writeConfigFile } from "./fixtures.js";

describe("parseKeyValue", () => {
  it("parses key = value lines with comments and blanks", () => {
    const pairs = parseKeyValue(
      ["# header comment", "", "backend = offline", "seed = 9  # trailing", "device=cpu"].join("\n"),
    );
    assert.deepEqual(
      [...pairs.entries()],
      [
        ["backend", "offline"],
        ["seed", "9"],
        ["device", "cpu"],
      ],
    );
  });

  it("rejects lines without an equals sign, with the line number", () => {
    assert.throws(() => parseKeyValue("backend = offline\njust words\n", "f.conf"), (e: Error) => {
      assert.ok(e instanceof DataError);
      assert.match(e.message, /f\.conf:2/);
      return true;
    });
  });

  it("rejects duplicate keys", () => {
    assert.throws(() => parseKeyValue("seed = 1\nseed = 2\n"), DataError);
  });
});

describe("configFromPairs", () => {
  it("applies defaults for omitted keys", () => {
    const config = configFromPairs(new Map([["seed", "3"]]));
    assert.equal(config.seed, 3);
    assert.equal(config.backend, DEFAULT_CONFIG.backend);
    assert.equal(config.denseDim, DEFAULT_CONFIG.denseDim);
    assert.equal(config.batchSize, DEFAULT_CONFIG.batchSize);
  });

  it("maps every documented key", () => {
    const config = configFromPairs(
      new Map([
        ["backend", "offline"],
        ["image_model", "m/img"],
        ["text_model", "m/txt"],
        ["batch_size", "2"],
        ["device", "gpu0"],
        ["seed", "11"],
        ["dense_dim", "12"],
        ["multi_dim", "6"],
        ["max_vectors_per_page", "3"],
        ["patch_bytes", "9"],
        ["image_root", "/imgs"],
        ["out_dir", "/out"],
        ["corpus", "c.jsonl"],
        ["queries", "q.jsonl"],
      ]),
    );
    assert.equal(config.imageModel, "m/img");
    assert.equal(config.textModel, "m/txt");
    assert.equal(config.batchSize, 2);
    assert.equal(config.device, "gpu0");
    assert.equal(config.seed, 11);
    assert.equal(config.denseDim, 12);
    assert.equal(config.multiDim, 6);
    assert.equal(config.maxVectorsPerPage, 3);
    assert.equal(config.patchBytes, 9);
    assert.equal(config.imageRoot, "/imgs");
    assert.equal(config.outDir, "/out");
    assert.equal(config.corpus, "c.jsonl");
    assert.equal(config.queries, "q.jsonl");
  });

  it("rejects unknown keys, bad integers, and bad backends", () => {
    assert.throws(() => configFromPairs(new Map([["colour", "red"]])), DataError);
    assert.throws(() => configFromPairs(new Map([["batch_size", "two"]])), DataError);
    assert.throws(() => configFromPairs(new Map([["batch_size", "0"]])), DataError);
    assert.throws(() => configFromPairs(new Map([["dense_dim", "-4"]])), DataError);
    assert.throws(() => configFromPairs(new Map([["backend", "petrol"]])), DataError);
  });

  it("allows seed zero but not zero dims", () => {
    assert.equal(configFromPairs(new Map([["seed", "0"]])).seed, 0);
    assert.throws(() => configFromPairs(new Map([["multi_dim", "0"]])), DataError);
  });
});

describe("loadBridgeConfig", () => {
  it("reads a file end to end", () => {
    const dir = tempDir();
    const path = writeConfigFile(dir, [
      "# offline smoke config",
      "backend = offline",
      "seed = 4",
      "dense_dim = 24",
      `out_dir = ${dir}`,
    ]);
    const config = loadBridgeConfig(path);
    assert.equal(config.seed, 4);
    assert.equal(config.denseDim, 24);
    assert.equal(config.outDir, dir);
  });

  it("missing file is a data error", () => {
    assert.throws(() => loadBridgeConfig("/nonexistent/bridge.conf"), DataError);
  });
});

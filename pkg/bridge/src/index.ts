export {
  BackendError,
  DataError,
  UsageError,
  type BackendName,
  type BridgeConfig,
  type ChannelMeta,
  type EmbedSummary,
  type Encoders,
  type PageInput,
  type QueryInput,
  type SkippedInput,
} from "./types.js";
export { DEFAULT_CONFIG, configFromPairs, loadBridgeConfig, parseKeyValue } from "./config.js";
export { createOfflineEncoders, fnv1a, mulberry32, tokenize, unitVector } from "./offline.js";
export { createTransformersEncoders } from "./transformers.js";
export {
  createEncoders,
  embedPages,
  embedQueries,
  readCorpus,
  readQueries,
} from "./bridge.js";
export { validateAgainstMeta, validateChannelFile, type ChannelShape } from "./validate.js";
export { readJsonl, writeJsonl } from "./jsonl.js";
export { main } from "./cli.js";

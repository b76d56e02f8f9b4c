/**
 * Real-model backend. Loads `@huggingface/transformers` at call time so the
 * package installs and tests without it; model weights are fetched from the
 * public hub by identifier, never vendored.
 */

import { BackendError, BridgeConfig, Encoders } from "./types.js";

const HUB_MODULE = "@huggingface/transformers";

async function loadHub(): Promise<any> {
  try {
    // non-literal specifier: resolved at runtime only
    return await import(String(HUB_MODULE));
  } catch (e) {
    throw new BackendError(
      `backend "transformers" requires ${HUB_MODULE}; install it or use backend = offline ` +
        `(${(e as Error).message})`,
    );
  }
}

export async function createTransformersEncoders(config: BridgeConfig): Promise<Encoders> {
  const hub = await loadHub();
  const opts = { device: config.device };

  let textPipe: any = null;
  let imagePipe: any = null;

  async function text(): Promise<any> {
    if (textPipe === null) {
      try {
        textPipe = await hub.pipeline("feature-extraction", config.textModel, opts);
      } catch (e) {
        throw new BackendError(
          `cannot load text model ${config.textModel}: ${(e as Error).message}`,
        );
      }
    }
    return textPipe;
  }

  async function image(): Promise<any> {
    if (imagePipe === null) {
      try {
        imagePipe = await hub.pipeline("image-feature-extraction", config.imageModel, opts);
      } catch (e) {
        throw new BackendError(
          `cannot load image model ${config.imageModel}: ${(e as Error).message}`,
        );
      }
    }
    return imagePipe;
  }

  function rows(tensor: any): number[][] {
    // tensors come back as [1, n, d]; flatten to n rows of d
    const [, n, d] = tensor.dims;
    const data = Array.from(tensor.data as Iterable<number>);
    const out: number[][] = [];
    for (let i = 0; i < n; i++) {
      out.push(data.slice(i * d, (i + 1) * d));
    }
    return out;
  }

  return {
    async denseText(input: string): Promise<number[]> {
      const pipe = await text();
      const out = await pipe(input, { pooling: "mean", normalize: true });
      return Array.from(out.data as Iterable<number>);
    },

    async multiText(input: string): Promise<number[][]> {
      const pipe = await text();
      return rows(await pipe(input)).slice(0, config.maxVectorsPerPage);
    },

    async multiImage(bytes: Uint8Array): Promise<number[][]> {
      const pipe = await image();
      const blob = new Blob([Buffer.from(bytes)]);
      const img = await hub.RawImage.fromBlob(blob);
      return rows(await pipe(img)).slice(0, config.maxVectorsPerPage);
    },
  };
}

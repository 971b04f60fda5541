/**
 * Feature encoders behind one interface: the real CLIP ViT-L/14 through
 * transformers.js, and a deterministic stub with identical output shapes
 * for tests and offline runs.
 *
 * Per frame the vision side emits a 16x16 grid of 1024-dim patch features;
 * the text side emits a 768-dim class-token feature plus the
 * projection-aligned 768-dim embedding used for parameter-free matching.
 */

import { Frame } from './frames.js';
import { mulberry32 } from './frames.js';
import { fnv1a64 } from './rvlm.js';

export const GRID = 16;
export const VISION_DIM = 1024;
export const TEXT_DIM = 768;

export interface TextFeatures {
  /** class-token features, count x TEXT_DIM */
  features: Float32Array;
  /** projection-aligned embeddings, count x TEXT_DIM */
  aligned: Float32Array;
}

export interface FeatureEncoder {
  /** Per-frame patch grids, frames x GRID x GRID x VISION_DIM in C order. */
  encodeFrames(frames: Frame[]): Promise<Float32Array>;
  encodeText(texts: string[]): Promise<TextFeatures>;
}

/**
 * Deterministic stand-in encoder: features are seeded by a checksum of the
 * input bytes, so identical clips and questions always produce identical
 * files. Selected with the manifest model "stub" or "stub:<seed>".
 */
export class StubEncoder implements FeatureEncoder {
  constructor(private readonly seed = 0) {}

  private fill(out: Float32Array, offset: number, count: number, contentKey: bigint): void {
    const mixed = Number((contentKey ^ BigInt(this.seed)) & 0xffffffffn);
    const rand = mulberry32(mixed);
    for (let i = 0; i < count; i++) {
      out[offset + i] = rand() * 2 - 1;
    }
  }

  async encodeFrames(frames: Frame[]): Promise<Float32Array> {
    const perFrame = GRID * GRID * VISION_DIM;
    const out = new Float32Array(frames.length * perFrame);
    frames.forEach((frame, index) => {
      this.fill(out, index * perFrame, perFrame, fnv1a64(frame.data));
    });
    return out;
  }

  async encodeText(texts: string[]): Promise<TextFeatures> {
    const features = new Float32Array(texts.length * TEXT_DIM);
    const aligned = new Float32Array(texts.length * TEXT_DIM);
    texts.forEach((text, index) => {
      if (!text.trim()) {
        throw new Error(`question ${index} is empty`);
      }
      const key = fnv1a64(new TextEncoder().encode(text));
      this.fill(features, index * TEXT_DIM, TEXT_DIM, key);
      this.fill(aligned, index * TEXT_DIM, TEXT_DIM, key ^ 0xa5a5a5a5n);
    });
    return { features, aligned };
  }
}

/**
 * CLIP through transformers.js. Requires the model to be available locally
 * (or downloadable); load failures surface as errors. The ONNX exports
 * expose the final hidden layer; exporting the second-to-last layer needs a
 * custom conversion, so the patch grid comes from last_hidden_state here.
 */
export class ClipEncoder implements FeatureEncoder {
  private visionPromise?: Promise<{ processor: any; model: any }>;
  private textPromise?: Promise<{ tokenizer: any; model: any }>;

  constructor(private readonly modelId: string) {}

  private async transformers() {
    try {
      return await import('@xenova/transformers');
    } catch (error) {
      throw new Error(
        `model load failure: @xenova/transformers is not installed ` +
          `(${(error as Error).message}); use the "stub" model for offline runs`,
      );
    }
  }

  private async vision() {
    if (!this.visionPromise) {
      this.visionPromise = (async () => {
        const { AutoProcessor, CLIPVisionModelWithProjection } = await this.transformers();
        const processor = await AutoProcessor.from_pretrained(this.modelId);
        const model = await CLIPVisionModelWithProjection.from_pretrained(this.modelId, {
          quantized: false,
        });
        return { processor, model };
      })();
    }
    return this.visionPromise;
  }

  private async text() {
    if (!this.textPromise) {
      this.textPromise = (async () => {
        const { AutoTokenizer, CLIPTextModelWithProjection } = await this.transformers();
        const tokenizer = await AutoTokenizer.from_pretrained(this.modelId);
        const model = await CLIPTextModelWithProjection.from_pretrained(this.modelId, {
          quantized: false,
        });
        return { tokenizer, model };
      })();
    }
    return this.textPromise;
  }

  async encodeFrames(frames: Frame[]): Promise<Float32Array> {
    const { processor, model } = await this.vision();
    const { RawImage } = await this.transformers();
    const perFrame = GRID * GRID * VISION_DIM;
    const out = new Float32Array(frames.length * perFrame);
    for (let index = 0; index < frames.length; index++) {
      const frame = frames[index];
      const image = new RawImage(frame.data, frame.width, frame.height, 3);
      const inputs = await processor(image);
      const result = await model(inputs, { output_hidden_states: true });
      const hidden = result.last_hidden_state ?? result.hidden_states?.at(-2);
      if (!hidden) {
        throw new Error(`${this.modelId}: model emitted no hidden states`);
      }
      const [, tokens, dim] = hidden.dims;
      if (tokens !== GRID * GRID + 1 || dim !== VISION_DIM) {
        throw new Error(
          `${this.modelId}: expected ${GRID * GRID + 1}x${VISION_DIM} hidden state, got ${tokens}x${dim}`,
        );
      }
      // drop the class token, keep the row-major patch grid
      out.set(hidden.data.slice(dim, (GRID * GRID + 1) * dim), index * perFrame);
    }
    return out;
  }

  async encodeText(texts: string[]): Promise<TextFeatures> {
    for (const [index, text] of texts.entries()) {
      if (!text.trim()) {
        throw new Error(`question ${index} is empty`);
      }
    }
    const { tokenizer, model } = await this.text();
    const inputs = tokenizer(texts, { padding: true, truncation: true });
    const result = await model(inputs);
    const features = new Float32Array(texts.length * TEXT_DIM);
    const aligned = new Float32Array(texts.length * TEXT_DIM);
    const pooled = result.text_embeds;
    const hidden = result.last_hidden_state;
    for (let i = 0; i < texts.length; i++) {
      aligned.set(pooled.data.slice(i * TEXT_DIM, (i + 1) * TEXT_DIM), i * TEXT_DIM);
      // class-token feature: the end-of-text position of the final layer
      const ids = inputs.input_ids.data.slice(
        i * inputs.input_ids.dims[1],
        (i + 1) * inputs.input_ids.dims[1],
      );
      let eot = ids.length - 1;
      for (let pos = ids.length - 1; pos >= 0; pos--) {
        if (Number(ids[pos]) !== 0) {
          eot = pos;
          break;
        }
      }
      const rowOffset = (i * inputs.input_ids.dims[1] + eot) * TEXT_DIM;
      features.set(hidden.data.slice(rowOffset, rowOffset + TEXT_DIM), i * TEXT_DIM);
    }
    return { features, aligned };
  }
}

const STUB_SCHEME = /^stub(?::(\d+))?$/;

export function makeEncoder(modelId: string): FeatureEncoder {
  const match = STUB_SCHEME.exec(modelId);
  if (match) {
    return new StubEncoder(match[1] ? Number(match[1]) : 0);
  }
  return new ClipEncoder(modelId);
}

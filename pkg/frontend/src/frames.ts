/**
 * Frame sources: decode a real clip through ffmpeg at a fixed sample rate,
 * or generate a deterministic synthetic clip for tests and dry runs.
 *
 * Frames are 224x224 RGB24 (the standard CLIP input crop); ffmpeg handles
 * the resize and center crop.
 */

import { spawnSync } from 'node:child_process';
import { existsSync } from 'node:fs';

export const FRAME_SIZE = 224;
const FRAME_BYTES = FRAME_SIZE * FRAME_SIZE * 3;

export interface Frame {
  width: number;
  height: number;
  /** RGB24 pixel data, row-major */
  data: Uint8Array;
}

/** Mulberry32: small, fast, deterministic PRNG for synthetic content. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/**
 * A deterministic moving-gradient clip. Source URI: "synthetic:<seed>:<seconds>".
 */
export function syntheticClip(seed: number, seconds: number, fps: number): Frame[] {
  const frameCount = Math.max(1, Math.round(seconds * fps));
  const frames: Frame[] = [];
  for (let f = 0; f < frameCount; f++) {
    const rand = mulberry32(seed * 9973 + f);
    const data = new Uint8Array(FRAME_BYTES);
    const phase = (f / frameCount) * 255;
    for (let y = 0; y < FRAME_SIZE; y++) {
      for (let x = 0; x < FRAME_SIZE; x++) {
        const i = (y * FRAME_SIZE + x) * 3;
        data[i] = (x + phase) & 0xff;
        data[i + 1] = (y + phase * 2) & 0xff;
        data[i + 2] = (rand() * 256) & 0xff;
      }
    }
    frames.push({ width: FRAME_SIZE, height: FRAME_SIZE, data });
  }
  return frames;
}

/** Decode a video file via ffmpeg into center-cropped 224x224 RGB frames. */
export function ffmpegClip(path: string, fps: number): Frame[] {
  if (!existsSync(path)) {
    throw new Error(`video not found: ${path}`);
  }
  const filter = `fps=${fps},scale=${FRAME_SIZE}:${FRAME_SIZE}:force_original_aspect_ratio=increase,crop=${FRAME_SIZE}:${FRAME_SIZE}`;
  const result = spawnSync(
    'ffmpeg',
    ['-v', 'error', '-i', path, '-vf', filter, '-f', 'rawvideo', '-pix_fmt', 'rgb24', '-'],
    { maxBuffer: 1 << 30 },
  );
  if (result.error || result.status !== 0) {
    const detail = result.error?.message ?? result.stderr?.toString() ?? 'unknown ffmpeg failure';
    throw new Error(`ffmpeg failed for ${path}: ${detail}`);
  }
  const raw: Buffer = result.stdout;
  if (raw.length === 0 || raw.length % FRAME_BYTES !== 0) {
    throw new Error(`ffmpeg produced ${raw.length} bytes, not a whole number of frames`);
  }
  const frames: Frame[] = [];
  for (let offset = 0; offset < raw.length; offset += FRAME_BYTES) {
    frames.push({
      width: FRAME_SIZE,
      height: FRAME_SIZE,
      data: new Uint8Array(raw.buffer, raw.byteOffset + offset, FRAME_BYTES).slice(),
    });
  }
  return frames;
}

const SYNTHETIC_SCHEME = /^synthetic:(\d+):(\d+(?:\.\d+)?)$/;

export function loadClip(source: string, fps: number): Frame[] {
  const match = SYNTHETIC_SCHEME.exec(source);
  if (match) {
    return syntheticClip(Number(match[1]), Number(match[2]), fps);
  }
  return ffmpegClip(source, fps);
}

export function isSyntheticSource(source: string): boolean {
  return SYNTHETIC_SCHEME.test(source);
}

/**
 * Extraction driver: frames -> per-video RVLM feature files, questions ->
 * query-feature files (class-token features plus projection-aligned
 * embeddings for parameter-free matching).
 */

import { mkdirSync } from 'node:fs';
import { join } from 'node:path';

import { GRID, TEXT_DIM, VISION_DIM, makeEncoder } from './encoder.js';
import { loadClip } from './frames.js';
import { ExtractionManifest } from './manifest.js';
import { writeFrameFeatures, writeQueryFeatures } from './rvlm.js';

export interface ExtractionResult {
  frameFiles: { videoId: string; path: string; frames: number }[];
  questionFile?: string;
  alignedFile?: string;
}

export async function runExtraction(manifest: ExtractionManifest): Promise<ExtractionResult> {
  const encoder = makeEncoder(manifest.model);
  mkdirSync(manifest.outputDir, { recursive: true });
  const result: ExtractionResult = { frameFiles: [] };

  for (const video of manifest.videos) {
    const frames = loadClip(video.source, manifest.fps);
    const data = await encoder.encodeFrames(frames);
    const path = join(manifest.outputDir, `${video.id}.frames.rvlm`);
    writeFrameFeatures(path, {
      frames: frames.length,
      gridH: GRID,
      gridW: GRID,
      dim: VISION_DIM,
      data,
    });
    result.frameFiles.push({ videoId: video.id, path, frames: frames.length });
  }

  if (manifest.questions.length > 0) {
    const { features, aligned } = await encoder.encodeText(manifest.questions.map((q) => q.text));
    const questionFile = join(manifest.outputDir, 'questions.queries.rvlm');
    const alignedFile = join(manifest.outputDir, 'questions.aligned.rvlm');
    writeQueryFeatures(questionFile, manifest.questions.length, TEXT_DIM, features);
    writeQueryFeatures(alignedFile, manifest.questions.length, TEXT_DIM, aligned);
    result.questionFile = questionFile;
    result.alignedFile = alignedFile;
  }
  return result;
}

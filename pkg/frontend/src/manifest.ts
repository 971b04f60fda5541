/**
 * Extraction manifest: which clips and questions to encode, at what sample
 * rate, with which model, into which directory.
 */

import { existsSync, readFileSync } from 'node:fs';

import { isSyntheticSource } from './frames.js';

export interface VideoEntry {
  id: string;
  /** a video file path or a "synthetic:<seed>:<seconds>" URI */
  source: string;
}

export interface QuestionEntry {
  id: string;
  text: string;
}

export interface ExtractionManifest {
  fps: number;
  model: string;
  outputDir: string;
  videos: VideoEntry[];
  questions: QuestionEntry[];
}

export function parseManifest(path: string): ExtractionManifest {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, 'utf-8'));
  } catch (error) {
    throw new Error(`${path}: unreadable manifest (${(error as Error).message})`);
  }
  const obj = raw as Partial<ExtractionManifest>;
  const fps = obj.fps ?? 1;
  if (typeof fps !== 'number' || !(fps > 0)) {
    throw new Error(`${path}: fps must be positive`);
  }
  if (typeof obj.outputDir !== 'string' || !obj.outputDir) {
    throw new Error(`${path}: outputDir is required`);
  }
  if (typeof obj.model !== 'string' || !obj.model) {
    throw new Error(`${path}: model is required`);
  }
  const videos = obj.videos ?? [];
  const questions = obj.questions ?? [];
  if (!Array.isArray(videos) || !Array.isArray(questions)) {
    throw new Error(`${path}: videos and questions must be arrays`);
  }
  const seen = new Set<string>();
  for (const video of videos) {
    if (!video?.id || !video?.source) {
      throw new Error(`${path}: every video needs an id and a source`);
    }
    if (seen.has(video.id)) {
      throw new Error(`${path}: duplicate video id ${video.id}`);
    }
    seen.add(video.id);
    if (!isSyntheticSource(video.source) && !existsSync(video.source)) {
      throw new Error(`${path}: video source not found: ${video.source}`);
    }
  }
  for (const question of questions) {
    if (!question?.id || typeof question.text !== 'string' || !question.text.trim()) {
      throw new Error(`${path}: every question needs an id and non-empty text`);
    }
  }
  return { fps, model: obj.model, outputDir: obj.outputDir, videos, questions };
}

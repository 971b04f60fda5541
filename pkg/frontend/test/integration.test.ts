/**
 * End-to-end contract with the retrieval engine: files written here must
 * load through its importer, chunk into ceil(T/4) x 68 tokens, and the
 * text features must be accepted by its query encoder. Skipped when the
 * python package is not importable in this environment.
 */

import assert from 'node:assert/strict';
import { spawnSync } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join, resolve } from 'node:path';
import { test } from 'node:test';

import { parseManifest } from '../src/manifest.js';
import { runExtraction } from '../src/extract.js';

const PYTHON = process.env.CHUNKSEEK_PYTHON ?? 'python3';
const ENGINE_SRC = resolve(import.meta.dirname ?? '.', '..', '..', '..', 'src');

function python(args: string[], code?: string) {
  return spawnSync(PYTHON, code ? ['-c', code] : args, {
    encoding: 'utf-8',
    env: { ...process.env, PYTHONPATH: `${ENGINE_SRC}:${process.env.PYTHONPATH ?? ''}` },
  });
}

function engineAvailable(): boolean {
  const probe = python([], 'import chunkseek');
  return probe.status === 0;
}

test('engine ingests adapter output as ceil(T/4) chunks of 68 tokens', async (t) => {
  if (!engineAvailable()) {
    t.skip('chunkseek python package not importable');
    return;
  }
  const dir = mkdtempSync(join(tmpdir(), 'integration-'));
  const manifestPath = join(dir, 'manifest.json');
  writeFileSync(
    manifestPath,
    JSON.stringify({
      fps: 1,
      model: 'stub:1',
      outputDir: dir,
      videos: [{ id: 'clip01', source: 'synthetic:9:13' }],
      questions: [{ id: 'q0', text: 'what vegetation types are visible?' }],
    }),
  );
  const result = await runExtraction(parseManifest(manifestPath));
  assert.equal(result.frameFiles[0].frames, 13);

  const ingest = python([
    '-m',
    'chunkseek',
    'ingest',
    '--features',
    result.frameFiles[0].path,
    '--out',
    join(dir, 'store.rvlm'),
  ]);
  assert.equal(ingest.status, 0, ingest.stderr);
  // ceil(13 / 4) = 4 chunks
  assert.match(ingest.stdout, /clip01: 4 chunks, 68 tokens\/chunk/);

  const encode = python(
    [],
    [
      'import numpy as np',
      'from chunkseek import binio, QueryEncoder, encode_query',
      `features = binio.read_query_features(${JSON.stringify(result.questionFile)})`,
      'assert features.shape == (1, 768), features.shape',
      'enc = QueryEncoder.initialize(768, 32, 1024, np.random.default_rng(0))',
      'out = encode_query(features[0].astype(np.float64), enc)',
      'assert out.shape == (1024,)',
      'print("encoded", out.shape)',
    ].join('\n'),
  );
  assert.equal(encode.status, 0, encode.stderr);
  assert.match(encode.stdout, /encoded \(1024,\)/);
});

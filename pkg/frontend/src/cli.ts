/**
 * chunkseek-clip-adapter CLI:
 *   node dist/src/cli.js extract --manifest manifest.json
 */

import { parseManifest } from './manifest.js';
import { runExtraction } from './extract.js';

async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  if (command !== 'extract') {
    console.error('usage: cli.js extract --manifest <manifest.json>');
    return 1;
  }
  const flagIndex = rest.indexOf('--manifest');
  if (flagIndex < 0 || !rest[flagIndex + 1]) {
    console.error('usage: cli.js extract --manifest <manifest.json>');
    return 1;
  }
  try {
    const manifest = parseManifest(rest[flagIndex + 1]);
    const result = await runExtraction(manifest);
    for (const file of result.frameFiles) {
      console.log(`${file.videoId}: ${file.frames} frames -> ${file.path}`);
    }
    if (result.questionFile) {
      console.log(`questions -> ${result.questionFile}`);
      console.log(`aligned   -> ${result.alignedFile}`);
    }
    return 0;
  } catch (error) {
    console.error(`extraction failed: ${(error as Error).message}`);
    return 2;
  }
}

main(process.argv.slice(2)).then((code) => {
  process.exitCode = code;
});

/**
 * Command line: train / infer / evaluate against a fringe3d dataset.
 *
 *   node dist/cli.js train --dataset DIR --out DIR [--epochs N] [--batch N]
 *   node dist/cli.js infer --checkpoint DIR/best --input BASE --out BASE
 *   node dist/cli.js evaluate --checkpoint DIR/best --dataset DIR
 */

import * as path from 'path';
import { initBackend } from './backend';
import { loadManifest, loadSample, splitEntries } from './dataset';
import { evaluateRmse, loadCheckpoint, train } from './train';
import { inferToCube, metaFromCheckpoint } from './infer';

function parseArgs(argv: string[]): { command: string; opts: Record<string, string> } {
  const [command, ...rest] = argv;
  const opts: Record<string, string> = {};
  for (let i = 0; i < rest.length; i += 2) {
    if (!rest[i].startsWith('--')) throw new Error(`unexpected argument ${rest[i]}`);
    opts[rest[i].slice(2)] = rest[i + 1];
  }
  return { command, opts };
}

async function main(): Promise<number> {
  const { command, opts } = parseArgs(process.argv.slice(2));
  await initBackend();
  if (command === 'train') {
    const result = await train(opts['dataset'], opts['out'], {
      epochs: opts['epochs'] ? Number(opts['epochs']) : undefined,
      batchSize: opts['batch'] ? Number(opts['batch']) : undefined,
      maxTrainSamples: opts['max-train'] ? Number(opts['max-train']) : undefined
    } as any);
    console.log(
      `best val RMSE ${result.bestValRmse.toFixed(5)} ` +
        `(input baseline ${result.baselineRmse.toFixed(5)})`
    );
    return 0;
  }
  if (command === 'infer') {
    const { net, meta } = loadCheckpoint(opts['checkpoint']);
    inferToCube(net, metaFromCheckpoint(meta), opts['input'], opts['out']);
    console.log(`wrote ${opts['out']} (spectral cube) and ${opts['out']}_sheared`);
    return 0;
  }
  if (command === 'evaluate') {
    const { net, meta } = loadCheckpoint(opts['checkpoint']);
    const manifest = loadManifest(opts['dataset']);
    const val = splitEntries(manifest).val.map((e) => loadSample(manifest, e));
    const r = evaluateRmse(net, val, manifest.shearedShape, 0, meta.inputGain ?? 1.0);
    console.log(
      `held-out RMSE ${r.modelRmse.toFixed(5)} vs baseline ${r.baselineRmse.toFixed(5)}`
    );
    return r.modelRmse < r.baselineRmse ? 0 : 1;
  }
  console.error(`unknown command ${command}; use train | infer | evaluate`);
  return 2;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(String(err?.stack ?? err));
    process.exit(1);
  }
);

/**
 * Held-out evaluation: RMSE against the input baseline, and the depth check
 * that round-trips network outputs through the primary toolkit's decode
 * command (the decoded axial argmax must sit on the sample's true plane).
 */

import { spawnSync } from 'child_process';
import * as fs from 'fs';
import * as path from 'path';
import { readArray } from './container';
import { DatasetManifest, loadSample, splitEntries } from './dataset';
import { InferMeta, inferToCube } from './infer';
import { Network } from './model';

export interface ArgmaxReport {
  total: number;
  matched: number;
  perSample: Array<{ id: number; truth: number; decoded: number }>;
}

export function decodeWithPrimary(cubeBase: string, outDir: string): void {
  const r = spawnSync(
    'python3',
    ['-m', 'fringe3d.cli', 'decode', '-i', cubeBase, '-o', outDir],
    { encoding: 'utf8' }
  );
  if (r.status !== 0) {
    throw new Error(`primary decode failed: ${r.stderr}`);
  }
}

export function axialArgmaxOfDecoded(decodeDir: string): number {
  const vol = readArray(path.join(decodeDir, 'decoded_volume'));
  const [nx, ny, nz] = vol.shape;
  const profile = new Float64Array(nz);
  for (let i = 0; i < nx * ny; i++) {
    for (let z = 0; z < nz; z++) profile[z] += vol.data[i * nz + z];
  }
  let best = 0;
  for (let z = 1; z < nz; z++) if (profile[z] > profile[best]) best = z;
  return best;
}

export function evaluateDecodedArgmax(
  net: Network,
  manifest: DatasetManifest,
  meta: InferMeta,
  workDir: string,
  maxSamples?: number
): ArgmaxReport {
  fs.mkdirSync(workDir, { recursive: true });
  const val = splitEntries(manifest).val;
  const entries = maxSamples ? val.slice(0, maxSamples) : val;
  const perSample: ArgmaxReport['perSample'] = [];
  let matched = 0;
  for (const entry of entries) {
    const sample = loadSample(manifest, entry);
    const inputPath = path.join(manifest.root, entry.directory, entry.inputs[0]);
    const cubeBase = path.join(workDir, `pred_${entry.id}`);
    inferToCube(net, meta, inputPath, cubeBase);
    const decodeDir = path.join(workDir, `dec_${entry.id}`);
    decodeWithPrimary(cubeBase, decodeDir);
    const decoded = axialArgmaxOfDecoded(decodeDir);
    if (decoded === entry.plane_index) matched++;
    perSample.push({ id: entry.id, truth: entry.plane_index, decoded });
    void sample;
  }
  return { total: entries.length, matched, perSample };
}

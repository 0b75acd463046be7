/**
 * Access to training datasets emitted by `fringe3d dataset`: the YAML
 * manifest lists per-sample pose metadata, the target container and one
 * input container per shot-noise realization, all pre-scaled into the tanh
 * range by the recorded `target_scale`.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as yaml from 'js-yaml';
import { readArray } from './container';

export interface DatasetEntry {
  id: number;
  split: 'train' | 'val';
  text: string;
  plane_index: number;
  directory: string;
  target: string;
  inputs: string[];
}

export interface DatasetManifest {
  root: string;
  targetScale: number;
  shearedShape: [number, number, number];
  numChannels: number;
  centerWavelengthNm: number;
  channelSpacingNm: number;
  dispersionStep: number;
  entries: DatasetEntry[];
}

export function loadManifest(datasetDir: string): DatasetManifest {
  const parsed = yaml.load(
    fs.readFileSync(path.join(datasetDir, 'manifest.yaml'), 'utf8')
  ) as any;
  const cfg = parsed.effective_config;
  return {
    root: datasetDir,
    targetScale: Number(parsed.derived.target_scale),
    shearedShape: parsed.derived.sheared_shape as [number, number, number],
    numChannels: Number(cfg.grid.num_channels),
    centerWavelengthNm: Number(cfg.grid.center_wavelength_nm),
    channelSpacingNm: Number(cfg.grid.channel_spacing_nm),
    dispersionStep: Number(cfg.mask.dispersion_step),
    entries: parsed.entries as DatasetEntry[]
  };
}

export interface Sample {
  entry: DatasetEntry;
  /** one Float32Array per noise realization, C order (x, yshear, lambda) */
  inputs: Float32Array[];
  target: Float32Array;
}

export function loadSample(manifest: DatasetManifest, entry: DatasetEntry): Sample {
  const dir = path.join(manifest.root, entry.directory);
  const target = Float32Array.from(readArray(path.join(dir, entry.target)).data);
  const inputs = entry.inputs.map((name) =>
    Float32Array.from(readArray(path.join(dir, name)).data)
  );
  return { entry, inputs, target };
}

export function splitEntries(manifest: DatasetManifest): {
  train: DatasetEntry[];
  val: DatasetEntry[];
} {
  return {
    train: manifest.entries.filter((e) => e.split === 'train'),
    val: manifest.entries.filter((e) => e.split === 'val')
  };
}

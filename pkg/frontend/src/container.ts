/**
 * Reader/writer for the imaging toolkit's raw array container:
 * `<name>.bin` holds little-endian values in C order (last axis fastest),
 * `<name>.hdr` is a plain-text `key: value` sidecar with dtype, shape,
 * layout and free-form metadata.
 */

import * as fs from 'fs';
import * as path from 'path';

export interface RawArray {
  data: Float64Array;
  shape: number[];
  meta: Record<string, string>;
}

const FORMAT_NAME = 'raw-array-v1';

export function readArray(basePath: string): RawArray {
  const hdrPath = withSuffix(basePath, '.hdr');
  const meta: Record<string, string> = {};
  for (const line of fs.readFileSync(hdrPath, 'utf8').split('\n')) {
    const trimmed = line.trim();
    if (!trimmed || trimmed.startsWith('#')) continue;
    const sep = trimmed.indexOf(':');
    if (sep < 0) continue;
    meta[trimmed.slice(0, sep).trim()] = trimmed.slice(sep + 1).trim();
  }
  if (meta['format'] !== FORMAT_NAME) {
    throw new Error(`${hdrPath}: unsupported format ${meta['format']}`);
  }
  const dtype = meta['dtype'];
  const shape = meta['shape'].split(/\s+/).map(Number);
  const raw = fs.readFileSync(withSuffix(basePath, '.bin'));
  const count = shape.reduce((a, b) => a * b, 1);
  let data: Float64Array;
  if (dtype === 'float64') {
    data = new Float64Array(raw.buffer, raw.byteOffset, count).slice();
  } else if (dtype === 'float32') {
    data = Float64Array.from(new Float32Array(raw.buffer, raw.byteOffset, count));
  } else {
    throw new Error(`${hdrPath}: unsupported dtype ${dtype}`);
  }
  return { data, shape, meta };
}

export function writeArray(
  basePath: string,
  data: Float64Array | Float32Array | number[],
  shape: number[],
  meta: Record<string, string | number> = {}
): void {
  const values = Float64Array.from(data as ArrayLike<number>);
  const count = shape.reduce((a, b) => a * b, 1);
  if (values.length !== count) {
    throw new Error(`shape ${shape} does not match length ${values.length}`);
  }
  fs.mkdirSync(path.dirname(basePath), { recursive: true });
  const lines = [
    `format: ${FORMAT_NAME}`,
    'dtype: float64',
    `shape: ${shape.join(' ')}`,
    'layout: C last-axis-fastest little-endian'
  ];
  for (const key of Object.keys(meta).sort()) {
    lines.push(`${key}: ${meta[key]}`);
  }
  fs.writeFileSync(withSuffix(basePath, '.bin'), Buffer.from(values.buffer));
  fs.writeFileSync(withSuffix(basePath, '.hdr'), lines.join('\n') + '\n');
}

function withSuffix(basePath: string, suffix: string): string {
  if (basePath.endsWith('.bin') || basePath.endsWith('.hdr')) {
    basePath = basePath.slice(0, -4);
  }
  return basePath + suffix;
}

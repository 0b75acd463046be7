/** WASM backend bootstrap shared by the CLI and tests. */

import * as tf from '@tensorflow/tfjs';
import * as path from 'path';
import { setWasmPaths } from '@tensorflow/tfjs-backend-wasm';
import { registerWasmTrainingKernels } from './wasm-train';

let ready: Promise<void> | null = null;

export function initBackend(): Promise<void> {
  if (!ready) {
    setWasmPaths(
      path.join(
        __dirname,
        '..',
        'node_modules',
        '@tensorflow',
        'tfjs-backend-wasm',
        'dist'
      ) + path.sep
    );
    ready = tf
      .setBackend('wasm')
      .then(() => tf.ready())
      .then(() => registerWasmTrainingKernels());
  }
  return ready;
}

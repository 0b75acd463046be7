/**
 * Inference: run a checkpoint on normalized-backprojection inputs and write
 * spectral-cube containers the primary toolkit's decode command consumes.
 *
 * The network predicts the sheared cube in tanh units; outputs are
 * rescaled by the dataset's recorded target scale, unsheared (each channel
 * slides back by its dispersion offset) and saved with the grid metadata a
 * `spectral-cube` container requires.
 */

import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { readArray, writeArray } from './container';
import { Network, forward } from './model';

export interface InferMeta {
  targetScale: number;
  numChannels: number;
  centerWavelengthNm: number;
  channelSpacingNm: number;
  dispersionStep: number;
  inputGain: number;
}

export function channelOffsets(numChannels: number, step: number): number[] {
  const offsets: number[] = [];
  for (let k = 0; k < numChannels; k++) {
    offsets.push(step > 0 ? step * k : -step * (numChannels - 1 - k));
  }
  return offsets;
}

/** Slide every channel of a (nx, W, nl) cube back to the common support. */
export function unshear(
  data: Float64Array,
  shape: [number, number, number],
  step: number
): { data: Float64Array; shape: [number, number, number] } {
  const [nx, w, nl] = shape;
  const ny = w - (nl - 1) * Math.abs(step);
  const offsets = channelOffsets(nl, step);
  const out = new Float64Array(nx * ny * nl);
  for (let i = 0; i < nx; i++) {
    for (let k = 0; k < nl; k++) {
      const off = offsets[k];
      for (let j = 0; j < ny; j++) {
        out[(i * ny + j) * nl + k] = data[(i * w + (j + off)) * nl + k];
      }
    }
  }
  return { data: out, shape: [nx, ny, nl] };
}

export function inferToCube(
  net: Network,
  meta: InferMeta,
  inputPath: string,
  outBase: string
): { sheared: Float64Array; shape: [number, number, number] } {
  const arr = readArray(inputPath);
  const [nx, w, nl] = arr.shape as [number, number, number];
  const pred = tf.tidy(() => {
    const x = tf.tensor4d(Float32Array.from(arr.data), [1, nx, w, nl]);
    return forward(net, tf.mul(x, meta.inputGain) as tf.Tensor4D);
  });
  const flat = Float64Array.from(pred.dataSync());
  pred.dispose();
  for (let i = 0; i < flat.length; i++) flat[i] *= meta.targetScale;

  writeArray(outBase + '_sheared', flat, [nx, w, nl], {
    contains: 'sheared-cube',
    axes: 'x yshear lambda',
    center_wavelength_nm: meta.centerWavelengthNm,
    channel_spacing_nm: meta.channelSpacingNm,
    num_channels: meta.numChannels
  });
  const un = unshear(flat, [nx, w, nl], meta.dispersionStep);
  writeArray(outBase, un.data, un.shape, {
    contains: 'spectral-cube',
    axes: 'x y lambda',
    kind: 'ac_only',
    center_wavelength_nm: meta.centerWavelengthNm,
    channel_spacing_nm: meta.channelSpacingNm,
    num_channels: meta.numChannels
  });
  return { sheared: flat, shape: [nx, w, nl] };
}

export function metaFromCheckpoint(checkpointMeta: any): InferMeta {
  const d = checkpointMeta.dataset;
  return {
    targetScale: d.targetScale,
    numChannels: d.numChannels,
    centerWavelengthNm: d.centerWavelengthNm,
    channelSpacingNm: d.channelSpacingNm,
    dispersionStep: d.dispersionStep,
    inputGain: checkpointMeta.inputGain ?? 1.0
  };
}

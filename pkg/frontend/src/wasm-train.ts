/**
 * The wasm backend ships inference kernels only; the one gradient kernel
 * our training graph needs that it lacks is Conv2DBackpropFilter.  This
 * registers a composed implementation: for every kernel tap (i, j), the
 * filter gradient slice is the matmul of the strided input window with the
 * output gradient,
 *
 *   dW[i, j, ci, co] = sum_{b,oh,ow} x[b, i + oh*sh, j + ow*sw, ci] * dy[b,oh,ow,co]
 *
 * which runs on the backend's fast StridedSlice and BatchMatMul kernels.
 */

import * as tf from '@tensorflow/tfjs';

export function conv2dBackpropFilterComposed(
  x: tf.Tensor4D,
  dy: tf.Tensor4D,
  filterShape: [number, number, number, number],
  strides: number | [number, number],
  pad: 'valid' | 'same' | number,
  dimRoundingMode?: 'floor' | 'round' | 'ceil'
): tf.Tensor4D {
  return tf.tidy(() => {
    const convInfo = tf.backend_util.computeConv2DInfo(
      x.shape as [number, number, number, number],
      filterShape,
      strides,
      [1, 1],
      pad,
      dimRoundingMode
    );
    const {
      filterHeight: kh,
      filterWidth: kw,
      strideHeight: sh,
      strideWidth: sw,
      outHeight: oh,
      outWidth: ow,
      inChannels: ci,
      outChannels: co,
      batchSize: b,
      padInfo
    } = convInfo;
    const spanH = kh - 1 + (oh - 1) * sh + 1;
    const spanW = kw - 1 + (ow - 1) * sw + 1;
    const padBottom = Math.max(
      padInfo.bottom,
      spanH - (x.shape[1] + padInfo.top)
    );
    const padRight = Math.max(padInfo.right, spanW - (x.shape[2] + padInfo.left));
    const xp = tf.pad(x, [
      [0, 0],
      [padInfo.top, padBottom],
      [padInfo.left, padRight],
      [0, 0]
    ]);
    const dyFlat = tf.reshape(dy, [b * oh * ow, co]);
    const taps: tf.Tensor2D[] = [];
    for (let i = 0; i < kh; i++) {
      for (let j = 0; j < kw; j++) {
        const window = tf.stridedSlice(
          xp,
          [0, i, j, 0],
          [b, i + (oh - 1) * sh + 1, j + (ow - 1) * sw + 1, ci],
          [1, sh, sw, 1]
        );
        const flat = tf.reshape(window, [b * oh * ow, ci]);
        taps.push(tf.matMul(flat, dyFlat, true, false) as tf.Tensor2D);
      }
    }
    const stacked = tf.stack(taps, 0);
    return tf.reshape(stacked, [kh, kw, ci, co]) as tf.Tensor4D;
  });
}

export function registerWasmTrainingKernels(): void {
  if (tf.getKernel('Conv2DBackpropFilter', 'wasm')) return;
  tf.registerKernel({
    kernelName: 'Conv2DBackpropFilter',
    backendName: 'wasm',
    kernelFunc: ({ inputs, attrs }) => {
      const { x, dy } = inputs as { x: tf.Tensor4D; dy: tf.Tensor4D };
      const a = attrs as unknown as {
        strides: number | [number, number];
        pad: 'valid' | 'same' | number;
        dimRoundingMode?: 'floor' | 'round' | 'ceil';
        filterShape: [number, number, number, number];
      };
      return conv2dBackpropFilterComposed(
        x,
        dy,
        a.filterShape,
        a.strides,
        a.pad,
        a.dimRoundingMode
      );
    }
  });
}

import { beforeAll, describe, expect, test } from 'vitest';
import * as tf from '@tensorflow/tfjs';
import { initBackend } from '../src/backend';
import {
  buildNetwork,
  forward,
  paramCount,
  plainConvParamCount,
  res2ParamCount,
  totalParams
} from '../src/model';
import { conv2dBackpropFilterComposed } from '../src/wasm-train';

beforeAll(async () => {
  await initBackend();
});

describe('multi-scale residual convolution', () => {
  test('fewer trainable parameters than a plain convolution at equal channels', () => {
    for (const channels of [16, 32, 48]) {
      for (const splits of [2, 4]) {
        expect(res2ParamCount(channels, splits, 3)).toBeLessThan(
          plainConvParamCount(channels, 3)
        );
      }
    }
  });

  test('built network uses the cheaper block from the third stage on', () => {
    const net = buildNetwork(16);
    for (const stage of [3, 4, 5]) {
      const block = net.weights.get(`enc${stage}/conv2`)!;
      expect(block.kind).toBe('res2');
      const channels = net.spec.stageChannels[stage - 1];
      expect(paramCount(block)).toBeLessThan(plainConvParamCount(channels, 3));
      expect(net.weights.get(`dec${6 - stage}/conv2`)).toBeDefined();
    }
    for (const stage of [1, 2]) {
      expect(net.weights.get(`enc${stage}/conv2`)!.kind).toBe('conv');
    }
  });

  test('single split degenerates to one plain convolution', () => {
    const net = buildNetwork(16, { res2Splits: 1, stageChannels: [8, 8, 8, 8, 8] });
    const block = net.weights.get('enc3/conv2')!;
    expect(block.kind).toBe('res2');
    expect(paramCount(block)).toBe(plainConvParamCount(8, 3));
    if (block.kind === 'res2') {
      expect(block.kernels).toHaveLength(1);
      expect(block.kernels[0].shape).toEqual([3, 3, 8, 8]);
    }
  });

  test('indivisible split count is rejected', () => {
    expect(() =>
      buildNetwork(16, { res2Splits: 3, stageChannels: [16, 16, 16, 16, 16] })
    ).toThrow(/divisible/);
  });
});

describe('network contract', () => {
  test('shape preservation and tanh range on several input sizes', () => {
    const net = buildNetwork(16, { stageChannels: [8, 8, 8, 8, 8] });
    for (const shape of [
      [1, 64, 79, 16],
      [2, 32, 41, 16],
      [1, 48, 48, 16]
    ] as Array<[number, number, number, number]>) {
      const x = tf.randomNormal(shape);
      const y = forward(net, x);
      expect(y.shape).toEqual(shape);
      const data = y.dataSync();
      let lo = Infinity;
      let hi = -Infinity;
      for (const v of data) {
        lo = Math.min(lo, v);
        hi = Math.max(hi, v);
      }
      expect(lo).toBeGreaterThan(-1);
      expect(hi).toBeLessThan(1);
      x.dispose();
      y.dispose();
    }
  });

  test('zero input gives finite output inside (-1, 1)', () => {
    const net = buildNetwork(16, { stageChannels: [8, 8, 8, 8, 8] });
    const y = forward(net, tf.zeros([1, 32, 41, 16]));
    const data = y.dataSync();
    for (const v of data) {
      expect(Number.isFinite(v)).toBe(true);
      expect(Math.abs(v)).toBeLessThan(1);
    }
  });

  test('seeded builds are reproducible', () => {
    const a = buildNetwork(16, { stageChannels: [8, 8, 8, 8, 8], seed: 5 });
    const b = buildNetwork(16, { stageChannels: [8, 8, 8, 8, 8], seed: 5 });
    expect(totalParams(a)).toBe(totalParams(b));
    const ka = a.named[0][1].dataSync();
    const kb = b.named[0][1].dataSync();
    expect(Array.from(ka)).toEqual(Array.from(kb));
  });
});

describe('wasm filter-gradient kernel', () => {
  test('composed gradient matches cpu autodiff (stride 1 and stride 2)', async () => {
    const x = tf.randomNormal([2, 9, 11, 3]) as tf.Tensor4D;
    const w = tf.randomNormal([3, 3, 3, 5]) as tf.Tensor4D;
    const dy = tf.randomNormal([2, 9, 11, 5]) as tf.Tensor4D;
    const composed = conv2dBackpropFilterComposed(x, dy, [3, 3, 3, 5], 1, 'same');
    await tf.setBackend('cpu');
    const auto = tf.grad((wv: tf.Tensor4D) =>
      tf.sum(tf.mul(tf.conv2d(x, wv, 1, 'same'), dy))
    )(w);
    const diff = tf.max(tf.abs(tf.sub(composed, auto))).dataSync()[0];
    await tf.setBackend('wasm');
    expect(diff).toBeLessThan(1e-4);
  });
});

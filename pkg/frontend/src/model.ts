/**
 * U-shaped encoder-decoder for learned cube reconstruction.
 *
 * Five convolution stages per side, two convolutions per stage; every
 * encoder stage ends with 2x2 max pooling and every decoder stage starts
 * with a stride-2 transposed convolution, with five skip concatenations
 * between stages of the same depth.  From the third stage onward (both
 * sides) the second convolution of each stage is a multi-scale residual
 * convolution: the input feature maps are split evenly along the channel
 * axis and sub-feature i is summed with the output of convolution i-1
 * before its own convolution, which uses fewer parameters than one dense
 * convolution at equal channel counts.  The head is a 1x1 convolution with
 * tanh, so outputs live in (-1, 1) and targets are pre-scaled accordingly.
 *
 * Weights are explicit seeded variables and the network is a pure function
 * of (weights, input), which keeps the training loop and checkpoint format
 * free of framework serialization.
 */

import * as tf from '@tensorflow/tfjs';

export interface NetworkSpec {
  inputChannels: number;
  stageChannels: number[];
  res2Splits: number;
  /** 1-based stage index from which the second convolution is multi-scale */
  res2FromStage: number;
  kernelSize: number;
  seed: number;
}

export const DEFAULT_SPEC: Omit<NetworkSpec, 'inputChannels'> = {
  stageChannels: [16, 24, 32, 40, 48],
  res2Splits: 4,
  res2FromStage: 3,
  kernelSize: 3,
  seed: 17
};

export interface ConvWeights {
  kind: 'conv';
  kernel: tf.Variable;
  bias: tf.Variable;
}

export interface Res2Weights {
  kind: 'res2';
  kernels: tf.Variable[];
  biases: tf.Variable[];
  splits: number;
}

export type BlockWeights = ConvWeights | Res2Weights;

export interface Network {
  spec: NetworkSpec;
  weights: Map<string, BlockWeights>;
  named: Array<[string, tf.Variable]>;
  trainable: tf.Variable[];
}

function glorot(shape: number[], seed: number): tf.Tensor {
  const fanIn = shape[0] * shape[1] * shape[2];
  const fanOut = shape[0] * shape[1] * shape[3];
  const limit = Math.sqrt(6 / (fanIn + fanOut));
  return tf.randomUniform(shape, -limit, limit, 'float32', seed);
}

function makeConv(
  name: string,
  inC: number,
  outC: number,
  k: number,
  seed: number,
  weights: Map<string, BlockWeights>
): ConvWeights {
  const w: ConvWeights = {
    kind: 'conv',
    kernel: tf.variable(glorot([k, k, inC, outC], seed), true),
    bias: tf.variable(tf.zeros([outC]), true)
  };
  weights.set(name, w);
  return w;
}

function makeRes2(
  name: string,
  channels: number,
  splits: number,
  k: number,
  seed: number,
  weights: Map<string, BlockWeights>
): Res2Weights {
  if (channels % splits !== 0) {
    throw new Error(
      `res2: ${channels} channels not divisible by ${splits} splits`
    );
  }
  const c = channels / splits;
  const w: Res2Weights = {
    kind: 'res2',
    splits,
    kernels: [],
    biases: []
  };
  for (let i = 0; i < splits; i++) {
    w.kernels.push(
      tf.variable(glorot([k, k, c, c], seed + i), true)
    );
    w.biases.push(tf.variable(tf.zeros([c]), true));
  }
  weights.set(name, w);
  return w;
}

export function paramCount(block: BlockWeights): number {
  if (block.kind === 'conv') {
    return block.kernel.size + block.bias.size;
  }
  return (
    block.kernels.reduce((a, v) => a + v.size, 0) +
    block.biases.reduce((a, v) => a + v.size, 0)
  );
}

/** Trainable parameters of one multi-scale block at equal in/out channels. */
export function res2ParamCount(channels: number, splits: number, k: number): number {
  const c = channels / splits;
  return splits * (k * k * c * c + c);
}

export function plainConvParamCount(channels: number, k: number): number {
  return k * k * channels * channels + channels;
}

export function buildNetwork(
  inputChannels: number,
  overrides: Partial<Omit<NetworkSpec, 'inputChannels'>> = {}
): Network {
  const given = Object.fromEntries(
    Object.entries(overrides).filter(([, v]) => v !== undefined)
  );
  const spec: NetworkSpec = { inputChannels, ...DEFAULT_SPEC, ...given };
  if (spec.stageChannels.length !== 5) {
    throw new Error('expected five encoder stages');
  }
  const weights = new Map<string, BlockWeights>();
  const k = spec.kernelSize;
  let seed = spec.seed;
  const next = () => seed++ * 1009;

  let inC = spec.inputChannels;
  spec.stageChannels.forEach((c, i) => {
    const stage = i + 1;
    makeConv(`enc${stage}/conv1`, inC, c, k, next(), weights);
    if (stage >= spec.res2FromStage) {
      makeRes2(`enc${stage}/conv2`, c, spec.res2Splits, k, next(), weights);
    } else {
      makeConv(`enc${stage}/conv2`, c, c, k, next(), weights);
    }
    inC = c;
  });
  // decoder stages mirror the encoder, deepest first
  for (let stage = 1; stage <= 5; stage++) {
    const level = 5 - stage + 1; // encoder stage providing the skip
    const skipC = spec.stageChannels[level - 1];
    const upC = skipC;
    // transposed-conv kernels are [h, w, outDepth, inDepth]
    const up: ConvWeights = {
      kind: 'conv',
      kernel: tf.variable(glorot([2, 2, upC, inC], next()), true),
      bias: tf.variable(tf.zeros([upC]), true)
    };
    weights.set(`dec${stage}/up`, up);
    makeConv(`dec${stage}/conv1`, upC + skipC, skipC, k, next(), weights);
    if (stage >= spec.res2FromStage) {
      makeRes2(`dec${stage}/conv2`, skipC, spec.res2Splits, k, next(), weights);
    } else {
      makeConv(`dec${stage}/conv2`, skipC, skipC, k, next(), weights);
    }
    inC = skipC;
  }
  makeConv('head', spec.stageChannels[0], spec.inputChannels, 1, next(), weights);

  const named: Array<[string, tf.Variable]> = [];
  for (const [name, block] of weights.entries()) {
    if (block.kind === 'conv') {
      named.push([`${name}/kernel`, block.kernel], [`${name}/bias`, block.bias]);
    } else {
      block.kernels.forEach((v, i) => named.push([`${name}/kernel${i}`, v]));
      block.biases.forEach((v, i) => named.push([`${name}/bias${i}`, v]));
    }
  }
  return { spec, weights, named, trainable: named.map(([, v]) => v) };
}

export function totalParams(net: Network): number {
  let total = 0;
  for (const block of net.weights.values()) total += paramCount(block);
  return total;
}

function applyConv(x: tf.Tensor4D, w: ConvWeights, relu: boolean): tf.Tensor4D {
  let y = tf.conv2d(x, w.kernel as tf.Tensor4D, 1, 'same');
  y = tf.add(y, w.bias);
  return (relu ? tf.relu(y) : y) as tf.Tensor4D;
}

function applyRes2(x: tf.Tensor4D, w: Res2Weights): tf.Tensor4D {
  const parts = tf.split(x, w.splits, 3);
  const outs: tf.Tensor4D[] = [];
  let prev: tf.Tensor4D | null = null;
  for (let i = 0; i < w.splits; i++) {
    // sub-feature i picks up the previous convolution's output, then convolves
    const fed = prev === null ? parts[i] : tf.add(parts[i], prev);
    let y = tf.conv2d(fed as tf.Tensor4D, w.kernels[i] as tf.Tensor4D, 1, 'same');
    y = tf.add(y, w.biases[i]);
    prev = y as tf.Tensor4D;
    outs.push(prev);
  }
  return tf.relu(tf.concat(outs, 3)) as tf.Tensor4D;
}

function applyBlock(x: tf.Tensor4D, w: BlockWeights, relu = true): tf.Tensor4D {
  return w.kind === 'conv' ? applyConv(x, w, relu) : applyRes2(x, w);
}

function padToMultiple(x: tf.Tensor4D, multiple: number): {
  padded: tf.Tensor4D;
  crop: [number, number];
} {
  const [, h, wd] = x.shape;
  const ph = (multiple - (h % multiple)) % multiple;
  const pw = (multiple - (wd % multiple)) % multiple;
  if (ph === 0 && pw === 0) return { padded: x, crop: [h, wd] };
  const padded = tf.pad(x, [
    [0, 0],
    [0, ph],
    [0, pw],
    [0, 0]
  ]) as tf.Tensor4D;
  return { padded, crop: [h, wd] };
}

/** Forward pass on a [batch, x, yshear, lambda] tensor; shape preserving. */
export function forward(net: Network, input: tf.Tensor4D): tf.Tensor4D {
  return tf.tidy(() => {
    const { padded, crop } = padToMultiple(input, 32);
    const get = (name: string) => net.weights.get(name)!;
    const skips: tf.Tensor4D[] = [];
    let x = padded;
    for (let stage = 1; stage <= 5; stage++) {
      x = applyBlock(x, get(`enc${stage}/conv1`));
      x = applyBlock(x, get(`enc${stage}/conv2`));
      skips.push(x);
      x = tf.maxPool(x, 2, 2, 'same');
    }
    for (let stage = 1; stage <= 5; stage++) {
      const up = get(`dec${stage}/up`) as ConvWeights;
      const skip = skips[5 - stage];
      const outShape: [number, number, number, number] = [
        x.shape[0],
        skip.shape[1],
        skip.shape[2],
        up.kernel.shape[2]!
      ];
      let y = tf.conv2dTranspose(x, up.kernel as tf.Tensor4D, outShape, 2, 'same');
      y = tf.relu(tf.add(y, up.bias)) as tf.Tensor4D;
      x = tf.concat([y, skip], 3) as tf.Tensor4D;
      x = applyBlock(x, get(`dec${stage}/conv1`));
      x = applyBlock(x, get(`dec${stage}/conv2`));
    }
    const head = get('head') as ConvWeights;
    let out = applyConv(x, head, false);
    out = tf.tanh(out) as tf.Tensor4D;
    return tf.slice(out, [0, 0, 0, 0], [
      out.shape[0],
      crop[0],
      crop[1],
      out.shape[3]
    ]) as tf.Tensor4D;
  });
}

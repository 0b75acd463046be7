/**
 * Training loop: Adam on the root-mean-square error between predicted and
 * true sheared cubes, learning rate 0.01 halved every 10 epochs, one noise
 * realization of each sample per epoch (cycling the pre-generated
 * realizations).  The best validation checkpoint is kept; a non-finite loss
 * aborts and leaves the last good checkpoint on disk.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { writeArray, readArray } from './container';
import { DatasetManifest, Sample, loadManifest, loadSample, splitEntries } from './dataset';
import { Network, buildNetwork, forward, totalParams } from './model';

export interface TrainOptions {
  epochs: number;
  batchSize: number;
  initialLearningRate: number;
  lrHalvingEpochs: number;
  seed: number;
  stageChannels?: number[];
  res2Splits?: number;
  maxTrainSamples?: number;
  /**
   * Multiplies network inputs; 'auto' matches the training inputs' RMS to
   * the targets' RMS.  The backprojection is several times weaker than the
   * cube it approximates, and rescaling it conditions the early epochs
   * without changing the information content.  Recorded in checkpoints and
   * applied at inference.
   */
  inputGain?: number | 'auto';
  log?: (line: string) => void;
}

export const DEFAULT_TRAIN: TrainOptions = {
  epochs: 30,
  batchSize: 4,
  initialLearningRate: 0.01,
  lrHalvingEpochs: 10,
  seed: 17,
  inputGain: 'auto'
};

function rmsOf(arrays: Float32Array[]): number {
  let ss = 0;
  let n = 0;
  for (const a of arrays) {
    for (let i = 0; i < a.length; i++) ss += a[i] * a[i];
    n += a.length;
  }
  return Math.sqrt(ss / Math.max(n, 1));
}

export interface EpochRecord {
  epoch: number;
  learningRate: number;
  trainRmse: number;
  valRmse: number;
}

function toTensor(
  arrays: Float32Array[],
  shape: [number, number, number]
): tf.Tensor4D {
  const [h, w, c] = shape;
  const batch = arrays.length;
  const buf = new Float32Array(batch * h * w * c);
  arrays.forEach((a, i) => buf.set(a, i * h * w * c));
  return tf.tensor4d(buf, [batch, h, w, c]);
}

export function rmseOf(pred: tf.Tensor, target: tf.Tensor): tf.Scalar {
  return tf.sqrt(tf.mean(tf.square(tf.sub(pred, target)))) as tf.Scalar;
}

export function evaluateRmse(
  net: Network,
  samples: Sample[],
  shape: [number, number, number],
  realization = 0,
  inputGain = 1.0
): { modelRmse: number; baselineRmse: number } {
  let se = 0;
  let seBase = 0;
  let n = 0;
  for (const s of samples) {
    const idx = Math.min(realization, s.inputs.length - 1);
    const { mse, mseBase, count } = tf.tidy(() => {
      const x = toTensor([s.inputs[idx]], shape);
      const t = toTensor([s.target], shape);
      const y = forward(net, tf.mul(x, inputGain) as tf.Tensor4D);
      const mse = tf.mean(tf.square(tf.sub(y, t))).dataSync()[0];
      // the baseline is the stored normalized backprojection itself
      const mseBase = tf.mean(tf.square(tf.sub(x, t))).dataSync()[0];
      return { mse, mseBase, count: t.size };
    });
    se += mse * count;
    seBase += mseBase * count;
    n += count;
  }
  return { modelRmse: Math.sqrt(se / n), baselineRmse: Math.sqrt(seBase / n) };
}

export function saveCheckpoint(
  net: Network,
  manifest: DatasetManifest,
  dir: string,
  extra: Record<string, unknown> = {}
): void {
  fs.mkdirSync(dir, { recursive: true });
  const index: Record<string, { file: string; shape: number[] }> = {};
  let i = 0;
  for (const [name, v] of net.named) {
    const file = `w${String(i).padStart(3, '0')}`;
    writeArray(path.join(dir, file), v.dataSync() as Float32Array, v.shape, {
      contains: 'network-weight',
      name
    });
    index[name] = { file, shape: v.shape.slice() };
    i++;
  }
  const meta = {
    spec: {
      inputChannels: net.spec.inputChannels,
      stageChannels: net.spec.stageChannels,
      res2Splits: net.spec.res2Splits,
      res2FromStage: net.spec.res2FromStage,
      kernelSize: net.spec.kernelSize,
      seed: net.spec.seed
    },
    dataset: {
      targetScale: manifest.targetScale,
      shearedShape: manifest.shearedShape,
      numChannels: manifest.numChannels,
      centerWavelengthNm: manifest.centerWavelengthNm,
      channelSpacingNm: manifest.channelSpacingNm,
      dispersionStep: manifest.dispersionStep
    },
    weights: index,
    ...extra
  };
  fs.writeFileSync(path.join(dir, 'checkpoint.json'), JSON.stringify(meta, null, 2));
}

export function loadCheckpoint(dir: string): {
  net: Network;
  meta: any;
} {
  const meta = JSON.parse(
    fs.readFileSync(path.join(dir, 'checkpoint.json'), 'utf8')
  );
  const net = buildNetwork(meta.spec.inputChannels, {
    stageChannels: meta.spec.stageChannels,
    res2Splits: meta.spec.res2Splits,
    res2FromStage: meta.spec.res2FromStage,
    kernelSize: meta.spec.kernelSize,
    seed: meta.spec.seed
  });
  for (const [name, v] of net.named) {
    const rec = meta.weights[name];
    if (!rec) throw new Error(`checkpoint missing weight ${name}`);
    const arr = readArray(path.join(dir, rec.file));
    v.assign(tf.tensor(Float32Array.from(arr.data), rec.shape as number[]));
  }
  return { net, meta };
}

export async function train(
  datasetDir: string,
  outDir: string,
  options: Partial<TrainOptions> = {}
): Promise<{ history: EpochRecord[]; bestValRmse: number; baselineRmse: number }> {
  const opts: TrainOptions = { ...DEFAULT_TRAIN, ...options };
  const log = opts.log ?? ((line: string) => console.log(line));
  const manifest = loadManifest(datasetDir);
  const shape = manifest.shearedShape;
  const { train: trainEntries, val: valEntries } = splitEntries(manifest);
  const limited = opts.maxTrainSamples
    ? trainEntries.slice(0, opts.maxTrainSamples)
    : trainEntries;
  log(
    `dataset: ${limited.length} train / ${valEntries.length} val, ` +
      `cube ${shape.join('x')}`
  );
  const trainSamples = limited.map((e) => loadSample(manifest, e));
  const valSamples = valEntries.map((e) => loadSample(manifest, e));

  let inputGain = typeof opts.inputGain === 'number' ? opts.inputGain : 1.0;
  if (opts.inputGain === 'auto') {
    const tRms = rmsOf(trainSamples.map((s) => s.target));
    const xRms = rmsOf(trainSamples.map((s) => s.inputs[0]));
    inputGain = xRms > 0 ? tRms / xRms : 1.0;
  }
  log(`input gain: ${inputGain.toFixed(3)}`);

  const net = buildNetwork(manifest.numChannels, {
    stageChannels: opts.stageChannels,
    res2Splits: opts.res2Splits,
    seed: opts.seed
  });
  log(`network: ${totalParams(net)} trainable parameters`);

  fs.mkdirSync(outDir, { recursive: true });
  const history: EpochRecord[] = [];
  let bestVal = Infinity;
  const baseline = evaluateRmse(net, valSamples, shape).baselineRmse;

  // deterministic epoch shuffling
  let rngState = opts.seed >>> 0;
  const nextRand = () => {
    rngState = (rngState * 1664525 + 1013904223) >>> 0;
    return rngState / 2 ** 32;
  };

  for (let epoch = 1; epoch <= opts.epochs; epoch++) {
    const lr =
      opts.initialLearningRate *
      Math.pow(0.5, Math.floor((epoch - 1) / opts.lrHalvingEpochs));
    const optimizer = tf.train.adam(lr);
    const order = trainSamples.map((_, i) => i);
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(nextRand() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let lossSum = 0;
    let batches = 0;
    for (let start = 0; start < order.length; start += opts.batchSize) {
      const idx = order.slice(start, start + opts.batchSize);
      const realization = (epoch - 1) % trainSamples[0].inputs.length;
      const xs = toTensor(
        idx.map((i) => trainSamples[i].inputs[
          Math.min(realization, trainSamples[i].inputs.length - 1)
        ]),
        shape
      );
      const ts = toTensor(idx.map((i) => trainSamples[i].target), shape);
      const lossVal = optimizer.minimize(
        () => rmseOf(forward(net, tf.mul(xs, inputGain) as tf.Tensor4D), ts),
        true,
        net.trainable
      )!;
      const loss = lossVal.dataSync()[0];
      lossVal.dispose();
      xs.dispose();
      ts.dispose();
      if (!Number.isFinite(loss)) {
        optimizer.dispose();
        log(`epoch ${epoch}: non-finite loss, aborting with last checkpoint`);
        writeHistory(outDir, history);
        throw new Error('training diverged (non-finite loss)');
      }
      lossSum += loss;
      batches++;
    }
    optimizer.dispose();
    const val = evaluateRmse(net, valSamples, shape, 0, inputGain).modelRmse;
    history.push({
      epoch,
      learningRate: lr,
      trainRmse: lossSum / Math.max(batches, 1),
      valRmse: val
    });
    log(
      `epoch ${epoch}/${opts.epochs} lr=${lr.toExponential(2)} ` +
        `train_rmse=${(lossSum / batches).toFixed(5)} val_rmse=${val.toFixed(5)} ` +
        `(baseline ${baseline.toFixed(5)})`
    );
    if (val < bestVal) {
      bestVal = val;
      saveCheckpoint(net, manifest, path.join(outDir, 'best'), {
        epoch,
        valRmse: val,
        baselineRmse: baseline,
        inputGain
      });
    }
    writeHistory(outDir, history);
  }
  return { history, bestValRmse: bestVal, baselineRmse: baseline };
}

function writeHistory(outDir: string, history: EpochRecord[]): void {
  const lines = ['epoch,learning_rate,train_rmse,val_rmse'];
  for (const h of history) {
    lines.push(`${h.epoch},${h.learningRate},${h.trainRmse},${h.valRmse}`);
  }
  fs.writeFileSync(path.join(outDir, 'loss_history.csv'), lines.join('\n') + '\n');
}

/**
 * Fine-tuning loop over a pipeline manifest: Adam with a step learning-rate
 * schedule, best-validation-accuracy checkpointing, and a metrics file in
 * the shared schema (plus lr/loss traces and a verbatim config echo).
 */

import { readFileSync } from 'node:fs';
import * as path from 'node:path';

import * as tf from '@tensorflow/tfjs';

import {
  Manifest,
  SampleRecord,
  bySplit,
  readManifest,
  requireCompleteSplit,
  writers,
} from './manifest.js';
import { Metrics, METRICS_VERSION, writeMetrics } from './metrics.js';
import { ModelName, buildModel, freezeBackbone } from './model.js';
import { lrForEpoch, lrTrace } from './schedule.js';
import { decodeGrayPng } from './png.js';

export interface TrainConfig {
  model: ModelName;
  batchSize: number;
  maxEpochs: number;
  learningRate: number;
  lrStep: number;
  lrGamma: number;
  seed: number;
  freezeBackbone: boolean;
  manifestPath: string;
  outMetricsPath: string;
}

export const TRAIN_DEFAULTS = {
  model: 'tiny_test' as ModelName,
  batchSize: 16,
  maxEpochs: 10,
  learningRate: 1e-4,
  lrStep: 7,
  lrGamma: 0.1,
  seed: 0,
  freezeBackbone: false,
};

export function validateConfig(cfg: TrainConfig): void {
  const positive: Array<[string, number]> = [
    ['batchSize', cfg.batchSize],
    ['maxEpochs', cfg.maxEpochs],
    ['learningRate', cfg.learningRate],
    ['lrStep', cfg.lrStep],
    ['lrGamma', cfg.lrGamma],
  ];
  for (const [name, value] of positive) {
    if (!(value > 0)) throw new Error(`${name} must be positive, got ${value}`);
  }
  for (const [name, value] of [['batchSize', cfg.batchSize], ['maxEpochs', cfg.maxEpochs], ['lrStep', cfg.lrStep]] as const) {
    if (!Number.isInteger(value)) throw new Error(`${name} must be an integer, got ${value}`);
  }
}

/** Deterministic PRNG for shuffling (training must be seed-reproducible). */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function shuffled(n: number, rand: () => number): number[] {
  const order = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [order[i], order[j]] = [order[j]!, order[i]!];
  }
  return order;
}

interface LoadedSplit {
  images: Float32Array[]; // normalized to [0,1], row-major
  labels: number[]; // writer index
  size: number; // square side in pixels
}

function loadSplit(records: SampleRecord[], root: string, writerIndex: Map<string, number>): LoadedSplit {
  const images: Float32Array[] = [];
  const labels: number[] = [];
  let size = 0;
  for (const record of records) {
    const file = path.join(root, record.imagePath);
    const png = decodeGrayPng(readFileSync(file), record.imagePath);
    if (png.width !== png.height) {
      throw new Error(`${record.imagePath}: expected a square ROI, got ${png.width}x${png.height}`);
    }
    if (size === 0) size = png.width;
    else if (png.width !== size) {
      throw new Error(`${record.imagePath}: size ${png.width} differs from first sample (${size})`);
    }
    const floats = new Float32Array(png.pixels.length);
    for (let i = 0; i < png.pixels.length; i++) floats[i] = png.pixels[i]! / 255;
    images.push(floats);
    labels.push(writerIndex.get(record.writerId)!);
  }
  return { images, labels, size };
}

function batchTensor(split: LoadedSplit, indices: number[]): tf.Tensor4D {
  const side = split.size;
  const data = new Float32Array(indices.length * side * side);
  indices.forEach((idx, i) => data.set(split.images[idx]!, i * side * side));
  return tf.tensor4d(data, [indices.length, side, side, 1]);
}

/** Predicted class scores for every sample of a split, batched. */
function predictScores(model: tf.LayersModel, split: LoadedSplit, batchSize: number): number[][] {
  const scores: number[][] = [];
  for (let start = 0; start < split.images.length; start += batchSize) {
    const indices = Array.from(
      { length: Math.min(batchSize, split.images.length - start) },
      (_, i) => start + i,
    );
    const rows = tf.tidy(() => {
      const out = model.predict(batchTensor(split, indices)) as tf.Tensor2D;
      return out.arraySync();
    });
    scores.push(...rows);
  }
  return scores;
}

function accuracy(scores: number[][], labels: number[]): number {
  if (labels.length === 0) return 0;
  let hits = 0;
  for (let i = 0; i < labels.length; i++) {
    const row = scores[i]!;
    let best = 0;
    for (let k = 1; k < row.length; k++) if (row[k]! > row[best]!) best = k;
    if (best === labels[i]) hits++;
  }
  return hits / labels.length;
}

/** Rank-k identification rates over the test split; ties broken by writer
 * index so the curve is deterministic. */
function cmcCurve(scores: number[][], labels: number[], writerCount: number): number[] {
  const cumulative = new Array<number>(writerCount).fill(0);
  for (let i = 0; i < labels.length; i++) {
    const row = scores[i]!;
    const order = Array.from({ length: writerCount }, (_, k) => k).sort(
      (a, b) => row[b]! - row[a]! || a - b,
    );
    const rank = order.indexOf(labels[i]!);
    for (let k = rank; k < writerCount; k++) cumulative[k]!++;
  }
  return cumulative.map((c) => (labels.length > 0 ? c / labels.length : 1));
}

export function augmentationMode(manifest: Manifest): Metrics['augmentation_mode'] {
  const kinds = new Set(manifest.records.map((r) => r.augmentation.split(':')[0]!));
  kinds.delete('original');
  if (kinds.size === 0) return 'none';
  const key = [...kinds].sort().join('+');
  if (key === 'noised+stretched+thinned') return 'all';
  if (key === 'thinned') return 'thickness-only';
  if (key === 'noised') return 'noise-only';
  if (key === 'stretched') return 'stretch-only';
  return 'mixed';
}

export interface TrainResult {
  metrics: Metrics;
  lossTrace: number[];
}

export async function train(cfg: TrainConfig): Promise<TrainResult> {
  validateConfig(cfg);
  const manifest = readManifest(cfg.manifestPath);
  requireCompleteSplit(manifest);
  const writerIds = writers(manifest);
  const writerIndex = new Map(writerIds.map((w, i) => [w, i]));
  const root = path.dirname(cfg.manifestPath);

  const trainSplit = loadSplit(bySplit(manifest, 'train'), root, writerIndex);
  const valSplit = loadSplit(bySplit(manifest, 'val'), root, writerIndex);
  const testSplit = loadSplit(bySplit(manifest, 'test'), root, writerIndex);
  if (trainSplit.images.length === 0) throw new Error('train split is empty');

  const built = buildModel(cfg.model, writerIds.length, trainSplit.size, cfg.seed);
  if (cfg.freezeBackbone) freezeBackbone(built);
  const optimizer = tf.train.adam(cfg.learningRate);
  built.model.compile({ optimizer, loss: 'sparseCategoricalCrossentropy' });

  const rand = mulberry32(cfg.seed + 0x9e3779b9);
  const lossTrace: number[] = [];
  let bestValAcc = -1;
  let bestWeights: tf.Tensor[] | null = null;

  for (let epoch = 1; epoch <= cfg.maxEpochs; epoch++) {
    // The typings mark learningRate protected, but at runtime it is a plain
    // mutable field; updating it in place steps the rate without resetting
    // Adam's moment estimates.
    (optimizer as unknown as { learningRate: number }).learningRate = lrForEpoch(epoch, cfg);
    const order = shuffled(trainSplit.images.length, rand);
    let lossSum = 0;
    let batches = 0;
    for (let start = 0; start < order.length; start += cfg.batchSize) {
      const indices = order.slice(start, start + cfg.batchSize);
      const x = batchTensor(trainSplit, indices);
      // sparseCategoricalCrossentropy floors the target itself and requires
      // a float tensor; int32 labels are rejected.
      const y = tf.tensor1d(indices.map((i) => trainSplit.labels[i]!), 'float32');
      const loss = (await built.model.trainOnBatch(x, y)) as number;
      x.dispose();
      y.dispose();
      lossSum += loss;
      batches++;
    }
    lossTrace.push(lossSum / batches);

    const valAcc = accuracy(predictScores(built.model, valSplit, cfg.batchSize), valSplit.labels);
    if (valAcc > bestValAcc) {
      bestValAcc = valAcc;
      if (bestWeights) bestWeights.forEach((t) => t.dispose());
      bestWeights = built.model.getWeights().map((t) => t.clone());
    }
  }
  if (bestWeights) built.model.setWeights(bestWeights);

  const trainScores = predictScores(built.model, trainSplit, cfg.batchSize);
  const valScores = predictScores(built.model, valSplit, cfg.batchSize);
  const testScores = predictScores(built.model, testSplit, cfg.batchSize);

  const metrics: Metrics = {
    metrics_version: METRICS_VERSION,
    model_name: cfg.model,
    augmentation_mode: augmentationMode(manifest),
    train_acc: accuracy(trainScores, trainSplit.labels),
    val_acc: accuracy(valScores, valSplit.labels),
    test_acc: accuracy(testScores, testSplit.labels),
    writer_count: writerIds.length,
    sample_counts: {
      train: trainSplit.images.length,
      val: valSplit.images.length,
      test: testSplit.images.length,
    },
    cmc: cmcCurve(testScores, testSplit.labels, writerIds.length),
    lr_trace: lrTrace(cfg),
    loss_trace: lossTrace,
    config: {
      model: cfg.model,
      batch_size: cfg.batchSize,
      max_epochs: cfg.maxEpochs,
      learning_rate: cfg.learningRate,
      lr_step: cfg.lrStep,
      lr_gamma: cfg.lrGamma,
      seed: cfg.seed,
      freeze_backbone: cfg.freezeBackbone,
      manifest_path: cfg.manifestPath,
      out_metrics_path: cfg.outMetricsPath,
    },
    notes: 'inputs scaled to [0,1] grayscale; no per-channel mean/std normalization',
  };
  writeMetrics(metrics, cfg.outMetricsPath);

  if (bestWeights) bestWeights.forEach((t) => t.dispose());
  built.model.dispose();
  return { metrics, lossTrace };
}

/**
 * Model construction: a pretrained backbone with its final classification
 * layer replaced by a fresh head sized to the writer count.
 *
 * Only `tiny_test` ships weights offline: its "pretrained checkpoint" is a
 * small convnet initialized from fixed seeds, so CI can verify the head
 * swap (backbone bytes identical to the checkpoint, head dimension = writer
 * count) without downloading anything. The full-size backbones need their
 * published checkpoints on disk and are rejected when absent.
 */

import { createHash } from 'node:crypto';

import * as tf from '@tensorflow/tfjs';

export const MODEL_NAMES = ['resnet50', 'mobilenet_v2', 'efficientnet_b7', 'tiny_test'] as const;
export type ModelName = (typeof MODEL_NAMES)[number];

export class ModelUnavailableError extends Error {}

/** Fixed seeds defining the tiny_test checkpoint: same seeds, same bytes. */
const TINY_TEST_SEEDS = { conv1: 41, conv2: 43 };
const HEAD_LAYER_NAME = 'writer_head';

export interface BuiltModel {
  model: tf.LayersModel;
  /** Names of the layers whose weights came from the checkpoint. */
  backboneLayers: string[];
}

export function buildModel(
  name: ModelName,
  writerCount: number,
  inputSize: number,
  headSeed = 0,
): BuiltModel {
  if (!MODEL_NAMES.includes(name)) {
    throw new Error(`unknown model '${name}'; expected one of ${MODEL_NAMES.join(', ')}`);
  }
  if (writerCount < 2) {
    throw new Error(`writer count must be >= 2 for identification, got ${writerCount}`);
  }
  if (name !== 'tiny_test') {
    throw new ModelUnavailableError(
      `pretrained weights for '${name}' are not bundled; only tiny_test runs offline`,
    );
  }
  return buildTinyTest(writerCount, inputSize, headSeed);
}

function buildTinyTest(writerCount: number, inputSize: number, headSeed: number): BuiltModel {
  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      name: 'tiny_conv1',
      inputShape: [inputSize, inputSize, 1],
      kernelSize: 5,
      strides: 4,
      filters: 8,
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: TINY_TEST_SEEDS.conv1 }),
      biasInitializer: 'zeros',
    }),
  );
  model.add(tf.layers.maxPooling2d({ name: 'tiny_pool1', poolSize: 2, strides: 2 }));
  model.add(
    tf.layers.conv2d({
      name: 'tiny_conv2',
      kernelSize: 3,
      strides: 2,
      filters: 16,
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: TINY_TEST_SEEDS.conv2 }),
      biasInitializer: 'zeros',
    }),
  );
  model.add(tf.layers.globalAveragePooling2d({ name: 'tiny_gap' }));
  model.add(
    tf.layers.dense({
      name: HEAD_LAYER_NAME,
      units: writerCount,
      activation: 'softmax',
      kernelInitializer: tf.initializers.glorotUniform({ seed: headSeed + 101 }),
      biasInitializer: 'zeros',
    }),
  );
  return { model, backboneLayers: ['tiny_conv1', 'tiny_conv2'] };
}

/** sha256 over the backbone layers' weight bytes, in layer order. */
export function backboneWeightsHash(built: BuiltModel): string {
  const hash = createHash('sha256');
  for (const layerName of built.backboneLayers) {
    const layer = built.model.getLayer(layerName);
    for (const weight of layer.getWeights()) {
      const values = weight.dataSync() as Float32Array;
      hash.update(Buffer.from(values.buffer, values.byteOffset, values.byteLength));
    }
  }
  return hash.digest('hex');
}

/** The checkpoint hash the backbone must match at initialization. */
export function tinyTestCheckpointHash(inputSize: number): string {
  const reference = buildTinyTest(2, inputSize, 0);
  const digest = backboneWeightsHash(reference);
  reference.model.dispose();
  return digest;
}

export function headOutputDim(built: BuiltModel): number {
  const shape = built.model.outputs[0]!.shape;
  return shape[shape.length - 1] as number;
}

export function freezeBackbone(built: BuiltModel): void {
  for (const name of built.backboneLayers) {
    built.model.getLayer(name).trainable = false;
  }
}

/**
 * The shallow 4-conv CNN and its first-layer initialization modes.
 *
 * Stack: conv(32)-conv(64)-pool-conv(128)-conv(128)-pool-dense(128)-dense,
 * every conv 3x3 with ReLU. The first layer is either Kaiming-initialized
 * (baseline) or loaded from a packed-subspace kernel export, optionally
 * frozen or Kaiming-rescaled.
 */

import * as tf from "@tensorflow/tfjs";

import { kaimingFactor, KernelTensor, toConvWeights } from "./codebook.js";

export type InitMode =
  | "baseline"
  | "grassmannian"
  | "grassmannian-frozen"
  | "grassmannian-kaiming";

export const INIT_MODES: InitMode[] = [
  "baseline",
  "grassmannian",
  "grassmannian-frozen",
  "grassmannian-kaiming",
];

export class ShapeMismatch extends Error {
  override name = "ShapeMismatch";
}

export interface ModelSpec {
  height: number;
  width: number;
  channels: number;
  classes: number;
  initMode: InitMode;
  /** Raw kernel export; required for the grassmannian modes. */
  kernels?: KernelTensor;
  seed: number;
  weightDecay?: number;
  firstLayerFilters?: number;
}

function scaledKernels(tensor: KernelTensor, factor: number): KernelTensor {
  if (factor === 1.0) return tensor;
  const values = new Float64Array(tensor.values.length);
  for (let i = 0; i < values.length; i++) values[i] = tensor.values[i] * factor;
  return { ...tensor, values };
}

export function buildModel(spec: ModelSpec): tf.Sequential {
  const filters = spec.firstLayerFilters ?? 32;
  const decay = spec.weightDecay ?? 0;
  // L2 at decay/2 reproduces plain weight decay for SGD.
  const regularizer = decay > 0 ? tf.regularizers.l2({ l2: decay / 2 }) : undefined;
  const init = (offset: number) => tf.initializers.heNormal({ seed: spec.seed + offset });

  let kernels: KernelTensor | undefined;
  if (spec.initMode !== "baseline") {
    if (!spec.kernels) {
      throw new ShapeMismatch(`${spec.initMode} needs a kernel export`);
    }
    kernels = spec.kernels;
    if (
      kernels.outChannels !== filters ||
      kernels.inChannels !== spec.channels ||
      kernels.height !== 3 ||
      kernels.width !== 3
    ) {
      throw new ShapeMismatch(
        `kernel export ${kernels.outChannels}x${kernels.inChannels}x` +
          `${kernels.height}x${kernels.width} does not fit first layer ` +
          `${filters}x${spec.channels}x3x3`,
      );
    }
    if (spec.initMode === "grassmannian-kaiming") {
      kernels = scaledKernels(kernels, kaimingFactor(kernels.inChannels, 3, 3));
    }
  }

  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      inputShape: [spec.height, spec.width, spec.channels],
      filters,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: init(1),
      kernelRegularizer: regularizer,
      name: "conv1",
    }),
  );
  model.add(
    tf.layers.conv2d({
      filters: 64,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: init(2),
      kernelRegularizer: regularizer,
      name: "conv2",
    }),
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(
    tf.layers.conv2d({
      filters: 128,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: init(3),
      kernelRegularizer: regularizer,
      name: "conv3",
    }),
  );
  model.add(
    tf.layers.conv2d({
      filters: 128,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: init(4),
      kernelRegularizer: regularizer,
      name: "conv4",
    }),
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(tf.layers.flatten());
  model.add(
    tf.layers.dense({
      units: 128,
      activation: "relu",
      kernelInitializer: init(5),
      kernelRegularizer: regularizer,
    }),
  );
  model.add(
    tf.layers.dense({
      units: spec.classes,
      activation: "softmax",
      kernelInitializer: init(6),
      kernelRegularizer: regularizer,
    }),
  );

  if (kernels) {
    const conv1 = model.getLayer("conv1");
    const { shape, values } = toConvWeights(kernels);
    conv1.setWeights([tf.tensor4d(values, shape), tf.zeros([filters])]);
    if (spec.initMode === "grassmannian-frozen") {
      conv1.trainable = false;
    }
  }
  return model;
}

/** Float32 snapshot of the first-layer kernel in layer (HWIO) order. */
export function firstLayerSnapshot(model: tf.LayersModel): Float32Array {
  const kernel = model.getLayer("conv1").getWeights()[0];
  return new Float32Array(kernel.dataSync());
}

export interface KernelStatRow {
  index: number;
  mean: number;
  variance: number;
  norm: number;
  isSparse: boolean;
}

/**
 * Per-kernel mean / population variance / Frobenius norm of the first
 * layer, with the same relative sparsity cutoff the stats tool uses
 * (1e-2 times the median norm).
 */
export function firstLayerStats(model: tf.LayersModel): KernelStatRow[] {
  const kernel = model.getLayer("conv1").getWeights()[0];
  const [h, w, inC, outC] = kernel.shape as [number, number, number, number];
  const data = kernel.dataSync();
  const rows: KernelStatRow[] = [];
  const norms: number[] = [];
  for (let o = 0; o < outC; o++) {
    let sum = 0;
    let sumSq = 0;
    const count = h * w * inC;
    for (let p = 0; p < count; p++) {
      const v = data[p * outC + o];
      sum += v;
      sumSq += v * v;
    }
    const mean = sum / count;
    const variance = sumSq / count - mean * mean;
    const norm = Math.sqrt(sumSq);
    norms.push(norm);
    rows.push({ index: o, mean, variance, norm, isSparse: false });
  }
  const sorted = [...norms].sort((a, b) => a - b);
  const mid = sorted.length >> 1;
  const median =
    sorted.length % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
  const threshold = 1e-2 * median;
  for (const row of rows) row.isSparse = row.norm <= threshold;
  return rows;
}

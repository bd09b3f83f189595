/**
 * ResNet18 with a swappable 7x7 stem: the optional deep configuration.
 * The stem (64 filters, stride 2) loads a 64-packing kernel export of
 * 7x7x3 bases under the same init modes as the shallow model. Training
 * it to paper scale is hours of compute; this exists so the deep config
 * is runnable, not as an acceptance target.
 */

import * as tf from "@tensorflow/tfjs";

import { kaimingFactor, KernelTensor, toConvWeights } from "./codebook.js";
import { InitMode, ShapeMismatch } from "./model.js";

export interface ResNetSpec {
  imageSize: number;
  channels: number;
  classes: number;
  initMode: InitMode;
  /** Raw 64x{channels}x7x7 kernel export for the stem. */
  kernels?: KernelTensor;
  seed: number;
  weightDecay?: number;
}

function basicBlock(
  x: tf.SymbolicTensor,
  filters: number,
  stride: number,
  seed: number,
  regularizer: ReturnType<typeof tf.regularizers.l2> | undefined,
  tag: string,
): tf.SymbolicTensor {
  const init = (offset: number) => tf.initializers.heNormal({ seed: seed + offset });
  let out = tf.layers
    .conv2d({
      filters,
      kernelSize: 3,
      strides: stride,
      padding: "same",
      useBias: false,
      kernelInitializer: init(1),
      kernelRegularizer: regularizer,
      name: `${tag}_conv_a`,
    })
    .apply(x) as tf.SymbolicTensor;
  out = tf.layers.batchNormalization({ name: `${tag}_bn_a` }).apply(out) as tf.SymbolicTensor;
  out = tf.layers.reLU().apply(out) as tf.SymbolicTensor;
  out = tf.layers
    .conv2d({
      filters,
      kernelSize: 3,
      strides: 1,
      padding: "same",
      useBias: false,
      kernelInitializer: init(2),
      kernelRegularizer: regularizer,
      name: `${tag}_conv_b`,
    })
    .apply(out) as tf.SymbolicTensor;
  out = tf.layers.batchNormalization({ name: `${tag}_bn_b` }).apply(out) as tf.SymbolicTensor;

  let shortcut = x;
  if (stride !== 1 || (x.shape[3] as number) !== filters) {
    shortcut = tf.layers
      .conv2d({
        filters,
        kernelSize: 1,
        strides: stride,
        useBias: false,
        kernelInitializer: init(3),
        kernelRegularizer: regularizer,
        name: `${tag}_proj`,
      })
      .apply(x) as tf.SymbolicTensor;
    shortcut = tf.layers
      .batchNormalization({ name: `${tag}_bn_proj` })
      .apply(shortcut) as tf.SymbolicTensor;
  }
  const added = tf.layers.add().apply([out, shortcut]) as tf.SymbolicTensor;
  return tf.layers.reLU().apply(added) as tf.SymbolicTensor;
}

export function buildResNet18(spec: ResNetSpec): tf.LayersModel {
  const decay = spec.weightDecay ?? 0;
  const regularizer = decay > 0 ? tf.regularizers.l2({ l2: decay / 2 }) : undefined;

  let kernels: KernelTensor | undefined;
  if (spec.initMode !== "baseline") {
    if (!spec.kernels) throw new ShapeMismatch(`${spec.initMode} needs a kernel export`);
    kernels = spec.kernels;
    if (
      kernels.outChannels !== 64 ||
      kernels.inChannels !== spec.channels ||
      kernels.height !== 7 ||
      kernels.width !== 7
    ) {
      throw new ShapeMismatch(
        `stem export ${kernels.outChannels}x${kernels.inChannels}x` +
          `${kernels.height}x${kernels.width} does not fit 64x${spec.channels}x7x7`,
      );
    }
    if (spec.initMode === "grassmannian-kaiming") {
      const factor = kaimingFactor(kernels.inChannels, 7, 7);
      const values = new Float64Array(kernels.values.length);
      for (let i = 0; i < values.length; i++) values[i] = kernels.values[i] * factor;
      kernels = { ...kernels, values };
    }
  }

  const input = tf.input({ shape: [spec.imageSize, spec.imageSize, spec.channels] });
  let x = tf.layers
    .conv2d({
      filters: 64,
      kernelSize: 7,
      strides: 2,
      padding: "same",
      useBias: false,
      kernelInitializer: tf.initializers.heNormal({ seed: spec.seed }),
      kernelRegularizer: regularizer,
      name: "conv1",
    })
    .apply(input) as tf.SymbolicTensor;
  x = tf.layers.batchNormalization({ name: "bn1" }).apply(x) as tf.SymbolicTensor;
  x = tf.layers.reLU().apply(x) as tf.SymbolicTensor;
  x = tf.layers
    .maxPooling2d({ poolSize: 3, strides: 2, padding: "same" })
    .apply(x) as tf.SymbolicTensor;

  const plan: [number, number][] = [
    [64, 1], [64, 1],
    [128, 2], [128, 1],
    [256, 2], [256, 1],
    [512, 2], [512, 1],
  ];
  plan.forEach(([filters, stride], i) => {
    x = basicBlock(x, filters, stride, spec.seed + 10 * (i + 1), regularizer, `block${i}`);
  });
  x = tf.layers.globalAveragePooling2d({}).apply(x) as tf.SymbolicTensor;
  const output = tf.layers
    .dense({
      units: spec.classes,
      activation: "softmax",
      kernelInitializer: tf.initializers.heNormal({ seed: spec.seed + 99 }),
      kernelRegularizer: regularizer,
    })
    .apply(x) as tf.SymbolicTensor;

  const model = tf.model({ inputs: input, outputs: output });
  if (kernels) {
    const conv1 = model.getLayer("conv1");
    const { shape, values } = toConvWeights(kernels);
    conv1.setWeights([tf.tensor4d(values, shape)]);
    if (spec.initMode === "grassmannian-frozen") {
      conv1.trainable = false;
    }
  }
  return model;
}

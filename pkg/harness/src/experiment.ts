/**
 * Single training runs: load data, build the model per init mode, train,
 * and record first-epoch/final accuracy plus per-epoch kernel stats.
 */

import { appendFileSync, existsSync, mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { createRequire } from "node:module";

import * as tf from "@tensorflow/tfjs";

import { kernelsFromCodebook, readCodebook, KernelTensor } from "./codebook.js";
import { Dataset, DatasetName, loadDataset, LoadOptions } from "./data.js";
import {
  buildModel,
  firstLayerSnapshot,
  firstLayerStats,
  InitMode,
  KernelStatRow,
  ShapeMismatch,
} from "./model.js";
import { buildResNet18 } from "./resnet.js";
import { patchConvKernelsForWasm } from "./wasmPatch.js";

export type OptimizerName = "sgd" | "adam" | "adadelta";

export type ModelKind = "shallow" | "resnet18";

export interface ExperimentConfig {
  dataset: DatasetName;
  initMode: InitMode;
  /** "shallow" (default, the 4-conv CNN) or the optional "resnet18". */
  model?: ModelKind;
  optimizer: OptimizerName;
  weightDecay: number;
  seed: number;
  epochs: number;
  batchSize: number;
  /** Required unless initMode is "baseline". */
  codebookPath?: string;
  dataDir?: string;
  limitTrain?: number;
  limitTest?: number;
  syntheticSize?: number;
  syntheticChannels?: number;
  backend?: "wasm" | "cpu";
  /** Ledger CSV to append the run row to. */
  ledgerPath?: string;
  /** Per-epoch kernel-stat CSV (epoch column + the stats tool's schema). */
  statsPath?: string;
  quiet?: boolean;
}

export interface RunResult {
  firstEpochAccuracy: number;
  finalAccuracy: number;
  wallClockSeconds: number;
  perEpochStats: KernelStatRow[][];
}

let activeBackend: string | null = null;

/** Prefer the wasm backend (XNNPACK-backed); fall back to plain cpu. */
export async function ensureBackend(requested?: "wasm" | "cpu"): Promise<string> {
  const want = requested ?? "wasm";
  if (activeBackend === want) return activeBackend;
  if (want === "wasm") {
    try {
      const wasm = await import("@tensorflow/tfjs-backend-wasm");
      const require = createRequire(import.meta.url);
      const wasmDir = dirname(require.resolve("@tensorflow/tfjs-backend-wasm")) + "/";
      wasm.setWasmPaths(wasmDir);
      await tf.setBackend("wasm");
      await tf.ready();
      patchConvKernelsForWasm();
      activeBackend = "wasm";
      return activeBackend;
    } catch {
      // fall through to cpu
    }
  }
  await tf.setBackend("cpu");
  await tf.ready();
  activeBackend = "cpu";
  return activeBackend;
}

function optimizerFor(name: OptimizerName): tf.Optimizer {
  switch (name) {
    case "sgd":
      return tf.train.momentum(0.01, 0.9);
    case "adam":
      return tf.train.adam(0.001);
    case "adadelta":
      // classical Adadelta runs at unit learning rate
      return tf.train.adadelta(1.0);
  }
}

export function loadFirstLayerKernels(
  codebookPath: string,
  channels: number,
  kernelSize = 3,
): KernelTensor {
  const codebook = readCodebook(codebookPath);
  const { m, k } = codebook.manifest;
  if (m !== kernelSize * kernelSize) {
    throw new ShapeMismatch(
      `first layer is ${kernelSize}x${kernelSize} (m=${kernelSize * kernelSize}); ` +
        `codebook has m=${m}`,
    );
  }
  if (k !== channels) {
    throw new ShapeMismatch(
      `codebook k=${k} does not match dataset channel count ${channels}`,
    );
  }
  return kernelsFromCodebook(codebook, kernelSize, kernelSize, "raw");
}

function standardize(x: Float32Array): { mean: number; std: number } {
  let sum = 0;
  for (let i = 0; i < x.length; i++) sum += x[i];
  const mean = sum / x.length;
  let sq = 0;
  for (let i = 0; i < x.length; i++) {
    const d = x[i] - mean;
    sq += d * d;
  }
  return { mean, std: Math.sqrt(sq / x.length) || 1 };
}

function toTensors(data: Dataset, mean: number, std: number) {
  const shape: [number, number, number, number] = [
    data.trainCount,
    data.height,
    data.width,
    data.channels,
  ];
  const trainX = tf.tidy(() =>
    tf.tensor4d(data.trainX, shape).sub(mean).div(std),
  );
  const testX = tf.tidy(() =>
    tf
      .tensor4d(data.testX, [data.testCount, data.height, data.width, data.channels])
      .sub(mean)
      .div(std),
  );
  const trainY = tf.oneHot(tf.tensor1d(data.trainY, "int32"), data.classes);
  const testY = tf.oneHot(tf.tensor1d(data.testY, "int32"), data.classes);
  return { trainX, trainY, testX, testY };
}

const LEDGER_HEADER =
  "dataset,init_mode,optimizer,weight_decay,seed,epochs,batch_size," +
  "first_epoch_accuracy,final_accuracy,wall_clock_seconds,status";

export function appendLedgerRow(path: string, fields: (string | number)[]): void {
  mkdirSync(dirname(path) || ".", { recursive: true });
  if (!existsSync(path)) writeFileSync(path, LEDGER_HEADER + "\n");
  appendFileSync(path, fields.join(",") + "\n");
}

function writeStatsCsv(path: string, perEpoch: KernelStatRow[][]): void {
  mkdirSync(dirname(path) || ".", { recursive: true });
  const lines = ["epoch,index,mean,variance,norm,is_sparse"];
  perEpoch.forEach((rows, epoch) => {
    for (const r of rows) {
      lines.push(
        `${epoch + 1},${r.index},${r.mean},${r.variance},${r.norm},${r.isSparse ? 1 : 0}`,
      );
    }
  });
  writeFileSync(path, lines.join("\n") + "\n");
}

export async function runExperiment(config: ExperimentConfig): Promise<RunResult> {
  const started = Date.now();
  await ensureBackend(config.backend);
  const loadOptions: LoadOptions = {
    dataDir: config.dataDir,
    limitTrain: config.limitTrain,
    limitTest: config.limitTest,
    syntheticSize: config.syntheticSize,
    syntheticChannels: config.syntheticChannels,
  };
  const data = await loadDataset(config.dataset, config.seed, loadOptions);

  const modelKind: ModelKind = config.model ?? "shallow";
  let kernels: KernelTensor | undefined;
  if (config.initMode !== "baseline") {
    if (!config.codebookPath) {
      throw new ShapeMismatch(`${config.initMode} requires --codebook`);
    }
    const stemSize = modelKind === "resnet18" ? 7 : 3;
    kernels = loadFirstLayerKernels(config.codebookPath, data.channels, stemSize);
  }

  const model =
    modelKind === "resnet18"
      ? buildResNet18({
          imageSize: data.height,
          channels: data.channels,
          classes: data.classes,
          initMode: config.initMode,
          kernels,
          seed: config.seed,
          weightDecay: config.weightDecay,
        })
      : buildModel({
          height: data.height,
          width: data.width,
          channels: data.channels,
          classes: data.classes,
          initMode: config.initMode,
          kernels,
          seed: config.seed,
          weightDecay: config.weightDecay,
        });
  model.compile({
    optimizer: optimizerFor(config.optimizer),
    loss: "categoricalCrossentropy",
    metrics: ["accuracy"],
  });

  const { mean, std } = standardize(data.trainX);
  const { trainX, trainY, testX, testY } = toTensors(data, mean, std);

  const epochAccuracies: number[] = [];
  const perEpochStats: KernelStatRow[][] = [];
  try {
    for (let epoch = 0; epoch < config.epochs; epoch++) {
      await model.fit(trainX, trainY, {
        epochs: 1,
        batchSize: config.batchSize,
        shuffle: false, // the dataset is pre-shuffled deterministically
        verbose: 0,
      });
      const [, accTensor] = model.evaluate(testX, testY, {
        batchSize: Math.max(config.batchSize, 256),
      }) as tf.Scalar[];
      const accuracy = 100 * (await accTensor.data())[0];
      epochAccuracies.push(accuracy);
      perEpochStats.push(firstLayerStats(model));
      if (!config.quiet) {
        console.log(
          `[${config.dataset} ${config.initMode} ${config.optimizer} ` +
            `seed=${config.seed}] epoch ${epoch + 1}/${config.epochs} ` +
            `test accuracy ${accuracy.toFixed(2)}%`,
        );
      }
    }
  } finally {
    tf.dispose([trainX, trainY, testX, testY]);
  }

  const result: RunResult = {
    firstEpochAccuracy: epochAccuracies[0],
    finalAccuracy: epochAccuracies[epochAccuracies.length - 1],
    wallClockSeconds: (Date.now() - started) / 1000,
    perEpochStats,
  };
  if (config.statsPath) writeStatsCsv(config.statsPath, perEpochStats);
  if (config.ledgerPath) {
    appendLedgerRow(config.ledgerPath, [
      config.dataset,
      config.initMode,
      config.optimizer,
      config.weightDecay,
      config.seed,
      config.epochs,
      config.batchSize,
      result.firstEpochAccuracy.toFixed(4),
      result.finalAccuracy.toFixed(4),
      result.wallClockSeconds.toFixed(2),
      "ok",
    ]);
  }
  return result;
}

export { firstLayerSnapshot };

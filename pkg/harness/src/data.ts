/**
 * Dataset loading. Four real datasets (MNIST, KMNIST, CIFAR10, CIFAR100)
 * plus a procedural "synthetic" set for offline contract tests.
 *
 * MNIST resolves, in order: canonical IDX files in the data directory
 * (full 60k/10k split), then the npm-bundled 10k-digit subset (split
 * 8k/2k deterministically). KMNIST and the CIFAR pairs need their
 * canonical files in the data directory; `fetchDataset` can download
 * them where the network allows, otherwise loading throws
 * DatasetUnavailable with the expected paths.
 */

import { existsSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { gunzipSync } from "node:zlib";

import { gaussian, mulberry32, shuffleInPlace } from "./rng.js";

export type DatasetName = "mnist" | "kmnist" | "cifar10" | "cifar100" | "synthetic";

export interface Dataset {
  name: DatasetName;
  channels: number;
  height: number;
  width: number;
  classes: number;
  /** trainX/testX are NHWC float32 in [0, 1] (normalized later by the model). */
  trainX: Float32Array;
  trainY: Int32Array;
  testX: Float32Array;
  testY: Int32Array;
  trainCount: number;
  testCount: number;
}

export class DatasetUnavailable extends Error {
  override name = "DatasetUnavailable";
}

export interface LoadOptions {
  dataDir?: string;
  /** Caps applied after the deterministic shuffle; 0 means no cap. */
  limitTrain?: number;
  limitTest?: number;
  /** Synthetic set geometry. */
  syntheticSize?: number;
  syntheticChannels?: number;
  syntheticTrain?: number;
  syntheticTest?: number;
}

const DEFAULT_DATA_DIR = process.env.GRASSPACK_DATA ?? "data";

// ---------------------------------------------------------------------------
// IDX (MNIST/KMNIST) and CIFAR binary parsing
// ---------------------------------------------------------------------------

function maybeGunzip(data: Buffer): Buffer {
  return data.length > 2 && data[0] === 0x1f && data[1] === 0x8b ? gunzipSync(data) : data;
}

function readIdxImages(path: string): { count: number; rows: number; cols: number; pixels: Uint8Array } {
  const data = maybeGunzip(readFileSync(path));
  if (data.readUInt32BE(0) !== 2051) throw new DatasetUnavailable(`${path}: not an IDX image file`);
  const count = data.readUInt32BE(4);
  const rows = data.readUInt32BE(8);
  const cols = data.readUInt32BE(12);
  return { count, rows, cols, pixels: new Uint8Array(data.buffer, data.byteOffset + 16, count * rows * cols) };
}

function readIdxLabels(path: string): Uint8Array {
  const data = maybeGunzip(readFileSync(path));
  if (data.readUInt32BE(0) !== 2049) throw new DatasetUnavailable(`${path}: not an IDX label file`);
  const count = data.readUInt32BE(4);
  return new Uint8Array(data.buffer, data.byteOffset + 8, count);
}

interface Example {
  label: number;
  pixels: Float32Array; // HWC
}

function idxExamples(imagePath: string, labelPath: string): Example[] {
  const { count, rows, cols, pixels } = readIdxImages(imagePath);
  const labels = readIdxLabels(labelPath);
  const out: Example[] = [];
  for (let i = 0; i < count; i++) {
    const img = new Float32Array(rows * cols);
    for (let p = 0; p < rows * cols; p++) img[p] = pixels[i * rows * cols + p] / 255;
    out.push({ label: labels[i], pixels: img });
  }
  return out;
}

/** CIFAR binary rows: 1 (or 2 for cifar100) label bytes + 3072 CHW pixels. */
function cifarExamples(path: string, labelBytes: number): Example[] {
  const data = maybeGunzip(readFileSync(path));
  const rowLen = labelBytes + 3072;
  if (data.length % rowLen !== 0) {
    throw new DatasetUnavailable(`${path}: not a CIFAR binary batch`);
  }
  const out: Example[] = [];
  for (let i = 0; i < data.length / rowLen; i++) {
    const base = i * rowLen;
    const label = data[base + labelBytes - 1]; // fine label for cifar100
    const img = new Float32Array(3072);
    // stored channel-major; convert to HWC
    for (let c = 0; c < 3; c++) {
      for (let p = 0; p < 1024; p++) {
        img[p * 3 + c] = data[base + labelBytes + c * 1024 + p] / 255;
      }
    }
    out.push({ label, pixels: img });
  }
  return out;
}

// ---------------------------------------------------------------------------
// sources
// ---------------------------------------------------------------------------

interface FileSet {
  train: [string, string] | string[];
  test: [string, string] | string[];
  urls: Record<string, string>;
}

const IDX_SOURCES: Record<"mnist" | "kmnist", FileSet> = {
  mnist: {
    train: ["train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"],
    test: ["t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"],
    urls: {
      "train-images-idx3-ubyte.gz": "https://storage.googleapis.com/cvdf-datasets/mnist/train-images-idx3-ubyte.gz",
      "train-labels-idx1-ubyte.gz": "https://storage.googleapis.com/cvdf-datasets/mnist/train-labels-idx1-ubyte.gz",
      "t10k-images-idx3-ubyte.gz": "https://storage.googleapis.com/cvdf-datasets/mnist/t10k-images-idx3-ubyte.gz",
      "t10k-labels-idx1-ubyte.gz": "https://storage.googleapis.com/cvdf-datasets/mnist/t10k-labels-idx1-ubyte.gz",
    },
  },
  kmnist: {
    train: ["train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"],
    test: ["t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"],
    urls: {
      "train-images-idx3-ubyte.gz": "http://codh.rois.ac.jp/kmnist/dataset/kmnist/train-images-idx3-ubyte.gz",
      "train-labels-idx1-ubyte.gz": "http://codh.rois.ac.jp/kmnist/dataset/kmnist/train-labels-idx1-ubyte.gz",
      "t10k-images-idx3-ubyte.gz": "http://codh.rois.ac.jp/kmnist/dataset/kmnist/t10k-images-idx3-ubyte.gz",
      "t10k-labels-idx1-ubyte.gz": "http://codh.rois.ac.jp/kmnist/dataset/kmnist/t10k-labels-idx1-ubyte.gz",
    },
  },
};

export async function fetchDataset(name: DatasetName, dataDir = DEFAULT_DATA_DIR): Promise<void> {
  if (name === "synthetic" || name === "cifar10" || name === "cifar100") {
    if (name !== "synthetic") {
      throw new DatasetUnavailable(
        `${name}: place the extracted binary batches under ${join(dataDir, name)} manually`,
      );
    }
    return;
  }
  const source = IDX_SOURCES[name];
  const dir = join(dataDir, name);
  mkdirSync(dir, { recursive: true });
  for (const [file, url] of Object.entries(source.urls)) {
    const target = join(dir, file);
    if (existsSync(target)) continue;
    try {
      const response = await fetch(url);
      if (!response.ok) throw new Error(`HTTP ${response.status}`);
      writeFileSync(target, Buffer.from(await response.arrayBuffer()));
    } catch (err) {
      throw new DatasetUnavailable(`${name}: download of ${url} failed (${err})`);
    }
  }
}

// ---------------------------------------------------------------------------
// loaders
// ---------------------------------------------------------------------------

function firstExisting(dir: string, file: string): string | null {
  for (const candidate of [join(dir, file), join(dir, file.replace(/\.gz$/, ""))]) {
    if (existsSync(candidate)) return candidate;
  }
  return null;
}

function loadIdxDataset(name: "mnist" | "kmnist", dataDir: string): { train: Example[]; test: Example[] } | null {
  const dir = join(dataDir, name);
  const source = IDX_SOURCES[name];
  const paths = [...source.train, ...source.test].map((f) => firstExisting(dir, f));
  if (paths.some((p) => p === null)) return null;
  const [trainImages, trainLabels, testImages, testLabels] = paths as string[];
  return {
    train: idxExamples(trainImages, trainLabels),
    test: idxExamples(testImages, testLabels),
  };
}

async function bundledMnist(): Promise<{ train: Example[]; test: Example[] }> {
  // The npm "mnist" package bundles 10k digits with indexed access;
  // sampling and the split are done here so they stay deterministic.
  const mnist = (await import("mnist")).default as Record<number, { length: number; get(i: number): number[] }>;
  const all: Example[] = [];
  for (let digit = 0; digit <= 9; digit++) {
    const bucket = mnist[digit];
    for (let i = 0; i < bucket.length; i++) {
      all.push({ label: digit, pixels: Float32Array.from(bucket.get(i)) });
    }
  }
  shuffleInPlace(all, mulberry32(0xa11ce));
  const testCount = Math.floor(all.length / 5);
  return { test: all.slice(0, testCount), train: all.slice(testCount) };
}

function loadCifar(name: "cifar10" | "cifar100", dataDir: string): { train: Example[]; test: Example[] } {
  const dir = join(dataDir, name);
  const labelBytes = name === "cifar10" ? 1 : 2;
  const trainFiles =
    name === "cifar10"
      ? [1, 2, 3, 4, 5].map((i) => `data_batch_${i}.bin`)
      : ["train.bin"];
  const testFiles = name === "cifar10" ? ["test_batch.bin"] : ["test.bin"];
  const missing = [...trainFiles, ...testFiles].filter((f) => !existsSync(join(dir, f)));
  if (missing.length) {
    throw new DatasetUnavailable(`${name}: missing ${missing.join(", ")} under ${dir}`);
  }
  const train = trainFiles.flatMap((f) => cifarExamples(join(dir, f), labelBytes));
  const test = testFiles.flatMap((f) => cifarExamples(join(dir, f), labelBytes));
  return { train, test };
}

function syntheticExamples(
  count: number,
  size: number,
  channels: number,
  classes: number,
  rng: () => number,
): Example[] {
  // Oriented-grating classes with additive noise: cheap, deterministic,
  // and separable enough for convergence smoke tests.
  const out: Example[] = [];
  for (let i = 0; i < count; i++) {
    const label = Math.floor(rng() * classes);
    const angle = (Math.PI * label) / classes;
    const freq = 2 * Math.PI * (1 + (label % 3)) / size;
    const phase = rng() * 2 * Math.PI;
    const pixels = new Float32Array(size * size * channels);
    for (let r = 0; r < size; r++) {
      for (let c = 0; c < size; c++) {
        const t = (r * Math.cos(angle) + c * Math.sin(angle)) * freq + phase;
        for (let ch = 0; ch < channels; ch++) {
          const wave = 0.5 + 0.4 * Math.sin(t + (ch * Math.PI) / 4);
          const noisy = wave + 0.08 * gaussian(rng);
          pixels[(r * size + c) * channels + ch] = Math.min(1, Math.max(0, noisy));
        }
      }
    }
    out.push({ label, pixels });
  }
  return out;
}

function pack(
  name: DatasetName,
  train: Example[],
  test: Example[],
  height: number,
  width: number,
  channels: number,
  classes: number,
  seed: number,
  limitTrain = 0,
  limitTest = 0,
): Dataset {
  shuffleInPlace(train, mulberry32(seed ^ 0x5eed));
  shuffleInPlace(test, mulberry32(seed ^ 0x7e57));
  if (limitTrain > 0) train = train.slice(0, limitTrain);
  if (limitTest > 0) test = test.slice(0, limitTest);
  const stride = height * width * channels;
  const trainX = new Float32Array(train.length * stride);
  const trainY = new Int32Array(train.length);
  train.forEach((e, i) => {
    trainX.set(e.pixels, i * stride);
    trainY[i] = e.label;
  });
  const testX = new Float32Array(test.length * stride);
  const testY = new Int32Array(test.length);
  test.forEach((e, i) => {
    testX.set(e.pixels, i * stride);
    testY[i] = e.label;
  });
  return {
    name,
    channels,
    height,
    width,
    classes,
    trainX,
    trainY,
    testX,
    testY,
    trainCount: train.length,
    testCount: test.length,
  };
}

export async function loadDataset(
  name: DatasetName,
  seed: number,
  options: LoadOptions = {},
): Promise<Dataset> {
  const dataDir = options.dataDir ?? DEFAULT_DATA_DIR;
  const { limitTrain = 0, limitTest = 0 } = options;
  switch (name) {
    case "mnist": {
      const canonical = loadIdxDataset("mnist", dataDir);
      const { train, test } = canonical ?? (await bundledMnist());
      return pack(name, train, test, 28, 28, 1, 10, seed, limitTrain, limitTest);
    }
    case "kmnist": {
      const canonical = loadIdxDataset("kmnist", dataDir);
      if (!canonical) {
        throw new DatasetUnavailable(
          `kmnist: expected IDX files under ${join(dataDir, "kmnist")}; ` +
            `run the fetch-data command or place them manually`,
        );
      }
      return pack(name, canonical.train, canonical.test, 28, 28, 1, 10, seed, limitTrain, limitTest);
    }
    case "cifar10": {
      const { train, test } = loadCifar("cifar10", dataDir);
      return pack(name, train, test, 32, 32, 3, 10, seed, limitTrain, limitTest);
    }
    case "cifar100": {
      const { train, test } = loadCifar("cifar100", dataDir);
      return pack(name, train, test, 32, 32, 3, 100, seed, limitTrain, limitTest);
    }
    case "synthetic": {
      const size = options.syntheticSize ?? 12;
      const channels = options.syntheticChannels ?? 1;
      const rng = mulberry32(seed ^ 0xfab);
      const train = syntheticExamples(options.syntheticTrain ?? 512, size, channels, 4, rng);
      const test = syntheticExamples(options.syntheticTest ?? 128, size, channels, 4, rng);
      return pack(name, train, test, size, size, channels, 4, seed, limitTrain, limitTest);
    }
  }
}

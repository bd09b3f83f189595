/**
 * Readers for the codebook and kernel-export file formats produced by the
 * grasspack CLI. The layouts are consumed byte-for-byte:
 *
 * Codebook file:
 *   bytes 0..5   magic  "GPKCBK"
 *   bytes 6..7   version "01"
 *   bytes 8..11  manifest length (u32 LE)
 *   manifest     UTF-8 JSON
 *   payload      n*m*k float64 LE, subspace-major, column-major per basis
 *
 * Kernel export (binary): four u32 LE dims (out, in, height, width),
 * then float64 LE values in out-in-height-width order.
 *
 * Kernel export (CSV): header out_channel,in_channel,row,col,value.
 */

import { readFileSync } from "node:fs";

export interface CodebookManifest {
  format_version: number;
  m: number;
  k: number;
  n: number;
  metric: "chordal" | "fs";
  seed: number;
  min_distance: number | null;
  rankin_bound: number;
  rankin_bound_generalized: number;
  restarts: number;
  max_iters: number;
  tolerance: number;
  iterations_used: number;
  converged: boolean;
}

export interface Codebook {
  manifest: CodebookManifest;
  /** n bases, each m*k values in column-major order. */
  bases: Float64Array[];
}

export interface KernelTensor {
  outChannels: number;
  inChannels: number;
  height: number;
  width: number;
  /** C-order out-in-height-width values. */
  values: Float64Array;
}

export class MalformedFile extends Error {
  override name = "MalformedFile";
}

const MAGIC = "GPKCBK";
const VERSION = "01";

function float64At(buffer: Buffer, byteOffset: number, count: number): Float64Array {
  const view = new DataView(buffer.buffer, buffer.byteOffset + byteOffset, count * 8);
  const out = new Float64Array(count);
  for (let i = 0; i < count; i++) out[i] = view.getFloat64(i * 8, true);
  return out;
}

export function readCodebook(path: string): Codebook {
  const data = readFileSync(path);
  if (data.length < 12) throw new MalformedFile(`${path}: too short for a header`);
  if (data.toString("latin1", 0, 6) !== MAGIC) {
    throw new MalformedFile(`${path}: bad magic`);
  }
  if (data.toString("latin1", 6, 8) !== VERSION) {
    throw new MalformedFile(`${path}: unsupported version`);
  }
  const manifestLen = data.readUInt32LE(8);
  if (data.length < 12 + manifestLen) {
    throw new MalformedFile(`${path}: manifest truncated`);
  }
  let manifest: CodebookManifest;
  try {
    manifest = JSON.parse(data.toString("utf-8", 12, 12 + manifestLen));
  } catch (err) {
    throw new MalformedFile(`${path}: manifest is not valid JSON: ${err}`);
  }
  const { m, k, n } = manifest;
  const payloadBytes = data.length - 12 - manifestLen;
  if (payloadBytes !== n * m * k * 8) {
    throw new MalformedFile(
      `${path}: payload holds ${payloadBytes} bytes, expected ${n * m * k * 8}`,
    );
  }
  const bases: Float64Array[] = [];
  for (let i = 0; i < n; i++) {
    bases.push(float64At(data, 12 + manifestLen + i * m * k * 8, m * k));
  }
  return { manifest, bases };
}

export function readKernelBinary(path: string): KernelTensor {
  const data = readFileSync(path);
  if (data.length < 16) throw new MalformedFile(`${path}: too short for a kernel header`);
  const dims = [0, 1, 2, 3].map((i) => data.readUInt32LE(i * 4));
  const [outChannels, inChannels, height, width] = dims;
  const count = outChannels * inChannels * height * width;
  if (dims.some((d) => d < 1) || data.length !== 16 + count * 8) {
    throw new MalformedFile(`${path}: dims ${dims} inconsistent with ${data.length} bytes`);
  }
  return { outChannels, inChannels, height, width, values: float64At(data, 16, count) };
}

export function readKernelCsv(path: string): KernelTensor {
  const lines = readFileSync(path, "utf-8").trim().split(/\r?\n/);
  if (lines[0] !== "out_channel,in_channel,row,col,value") {
    throw new MalformedFile(`${path}: missing kernel CSV header`);
  }
  const entries = lines.slice(1).map((line) => {
    const parts = line.split(",");
    if (parts.length !== 5) throw new MalformedFile(`${path}: bad row ${line}`);
    return parts.map(Number);
  });
  const dims = [0, 1, 2, 3].map((axis) => Math.max(...entries.map((e) => e[axis])) + 1);
  const [outChannels, inChannels, height, width] = dims;
  const values = new Float64Array(outChannels * inChannels * height * width);
  for (const [i, j, r, c, v] of entries) {
    values[((i * inChannels + j) * height + r) * width + c] = v;
  }
  return { outChannels, inChannels, height, width, values };
}

export function kaimingFactor(inChannels: number, height: number, width: number): number {
  return Math.sqrt(2.0 / (inChannels * height * width));
}

/**
 * Reproduce the exporter's codebook-to-kernel bijection: output channel i,
 * input channel j holds column j of basis i, flattened row-major over the
 * height*width grid. Used to cross-check loaded kernel files against the
 * codebook they came from.
 */
export function kernelsFromCodebook(
  codebook: Codebook,
  height: number,
  width: number,
  scale: "raw" | "kaiming" = "raw",
): KernelTensor {
  const { m, k, n } = codebook.manifest;
  if (height * width !== m) {
    throw new MalformedFile(`kernel geometry ${height}x${width} does not cover m=${m}`);
  }
  const factor = scale === "kaiming" ? kaimingFactor(k, height, width) : 1.0;
  const values = new Float64Array(n * k * m);
  for (let i = 0; i < n; i++) {
    const basis = codebook.bases[i];
    for (let j = 0; j < k; j++) {
      for (let a = 0; a < m; a++) {
        // column-major basis storage: entry (a, j) sits at j*m + a
        values[(i * k + j) * m + a] = basis[j * m + a] * factor;
      }
    }
  }
  return { outChannels: n, inChannels: k, height, width, values };
}

/**
 * Rearrange an out-in-height-width tensor into the height-width-in-out
 * layout that conv layers consume, cast to float32.
 */
export function toConvWeights(tensor: KernelTensor): {
  shape: [number, number, number, number];
  values: Float32Array;
} {
  const { outChannels, inChannels, height, width, values } = tensor;
  const out = new Float32Array(values.length);
  for (let o = 0; o < outChannels; o++) {
    for (let i = 0; i < inChannels; i++) {
      for (let r = 0; r < height; r++) {
        for (let c = 0; c < width; c++) {
          const src = ((o * inChannels + i) * height + r) * width + c;
          const dst = ((r * width + c) * inChannels + i) * outChannels + o;
          out[dst] = Math.fround(values[src]);
        }
      }
    }
  }
  return { shape: [height, width, inChannels, outChannels], values: out };
}

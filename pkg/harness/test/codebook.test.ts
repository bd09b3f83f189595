/**
 * Cross-language boundary: parse files written by the Python CLI and
 * verify the documented layouts byte-for-byte.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { tmpdir } from "node:os";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import {
  kaimingFactor,
  kernelsFromCodebook,
  MalformedFile,
  readCodebook,
  readKernelBinary,
  readKernelCsv,
  toConvWeights,
} from "../src/codebook.js";

const FIXTURES = fileURLToPath(new URL("fixtures", import.meta.url));

function det3(m: number[][]): number {
  return (
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
    m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
    m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
  );
}

/** Independent Fubini-Study distance for k=3 bases stored column-major. */
function fsDistance(a: Float64Array, b: Float64Array, m: number): number {
  const product: number[][] = [];
  for (let p = 0; p < 3; p++) {
    product.push([0, 0, 0]);
    for (let q = 0; q < 3; q++) {
      let sum = 0;
      for (let r = 0; r < m; r++) sum += a[p * m + r] * b[q * m + r];
      product[p][q] = sum;
    }
  }
  return Math.acos(Math.min(Math.abs(det3(product)), 1));
}

describe("codebook files", () => {
  it("parses the trine fixture", () => {
    const cb = readCodebook(join(FIXTURES, "trine.gpk"));
    expect(cb.manifest.m).toBe(2);
    expect(cb.manifest.k).toBe(1);
    expect(cb.manifest.n).toBe(3);
    expect(cb.manifest.metric).toBe("chordal");
    expect(cb.manifest.min_distance).toBeGreaterThan(0.866);
    expect(cb.bases).toHaveLength(3);
    for (const basis of cb.bases) {
      expect(basis).toHaveLength(2);
      const norm = Math.hypot(basis[0], basis[1]);
      expect(Math.abs(norm - 1)).toBeLessThan(1e-12);
    }
  });

  it("columns of every stored basis are unit vectors", () => {
    const cb = readCodebook(join(FIXTURES, "g9_3_8.gpk"));
    const { m, k, n } = cb.manifest;
    expect([m, k, n]).toEqual([9, 3, 8]);
    for (const basis of cb.bases) {
      for (let j = 0; j < k; j++) {
        let sq = 0;
        for (let r = 0; r < m; r++) sq += basis[j * m + r] ** 2;
        expect(Math.abs(Math.sqrt(sq) - 1)).toBeLessThan(1e-12);
      }
    }
  });

  it("manifest min_distance matches an independent recomputation", () => {
    const cb = readCodebook(join(FIXTURES, "g9_3_8.gpk"));
    let min = Infinity;
    for (let i = 0; i < cb.bases.length; i++) {
      for (let j = i + 1; j < cb.bases.length; j++) {
        min = Math.min(min, fsDistance(cb.bases[i], cb.bases[j], 9));
      }
    }
    expect(Math.abs(min - (cb.manifest.min_distance as number))).toBeLessThan(1e-12);
  });

  it("rejects bad magic and truncation", () => {
    const data = readFileSync(join(FIXTURES, "trine.gpk"));
    const badMagic = Buffer.from(data);
    badMagic.write("XXXXXX", 0, "latin1");
    const badPath = join(tmpdir(), "bad_magic.gpk");
    writeFileSync(badPath, badMagic);
    expect(() => readCodebook(badPath)).toThrow(MalformedFile);

    const truncatedPath = join(tmpdir(), "truncated.gpk");
    writeFileSync(truncatedPath, data.subarray(0, data.length - 8));
    expect(() => readCodebook(truncatedPath)).toThrow(/payload/);
  });
});

describe("kernel exports", () => {
  it("binary export equals the documented codebook reshape bit-for-bit", () => {
    const cb = readCodebook(join(FIXTURES, "g9_3_8.gpk"));
    const fromFile = readKernelBinary(join(FIXTURES, "g9_3_8_raw.bin"));
    const derived = kernelsFromCodebook(cb, 3, 3, "raw");
    expect(fromFile.outChannels).toBe(8);
    expect(fromFile.inChannels).toBe(3);
    expect(fromFile.values).toEqual(derived.values);
  });

  it("kaiming export equals the rescaled reshape", () => {
    const cb = readCodebook(join(FIXTURES, "g9_3_8.gpk"));
    const fromFile = readKernelBinary(join(FIXTURES, "g9_3_8_kaiming.bin"));
    const derived = kernelsFromCodebook(cb, 3, 3, "kaiming");
    expect(fromFile.values).toEqual(derived.values);
    const ratio = fromFile.values[0] / readKernelBinary(join(FIXTURES, "g9_3_8_raw.bin")).values[0];
    expect(Math.abs(ratio - kaimingFactor(3, 3, 3))).toBeLessThan(1e-15);
  });

  it("csv export matches the binary export exactly", () => {
    const fromCsv = readKernelCsv(join(FIXTURES, "g9_3_8_raw.csv"));
    const fromBin = readKernelBinary(join(FIXTURES, "g9_3_8_raw.bin"));
    expect(fromCsv.values).toEqual(fromBin.values);
    expect(fromCsv.height).toBe(3);
    expect(fromCsv.width).toBe(3);
  });

  it("grayscale export has unit-norm single-channel kernels", () => {
    const tensor = readKernelBinary(join(FIXTURES, "g9_1_32_raw.bin"));
    expect(tensor.outChannels).toBe(32);
    expect(tensor.inChannels).toBe(1);
    for (let o = 0; o < 32; o++) {
      let sq = 0;
      for (let p = 0; p < 9; p++) sq += tensor.values[o * 9 + p] ** 2;
      expect(Math.abs(Math.sqrt(sq) - 1)).toBeLessThan(1e-12);
    }
  });

  it("toConvWeights reorders out-in-h-w into h-w-in-out", () => {
    const tensor = {
      outChannels: 2,
      inChannels: 1,
      height: 1,
      width: 2,
      values: Float64Array.from([1, 2, 3, 4]), // kernel0: [1,2], kernel1: [3,4]
    };
    const { shape, values } = toConvWeights(tensor);
    expect(shape).toEqual([1, 2, 1, 2]);
    // position (r=0,c=0): kernels (1,3); position (r=0,c=1): kernels (2,4)
    expect(Array.from(values)).toEqual([1, 3, 2, 4]);
  });
});

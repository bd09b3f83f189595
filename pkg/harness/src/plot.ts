/**
 * Dependency-free PNG rendering of first-epoch accuracy distributions:
 * one strip of dots per init mode over a shared accuracy axis. Keeps the
 * sweep's optional figure output self-contained (no canvas binding).
 */

import { writeFileSync } from "node:fs";
import { deflateSync } from "node:zlib";

import { SweepRow } from "./sweep.js";

// --- tiny raster -----------------------------------------------------------

class Raster {
  data: Uint8Array;

  constructor(
    readonly width: number,
    readonly height: number,
  ) {
    this.data = new Uint8Array(width * height * 3).fill(0xff);
  }

  set(x: number, y: number, rgb: [number, number, number]): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const at = (y * this.width + x) * 3;
    this.data[at] = rgb[0];
    this.data[at + 1] = rgb[1];
    this.data[at + 2] = rgb[2];
  }

  rect(x: number, y: number, w: number, h: number, rgb: [number, number, number]): void {
    for (let dy = 0; dy < h; dy++) {
      for (let dx = 0; dx < w; dx++) this.set(x + dx, y + dy, rgb);
    }
  }

  dot(x: number, y: number, r: number, rgb: [number, number, number]): void {
    for (let dy = -r; dy <= r; dy++) {
      for (let dx = -r; dx <= r; dx++) {
        if (dx * dx + dy * dy <= r * r) this.set(x + dx, y + dy, rgb);
      }
    }
  }
}

// 5x7 glyphs (column-major bits, LSB = top row) for axis labels.
const FONT: Record<string, number[]> = {
  "0": [0x3e, 0x51, 0x49, 0x45, 0x3e], "1": [0x00, 0x42, 0x7f, 0x40, 0x00],
  "2": [0x42, 0x61, 0x51, 0x49, 0x46], "3": [0x21, 0x41, 0x45, 0x4b, 0x31],
  "4": [0x18, 0x14, 0x12, 0x7f, 0x10], "5": [0x27, 0x45, 0x45, 0x45, 0x39],
  "6": [0x3c, 0x4a, 0x49, 0x49, 0x30], "7": [0x01, 0x71, 0x09, 0x05, 0x03],
  "8": [0x36, 0x49, 0x49, 0x49, 0x36], "9": [0x06, 0x49, 0x49, 0x29, 0x1e],
  ".": [0x00, 0x60, 0x60, 0x00, 0x00], "%": [0x62, 0x64, 0x08, 0x13, 0x23],
  "-": [0x08, 0x08, 0x08, 0x08, 0x08], " ": [0x00, 0x00, 0x00, 0x00, 0x00],
  A: [0x7e, 0x11, 0x11, 0x11, 0x7e], B: [0x7f, 0x49, 0x49, 0x49, 0x36],
  C: [0x3e, 0x41, 0x41, 0x41, 0x22], D: [0x7f, 0x41, 0x41, 0x22, 0x1c],
  E: [0x7f, 0x49, 0x49, 0x49, 0x41], F: [0x7f, 0x09, 0x09, 0x09, 0x01],
  G: [0x3e, 0x41, 0x49, 0x49, 0x7a], H: [0x7f, 0x08, 0x08, 0x08, 0x7f],
  I: [0x00, 0x41, 0x7f, 0x41, 0x00], K: [0x7f, 0x08, 0x14, 0x22, 0x41],
  L: [0x7f, 0x40, 0x40, 0x40, 0x40], M: [0x7f, 0x02, 0x0c, 0x02, 0x7f],
  N: [0x7f, 0x04, 0x08, 0x10, 0x7f], O: [0x3e, 0x41, 0x41, 0x41, 0x3e],
  P: [0x7f, 0x09, 0x09, 0x09, 0x06], R: [0x7f, 0x09, 0x19, 0x29, 0x46],
  S: [0x46, 0x49, 0x49, 0x49, 0x31], T: [0x01, 0x01, 0x7f, 0x01, 0x01],
  U: [0x3f, 0x40, 0x40, 0x40, 0x3f], Y: [0x07, 0x08, 0x70, 0x08, 0x07],
  Z: [0x61, 0x51, 0x49, 0x45, 0x43],
};

function drawText(
  raster: Raster,
  x: number,
  y: number,
  text: string,
  rgb: [number, number, number],
): void {
  let cx = x;
  for (const ch of text.toUpperCase()) {
    const glyph = FONT[ch] ?? FONT[" "];
    for (let col = 0; col < 5; col++) {
      for (let row = 0; row < 7; row++) {
        if ((glyph[col] >> row) & 1) raster.set(cx + col, y + row, rgb);
      }
    }
    cx += 6;
  }
}

// --- minimal PNG encoder ---------------------------------------------------

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(data: Uint8Array): number {
  let crc = 0xffffffff;
  for (const byte of data) crc = CRC_TABLE[(crc ^ byte) & 0xff] ^ (crc >>> 8);
  return (crc ^ 0xffffffff) >>> 0;
}

function chunk(type: string, payload: Uint8Array): Buffer {
  const head = Buffer.alloc(4);
  head.writeUInt32BE(payload.length);
  const body = Buffer.concat([Buffer.from(type, "latin1"), Buffer.from(payload)]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(body));
  return Buffer.concat([head, body, crc]);
}

export function encodePng(raster: Raster): Buffer {
  const { width, height, data } = raster;
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 2; // truecolor
  const raw = Buffer.alloc(height * (1 + width * 3));
  for (let y = 0; y < height; y++) {
    raw[y * (1 + width * 3)] = 0; // no filter
    raw.set(data.subarray(y * width * 3, (y + 1) * width * 3), y * (1 + width * 3) + 1);
  }
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(raw)),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

// --- the accuracy strip plot -----------------------------------------------

const MODE_COLORS: Record<string, [number, number, number]> = {
  baseline: [0x44, 0x44, 0x44],
  grassmannian: [0xc4, 0x4e, 0x52],
  "grassmannian-frozen": [0x48, 0x78, 0xa8],
  "grassmannian-kaiming": [0x55, 0xa8, 0x68],
};

export function writeAccuracyStripPlot(path: string, rows: SweepRow[]): void {
  const valid = rows.filter((r) => r.firstEpochAccuracy !== null);
  const modes = [...new Set(valid.map((r) => r.config.initMode))];
  const values = valid.map((r) => r.firstEpochAccuracy as number);
  const lo = Math.floor(Math.min(...values, 100) - 1);
  const hi = Math.ceil(Math.max(...values, 0) + 1);
  const left = 130;
  const right = 20;
  const stripHeight = 28;
  const width = 520;
  const height = 40 + stripHeight * modes.length + 30;
  const raster = new Raster(width, height);
  const axisY = 20 + stripHeight * modes.length;
  const toX = (v: number) => left + ((v - lo) / (hi - lo)) * (width - left - right);

  drawText(raster, left, 4, "FIRST-EPOCH ACCURACY", [0, 0, 0]);
  raster.rect(left, axisY, width - left - right, 1, [0, 0, 0]);
  const span = hi - lo;
  const step = span <= 10 ? 1 : span <= 25 ? 5 : 10;
  for (let v = Math.ceil(lo / step) * step; v <= hi; v += step) {
    const x = Math.round(toX(v));
    raster.rect(x, axisY, 1, 4, [0, 0, 0]);
    drawText(raster, x - 8, axisY + 7, `${v}%`, [0, 0, 0]);
  }
  modes.forEach((mode, i) => {
    const y = 20 + i * stripHeight + Math.floor(stripHeight / 2);
    const color = MODE_COLORS[mode] ?? [0, 0, 0];
    drawText(raster, 6, y - 3, mode.replace("grassmannian", "GRASS"), color);
    raster.rect(left, y, width - left - right, 1, [0xdd, 0xdd, 0xdd]);
    for (const row of valid.filter((r) => r.config.initMode === mode)) {
      raster.dot(Math.round(toX(row.firstEpochAccuracy as number)), y, 3, color);
    }
  });
  writeFileSync(path, encodePng(raster));
}

/**
 * 24-bit uncompressed BMP decode/encode, enough for probe images.
 * Handles BITMAPINFOHEADER (and longer) headers, bottom-up and
 * top-down row order, BGR pixel order, 4-byte row padding.
 */
import { readFileSync, writeFileSync } from 'fs';

export interface Raster {
  width: number;
  height: number;
  /** RGB, row-major from the top-left, 3 bytes per pixel */
  data: Uint8Array;
}

export class BmpError extends Error {}

export function decodeBmp(path: string): Raster {
  const blob = readFileSync(path);
  if (blob.length < 54 || blob.toString('ascii', 0, 2) !== 'BM') {
    throw new BmpError(`${path}: not a BMP file`);
  }
  const dataOffset = blob.readUInt32LE(10);
  const dibSize = blob.readUInt32LE(14);
  if (dibSize < 40) throw new BmpError(`${path}: unsupported DIB header size ${dibSize}`);
  const width = blob.readInt32LE(18);
  const rawHeight = blob.readInt32LE(22);
  const bpp = blob.readUInt16LE(28);
  const compression = blob.readUInt32LE(30);
  if (bpp !== 24 || compression !== 0) {
    throw new BmpError(`${path}: only 24-bit uncompressed BMP supported (bpp=${bpp}, compression=${compression})`);
  }
  const bottomUp = rawHeight > 0;
  const height = Math.abs(rawHeight);
  const rowBytes = Math.ceil((width * 3) / 4) * 4;
  if (dataOffset + rowBytes * height > blob.length) {
    throw new BmpError(`${path}: pixel data truncated`);
  }
  const data = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    const srcRow = bottomUp ? height - 1 - y : y;
    let src = dataOffset + srcRow * rowBytes;
    let dst = y * width * 3;
    for (let x = 0; x < width; x++) {
      data[dst] = blob[src + 2];       // R
      data[dst + 1] = blob[src + 1];   // G
      data[dst + 2] = blob[src];       // B
      src += 3;
      dst += 3;
    }
  }
  return { width, height, data };
}

export function encodeBmp(path: string, raster: Raster): void {
  const { width, height, data } = raster;
  const rowBytes = Math.ceil((width * 3) / 4) * 4;
  const pixelBytes = rowBytes * height;
  const buf = Buffer.alloc(54 + pixelBytes);
  buf.write('BM', 0, 'ascii');
  buf.writeUInt32LE(54 + pixelBytes, 2);
  buf.writeUInt32LE(54, 10);
  buf.writeUInt32LE(40, 14);
  buf.writeInt32LE(width, 18);
  buf.writeInt32LE(height, 22);      // positive: bottom-up
  buf.writeUInt16LE(1, 26);
  buf.writeUInt16LE(24, 28);
  buf.writeUInt32LE(0, 30);
  buf.writeUInt32LE(pixelBytes, 34);
  for (let y = 0; y < height; y++) {
    const dstRow = 54 + (height - 1 - y) * rowBytes;
    let src = y * width * 3;
    for (let x = 0; x < width; x++) {
      buf[dstRow + x * 3] = data[src + 2];     // B
      buf[dstRow + x * 3 + 1] = data[src + 1]; // G
      buf[dstRow + x * 3 + 2] = data[src];     // R
      src += 3;
    }
  }
  writeFileSync(path, buf);
}

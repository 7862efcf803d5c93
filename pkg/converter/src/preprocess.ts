/**
 * Probe preprocessing, mirroring the training toolkit exactly:
 * bilinear resize to 227x227 with half-pixel centers computed in
 * float64, RGB channel order, ImageNet mean subtraction, then a single
 * rounding to float32 in CHW layout.
 */
import { Raster } from './bmp.js';

export const INPUT_SIZE = 227;
export const CHANNEL_MEANS = [123.68, 116.78, 103.94];

interface AxisCoords {
  lo: Int32Array;
  hi: Int32Array;
  frac: Float64Array;
}

function axisCoords(nIn: number, nOut: number): AxisCoords {
  const lo = new Int32Array(nOut);
  const hi = new Int32Array(nOut);
  const frac = new Float64Array(nOut);
  for (let i = 0; i < nOut; i++) {
    let pos = (i + 0.5) * (nIn / nOut) - 0.5;
    if (pos < 0) pos = 0;
    if (pos > nIn - 1) pos = nIn - 1;
    const l = Math.floor(pos);
    lo[i] = l;
    hi[i] = Math.min(l + 1, nIn - 1);
    frac[i] = pos - l;
  }
  return { lo, hi, frac };
}

/** Resize + normalize a decoded raster to a (3, 227, 227) float32 CHW array. */
export function prepare(raster: Raster): Float32Array {
  const { width, height, data } = raster;
  const ys = axisCoords(height, INPUT_SIZE);
  const xs = axisCoords(width, INPUT_SIZE);
  const out = new Float32Array(3 * INPUT_SIZE * INPUT_SIZE);
  const plane = INPUT_SIZE * INPUT_SIZE;
  for (let y = 0; y < INPUT_SIZE; y++) {
    const y0 = ys.lo[y] * width * 3;
    const y1 = ys.hi[y] * width * 3;
    const fy = ys.frac[y];
    for (let x = 0; x < INPUT_SIZE; x++) {
      const x0 = xs.lo[x] * 3;
      const x1 = xs.hi[x] * 3;
      const fx = xs.frac[x];
      for (let c = 0; c < 3; c++) {
        const top = data[y0 + x0 + c] * (1 - fx) + data[y0 + x1 + c] * fx;
        const bot = data[y1 + x0 + c] * (1 - fx) + data[y1 + x1 + c] * fx;
        const value = top * (1 - fy) + bot * fy;
        out[c * plane + y * INPUT_SIZE + x] = Math.fround(value - CHANNEL_MEANS[c]);
      }
    }
  }
  return out;
}

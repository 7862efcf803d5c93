/**
 * Reference AlexNet forward pass over SOURCE-convention weights
 * (conv weights [K, C/groups, kh, kw], fully connected weights
 * [out, in]), used as the source-framework side of verification.
 *
 * Activations are stored float32 with float64 accumulation, matching
 * the toolkit's float32 pipeline to well under the 1e-3 logit budget.
 */
import { ARCH } from './layermap.js';
import { TensorMap } from './safetensors.js';

function convOutSize(size: number, kernel: number, stride: number, pad: number): number {
  return Math.floor((size + 2 * pad - kernel) / stride) + 1;
}

function conv2d(
  input: Float32Array, inC: number, inH: number, inW: number,
  weight: Float32Array, bias: Float32Array,
  outC: number, kernel: number, stride: number, pad: number, groups: number,
): { data: Float32Array; h: number; w: number } {
  const outH = convOutSize(inH, kernel, stride, pad);
  const outW = convOutSize(inW, kernel, stride, pad);
  const out = new Float32Array(outC * outH * outW);
  const cg = inC / groups;
  const kg = outC / groups;
  const kArea = kernel * kernel;
  for (let k = 0; k < outC; k++) {
    const g = Math.floor(k / kg);
    const wBase = k * cg * kArea;
    for (let oy = 0; oy < outH; oy++) {
      const iy0 = oy * stride - pad;
      for (let ox = 0; ox < outW; ox++) {
        const ix0 = ox * stride - pad;
        let acc = bias[k];
        for (let c = 0; c < cg; c++) {
          const inPlane = (g * cg + c) * inH * inW;
          const wPlane = wBase + c * kArea;
          for (let ky = 0; ky < kernel; ky++) {
            const iy = iy0 + ky;
            if (iy < 0 || iy >= inH) continue;
            const inRow = inPlane + iy * inW;
            const wRow = wPlane + ky * kernel;
            for (let kx = 0; kx < kernel; kx++) {
              const ix = ix0 + kx;
              if (ix < 0 || ix >= inW) continue;
              acc += input[inRow + ix] * weight[wRow + kx];
            }
          }
        }
        out[(k * outH + oy) * outW + ox] = Math.fround(acc);
      }
    }
  }
  return { data: out, h: outH, w: outW };
}

function relu(x: Float32Array): void {
  for (let i = 0; i < x.length; i++) if (x[i] < 0) x[i] = 0;
}

function lrn(x: Float32Array, channels: number, plane: number): Float32Array {
  const { depth, bias, alpha, beta } = ARCH.lrn;
  const half = Math.floor(depth / 2);
  const out = new Float32Array(x.length);
  for (let p = 0; p < plane; p++) {
    for (let c = 0; c < channels; c++) {
      let sum = 0;
      const lo = Math.max(0, c - half);
      const hi = Math.min(channels - 1, c + half);
      for (let j = lo; j <= hi; j++) {
        const v = x[j * plane + p];
        sum += v * v;
      }
      const denom = Math.pow(bias + (alpha / depth) * sum, beta);
      out[c * plane + p] = Math.fround(x[c * plane + p] / denom);
    }
  }
  return out;
}

function maxpool(
  x: Float32Array, channels: number, inH: number, inW: number,
): { data: Float32Array; h: number; w: number } {
  const { window, stride } = ARCH.pool;
  const outH = Math.floor((inH - window) / stride) + 1;
  const outW = Math.floor((inW - window) / stride) + 1;
  const out = new Float32Array(channels * outH * outW);
  for (let c = 0; c < channels; c++) {
    const plane = c * inH * inW;
    for (let oy = 0; oy < outH; oy++) {
      for (let ox = 0; ox < outW; ox++) {
        let best = -Infinity;
        for (let ky = 0; ky < window; ky++) {
          const row = plane + (oy * stride + ky) * inW + ox * stride;
          for (let kx = 0; kx < window; kx++) {
            const v = x[row + kx];
            if (v > best) best = v;
          }
        }
        out[(c * outH + oy) * outW + ox] = best;
      }
    }
  }
  return { data: out, h: outH, w: outW };
}

function linear(x: Float32Array, weight: Float32Array, bias: Float32Array, outF: number): Float32Array {
  const inF = x.length;
  const out = new Float32Array(outF);
  for (let o = 0; o < outF; o++) {
    let acc = bias[o];
    const base = o * inF;
    for (let i = 0; i < inF; i++) acc += weight[base + i] * x[i];
    out[o] = Math.fround(acc);
  }
  return out;
}

/** Logits for one prepared (3, 227, 227) input under source weights. */
export function alexnetLogits(input: Float32Array, weights: TensorMap): Float32Array {
  const get = (name: string): Float32Array => {
    const t = weights.get(name);
    if (!t) throw new Error(`reference forward: missing tensor ${name}`);
    return t.data;
  };
  let act = input;
  let c = 3;
  let [h, w] = [227, 227];
  for (let i = 0; i < ARCH.conv.length; i++) {
    const spec = ARCH.conv[i];
    const conv = conv2d(act, c, h, w, get(`${spec.name}.weight`), get(`${spec.name}.bias`),
      spec.out, spec.kernel, spec.stride, spec.pad, spec.groups);
    act = conv.data;
    c = spec.out;
    h = conv.h;
    w = conv.w;
    relu(act);
    if (i < 2) act = lrn(act, c, h * w);
    if (i < 2 || i === 4) {
      const pooled = maxpool(act, c, h, w);
      act = pooled.data;
      h = pooled.h;
      w = pooled.w;
    }
  }
  // dropout is identity at inference; flatten is already CHW row-major
  act = linear(act, get('fc6.weight'), get('fc6.bias'), 4096);
  relu(act);
  act = linear(act, get('fc7.weight'), get('fc7.bias'), 4096);
  relu(act);
  const fc8w = weights.get('fc8.weight')!;
  return linear(act, fc8w.data, get('fc8.bias'), fc8w.shape[0]);
}

/** Deterministic fixtures: seeded PRNG, synthetic canonical checkpoints,
 * and random probe images. */
import { Raster } from '../src/bmp.js';
import { canonicalLayerMap } from '../src/layermap.js';
import { TensorMap } from '../src/safetensors.js';

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function gaussianFill(data: Float32Array, std: number, rand: () => number): void {
  for (let i = 0; i < data.length; i += 2) {
    const u = Math.max(rand(), 1e-12);
    const v = rand();
    const r = Math.sqrt(-2 * Math.log(u)) * std;
    data[i] = r * Math.cos(2 * Math.PI * v);
    if (i + 1 < data.length) data[i + 1] = r * Math.sin(2 * Math.PI * v);
  }
}

const checkpointCache = new Map<number, TensorMap>();

/** Canonical-shape AlexNet tensors with He-scaled weights, zero biases.
 * Cached per seed; the returned Map is a shallow copy safe to add or
 * remove entries from (the tensors themselves must not be mutated). */
export function syntheticCheckpoint(seed = 1): TensorMap {
  let base = checkpointCache.get(seed);
  if (!base) {
    const rand = mulberry32(seed);
    base = new Map();
    for (const entry of canonicalLayerMap()) {
      const count = entry.shape.reduce((a, b) => a * b, 1);
      const data = new Float32Array(count);
      if (entry.source.endsWith('.weight')) {
        const fanIn = entry.transpose
          ? entry.shape[1]                                   // fc [out, in]
          : entry.shape.slice(1).reduce((a, b) => a * b, 1); // conv [K, C/g, kh, kw]
        gaussianFill(data, Math.sqrt(2 / fanIn), rand);
      }
      base.set(entry.source, { shape: [...entry.shape], data });
    }
    checkpointCache.set(seed, base);
  }
  return new Map(base);
}

export function randomProbe(width: number, height: number, seed: number): Raster {
  const rand = mulberry32(seed);
  const data = new Uint8Array(width * height * 3);
  for (let i = 0; i < data.length; i++) data[i] = Math.floor(rand() * 256);
  return { width, height, data };
}

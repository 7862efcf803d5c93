/**
 * Source checkpoint (safetensors) -> BWCK conversion.
 *
 * Lossless at 32-bit: values are copied bit-for-bit, reordered only
 * where the layer map declares an explicit transpose. Output entries
 * follow the canonical network's layer ordering.
 */
import { BwckTensor, writeBwck } from './bwck.js';
import { MapEntry, canonicalLayerMap, canonicalMetadata } from './layermap.js';
import { TensorMap, readSafetensors } from './safetensors.js';

export class ConversionError extends Error {}

function sameShape(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

function transpose2d(data: Float32Array, rows: number, cols: number): Float32Array {
  const out = new Float32Array(data.length);
  for (let r = 0; r < rows; r++) {
    const base = r * cols;
    for (let c = 0; c < cols; c++) {
      out[c * rows + r] = data[base + c];
    }
  }
  return out;
}

export function convertTensors(source: TensorMap, map: MapEntry[] = canonicalLayerMap()): BwckTensor[] {
  const unmapped = new Set(source.keys());
  const entries: BwckTensor[] = [];
  for (const entry of map) {
    const tensor = source.get(entry.source);
    if (!tensor) {
      throw new ConversionError(`source checkpoint is missing tensor ${entry.source}`);
    }
    unmapped.delete(entry.source);
    if (!sameShape(tensor.shape, entry.shape)) {
      throw new ConversionError(
        `${entry.source}: shape [${tensor.shape}] does not match expected [${entry.shape}]`);
    }
    if (entry.transpose) {
      const [rows, cols] = tensor.shape;
      entries.push({ name: entry.target, dims: [cols, rows], data: transpose2d(tensor.data, rows, cols) });
    } else {
      entries.push({ name: entry.target, dims: [...tensor.shape], data: tensor.data });
    }
  }
  if (unmapped.size > 0) {
    const stray = [...unmapped].sort()[0];
    throw new ConversionError(`source tensor ${stray} is not covered by the layer map`);
  }
  return entries;
}

export interface ConvertResult {
  entries: number;
  names: string[];
}

export function convert(srcPath: string, outPath: string, numClasses = 1000): ConvertResult {
  const source = readSafetensors(srcPath);
  const entries = convertTensors(source);
  writeBwck(outPath, entries, canonicalMetadata(numClasses));
  return { entries: entries.length, names: entries.map((e) => e.name) };
}

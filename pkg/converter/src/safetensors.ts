/**
 * Minimal safetensors reader/writer (float32 tensors only).
 *
 * File layout: u64 LE header length, JSON header mapping tensor name to
 * {dtype, shape, data_offsets:[begin,end]} (offsets relative to the
 * byte after the header), then the raw data section.
 */
import { readFileSync, openSync, writeSync, closeSync } from 'fs';

export interface SourceTensor {
  shape: number[];
  data: Float32Array;
}

export type TensorMap = Map<string, SourceTensor>;

export class SafetensorsError extends Error {}

export function readSafetensors(path: string): TensorMap {
  const blob = readFileSync(path);
  if (blob.length < 8) throw new SafetensorsError('file too short for header');
  const headerLen = Number(blob.readBigUInt64LE(0));
  if (8 + headerLen > blob.length) {
    throw new SafetensorsError(`header length ${headerLen} exceeds file size`);
  }
  let header: Record<string, { dtype: string; shape: number[]; data_offsets: [number, number] }>;
  try {
    header = JSON.parse(blob.subarray(8, 8 + headerLen).toString('utf8'));
  } catch (err) {
    throw new SafetensorsError(`bad header JSON: ${err}`);
  }
  const dataStart = 8 + headerLen;
  const tensors: TensorMap = new Map();
  for (const [name, info] of Object.entries(header)) {
    if (name === '__metadata__') continue;
    if (info.dtype !== 'F32') {
      throw new SafetensorsError(`${name}: unsupported dtype ${info.dtype}`);
    }
    const [begin, end] = info.data_offsets;
    const count = info.shape.reduce((a, b) => a * b, 1);
    if (end - begin !== 4 * count) {
      throw new SafetensorsError(
        `${name}: shape [${info.shape}] needs ${4 * count} bytes, offsets give ${end - begin}`);
    }
    if (dataStart + end > blob.length) {
      throw new SafetensorsError(`${name}: data_offsets beyond end of file`);
    }
    const data = new Float32Array(count);
    new Uint8Array(data.buffer).set(blob.subarray(dataStart + begin, dataStart + end));
    tensors.set(name, { shape: [...info.shape], data });
  }
  return tensors;
}

export function writeSafetensors(path: string, tensors: TensorMap): void {
  const header: Record<string, unknown> = {};
  let offset = 0;
  const order = [...tensors.keys()];
  for (const name of order) {
    const t = tensors.get(name)!;
    const bytes = 4 * t.data.length;
    header[name] = { dtype: 'F32', shape: t.shape, data_offsets: [offset, offset + bytes] };
    offset += bytes;
  }
  const headerBuf = Buffer.from(JSON.stringify(header), 'utf8');
  const lenBuf = Buffer.alloc(8);
  lenBuf.writeBigUInt64LE(BigInt(headerBuf.length), 0);

  const fd = openSync(path, 'w');
  try {
    writeSync(fd, lenBuf);
    writeSync(fd, headerBuf);
    for (const name of order) {
      const t = tensors.get(name)!;
      writeSync(fd, Buffer.from(t.data.buffer, t.data.byteOffset, t.data.byteLength));
    }
  } finally {
    closeSync(fd);
  }
}

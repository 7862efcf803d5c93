/**
 * BWCK checkpoint format (shared with the training toolkit).
 *
 * Layout, all integers unsigned 32-bit little-endian:
 *   magic "BWCK" | version | entry count
 *   per entry: name length, UTF-8 name, rank, dims..., raw float32 LE
 *   trailer:   metadata length, UTF-8 JSON
 */
import { openSync, writeSync, closeSync, readFileSync } from 'fs';

export const MAGIC = 'BWCK';
export const FORMAT_VERSION = 1;

export interface BwckTensor {
  name: string;
  dims: number[];
  data: Float32Array;
}

export interface BwckFile {
  version: number;
  entries: BwckTensor[];
  metadata: unknown;
}

export class BwckFormatError extends Error {
  constructor(message: string, readonly offset: number) {
    super(`${message} (at byte ${offset})`);
  }
}

function u32(value: number): Buffer {
  const buf = Buffer.alloc(4);
  buf.writeUInt32LE(value >>> 0, 0);
  return buf;
}

export function writeBwck(path: string, entries: BwckTensor[], metadata: unknown): void {
  const fd = openSync(path, 'w');
  try {
    writeSync(fd, Buffer.from(MAGIC, 'ascii'));
    writeSync(fd, u32(FORMAT_VERSION));
    writeSync(fd, u32(entries.length));
    for (const entry of entries) {
      const count = entry.dims.reduce((a, b) => a * b, 1);
      if (count !== entry.data.length) {
        throw new Error(
          `${entry.name}: dims [${entry.dims}] imply ${count} values, got ${entry.data.length}`);
      }
      const name = Buffer.from(entry.name, 'utf8');
      writeSync(fd, u32(name.length));
      writeSync(fd, name);
      writeSync(fd, u32(entry.dims.length));
      for (const d of entry.dims) writeSync(fd, u32(d));
      // Float32Array is little-endian on every platform node supports
      writeSync(fd, Buffer.from(entry.data.buffer, entry.data.byteOffset, entry.data.byteLength));
    }
    const meta = Buffer.from(JSON.stringify(metadata), 'utf8');
    writeSync(fd, u32(meta.length));
    writeSync(fd, meta);
  } finally {
    closeSync(fd);
  }
}

class Reader {
  pos = 0;
  constructor(readonly blob: Buffer) {}

  take(n: number, what: string): Buffer {
    if (this.pos + n > this.blob.length) {
      throw new BwckFormatError(`truncated while reading ${what}`, this.pos);
    }
    const out = this.blob.subarray(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }

  u32(what: string): number {
    return this.take(4, what).readUInt32LE(0);
  }
}

export function readBwck(path: string): BwckFile {
  const r = new Reader(readFileSync(path));
  if (r.take(4, 'magic').toString('ascii') !== MAGIC) {
    throw new BwckFormatError('bad magic bytes, not a BWCK file', 0);
  }
  const version = r.u32('format version');
  if (version > FORMAT_VERSION) {
    throw new BwckFormatError(
      `format version ${version} newer than supported ${FORMAT_VERSION}`, 4);
  }
  const count = r.u32('entry count');
  const entries: BwckTensor[] = [];
  for (let i = 0; i < count; i++) {
    const nameLen = r.u32('entry name length');
    const name = r.take(nameLen, 'entry name').toString('utf8');
    const rank = r.u32(`rank of ${name}`);
    const dims: number[] = [];
    for (let d = 0; d < rank; d++) dims.push(r.u32(`dims of ${name}`));
    const n = dims.reduce((a, b) => a * b, 1);
    const raw = r.take(4 * n, `values of ${name}`);
    const data = new Float32Array(n);
    // copy: raw may not be 4-byte aligned within the file buffer
    new Uint8Array(data.buffer).set(raw);
    entries.push({ name, dims, data });
  }
  const metaAt = r.pos;
  const metaLen = r.u32('metadata length');
  const metaRaw = r.take(metaLen, 'metadata JSON');
  if (r.pos !== r.blob.length) {
    throw new BwckFormatError('unexpected trailing data', r.pos);
  }
  let metadata: unknown;
  try {
    metadata = JSON.parse(metaRaw.toString('utf8'));
  } catch (err) {
    throw new BwckFormatError(`bad metadata block: ${err}`, metaAt);
  }
  return { version, entries, metadata };
}

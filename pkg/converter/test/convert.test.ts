import { mkdtempSync, rmSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';
import { afterAll, describe, expect, it } from 'vitest';

import { readBwck } from '../src/bwck.js';
import { ConversionError, convert, convertTensors } from '../src/convert.js';
import { canonicalLayerMap } from '../src/layermap.js';
import { writeSafetensors } from '../src/safetensors.js';
import { syntheticCheckpoint } from './helpers.js';

const dir = mkdtempSync(join(tmpdir(), 'convert-'));
afterAll(() => rmSync(dir, { recursive: true, force: true }));

describe('canonicalLayerMap', () => {
  it('covers all 16 weight/bias tensors of the 8 weight layers', () => {
    const map = canonicalLayerMap();
    expect(map).toHaveLength(16);
    const names = map.map((e) => e.target);
    for (const layer of ['conv1', 'conv2', 'conv3', 'conv4', 'conv5',
      'fc6', 'fc7', 'fc8']) {
      expect(names).toContain(`${layer}.weight`);
      expect(names).toContain(`${layer}.bias`);
    }
  });

  it('declares transposes only for fully connected weights', () => {
    for (const entry of canonicalLayerMap()) {
      const expectTranspose = entry.source.startsWith('fc') &&
        entry.source.endsWith('.weight');
      expect(entry.transpose).toBe(expectTranspose);
    }
  });
});

describe('convertTensors', () => {
  it('produces 16 entries in canonical layer order', () => {
    const entries = convertTensors(syntheticCheckpoint());
    expect(entries.map((e) => e.name)).toEqual([
      'conv1.weight', 'conv1.bias', 'conv2.weight', 'conv2.bias',
      'conv3.weight', 'conv3.bias', 'conv4.weight', 'conv4.bias',
      'conv5.weight', 'conv5.bias', 'fc6.weight', 'fc6.bias',
      'fc7.weight', 'fc7.bias', 'fc8.weight', 'fc8.bias',
    ]);
  });

  it('keeps conv1 weights OIHW with dims 96x3x11x11', () => {
    const entries = convertTensors(syntheticCheckpoint());
    const conv1 = entries.find((e) => e.name === 'conv1.weight')!;
    expect(conv1.dims).toEqual([96, 3, 11, 11]);
  });

  it('transposes fc weights to [in, out] without losing bits', () => {
    const source = syntheticCheckpoint();
    const entries = convertTensors(source);
    const fc8 = entries.find((e) => e.name === 'fc8.weight')!;
    expect(fc8.dims).toEqual([4096, 1000]);
    const src = source.get('fc8.weight')!;        // [1000, 4096]
    const srcBits = new Uint32Array(src.data.buffer);
    const dstBits = new Uint32Array(fc8.data.buffer);
    // spot-check the full first row/column pair
    for (let c = 0; c < 4096; c++) {
      expect(dstBits[c * 1000]).toBe(srcBits[c]);
    }
  });

  it('copies untransposed tensors bit-for-bit', () => {
    const source = syntheticCheckpoint();
    const entries = convertTensors(source);
    const conv3 = entries.find((e) => e.name === 'conv3.weight')!;
    expect(conv3.data).toBe(source.get('conv3.weight')!.data);
  });

  it('names a missing bias tensor', () => {
    const source = syntheticCheckpoint();
    source.delete('conv4.bias');
    expect(() => convertTensors(source)).toThrowError(/missing tensor conv4\.bias/);
  });

  it('names a mis-shaped tensor with both shapes', () => {
    const source = syntheticCheckpoint();
    source.set('conv2.weight', { shape: [256, 96, 5, 5],
      data: new Float32Array(256 * 96 * 25) });
    expect(() => convertTensors(source))
      .toThrowError(/conv2\.weight.*256,96,5,5.*256,48,5,5/);
  });

  it('rejects unmapped trainable tensors', () => {
    const source = syntheticCheckpoint();
    source.set('fc9.weight', { shape: [10, 10], data: new Float32Array(100) });
    expect(() => convertTensors(source)).toThrowError(/fc9\.weight/);
    expect(() => convertTensors(source)).toThrowError(ConversionError);
  });
});

describe('convert (file to file)', () => {
  it('writes a BWCK whose values round-trip bit-equal to the source', () => {
    const source = syntheticCheckpoint(7);
    const srcPath = join(dir, 'src.safetensors');
    const outPath = join(dir, 'out.bwck');
    writeSafetensors(srcPath, source);
    const result = convert(srcPath, outPath);
    expect(result.entries).toBe(16);

    const file = readBwck(outPath);
    const conv1 = file.entries.find((e) => e.name === 'conv1.weight')!;
    const srcBits = new Uint32Array(source.get('conv1.weight')!.data.buffer);
    const dstBits = new Uint32Array(conv1.data.buffer);
    expect(dstBits).toEqual(srcBits);
    const meta = file.metadata as { spec: { num_classes: number; layers: unknown[] } };
    expect(meta.spec.num_classes).toBe(1000);
    expect(meta.spec.layers).toHaveLength(22);
  });
});

/**
 * Mapping from source-checkpoint tensor names to the BWCK layer
 * identifiers, with per-tensor expected shapes and explicit layout
 * transforms. Silent transposition is forbidden: fully connected
 * weights are stored [out, in] by the usual frameworks but [in, out]
 * in BWCK, and the map says so tensor by tensor.
 *
 * Only the canonical grouped AlexNet (5 conv + 3 FC, LRN, ~61M
 * parameters, 1000-way head) is supported.
 */

export interface MapEntry {
  /** tensor name in the source checkpoint */
  source: string;
  /** entry name in the BWCK output */
  target: string;
  /** expected source shape */
  shape: number[];
  /** transpose a 2D [out, in] weight to the artifact's [in, out] */
  transpose: boolean;
}

const CONV: Array<[string, number[], number]> = [
  // name, weight shape [K, C/groups, kh, kw], groups
  ['conv1', [96, 3, 11, 11], 1],
  ['conv2', [256, 48, 5, 5], 2],
  ['conv3', [384, 256, 3, 3], 1],
  ['conv4', [384, 192, 3, 3], 2],
  ['conv5', [256, 192, 3, 3], 2],
];

const FC: Array<[string, number, number]> = [
  // name, in features, out features (artifact orientation)
  ['fc6', 9216, 4096],
  ['fc7', 4096, 4096],
  ['fc8', 4096, 1000],
];

export function canonicalLayerMap(): MapEntry[] {
  const entries: MapEntry[] = [];
  for (const [name, shape] of CONV) {
    entries.push({ source: `${name}.weight`, target: `${name}.weight`, shape, transpose: false });
    entries.push({ source: `${name}.bias`, target: `${name}.bias`, shape: [shape[0]], transpose: false });
  }
  for (const [name, inF, outF] of FC) {
    entries.push({ source: `${name}.weight`, target: `${name}.weight`, shape: [outF, inF], transpose: true });
    entries.push({ source: `${name}.bias`, target: `${name}.bias`, shape: [outF], transpose: false });
  }
  return entries;
}

/** Canonical AlexNet hyperparameters, used for the reference forward pass. */
export const ARCH = {
  inputSize: [3, 227, 227] as const,
  conv: [
    { name: 'conv1', out: 96, kernel: 11, stride: 4, pad: 0, groups: 1, in: 3 },
    { name: 'conv2', out: 256, kernel: 5, stride: 1, pad: 2, groups: 2, in: 96 },
    { name: 'conv3', out: 384, kernel: 3, stride: 1, pad: 1, groups: 1, in: 256 },
    { name: 'conv4', out: 384, kernel: 3, stride: 1, pad: 1, groups: 2, in: 384 },
    { name: 'conv5', out: 256, kernel: 3, stride: 1, pad: 1, groups: 2, in: 384 },
  ],
  lrn: { depth: 5, bias: 2.0, alpha: 1e-4, beta: 0.75 },
  pool: { window: 3, stride: 2 },
  dropoutRate: 0.5,
};

/**
 * The metadata JSON block the training toolkit embeds in (and expects
 * from) a BWCK file: the canonical network spec plus training info.
 */
export function canonicalMetadata(numClasses = 1000): unknown {
  const lrn = { kind: 'lrn', depth: 5, bias: 2.0, alpha: 1e-4, beta: 0.75 };
  const pool = { kind: 'maxpool', window: 3, stride: 2 };
  const relu = { kind: 'relu' };
  const conv = (name: string, i: number) => ({
    kind: 'conv',
    name,
    kernel: [ARCH.conv[i].kernel, ARCH.conv[i].kernel],
    stride: ARCH.conv[i].stride,
    padding: ARCH.conv[i].pad,
    in_channels: ARCH.conv[i].in,
    out_channels: ARCH.conv[i].out,
    groups: ARCH.conv[i].groups,
    trainable: true,
  });
  const linear = (name: string, inF: number, outF: number) => ({
    kind: 'linear', name, in_features: inF, out_features: outF, trainable: true,
  });
  return {
    spec: {
      input_size: [3, 227, 227],
      num_classes: numClasses,
      layers: [
        conv('conv1', 0), relu, lrn, pool,
        conv('conv2', 1), relu, lrn, pool,
        conv('conv3', 2), relu,
        conv('conv4', 3), relu,
        conv('conv5', 4), relu, pool,
        linear('fc6', 9216, 4096), relu, { kind: 'dropout', rate: 0.5 },
        linear('fc7', 4096, 4096), relu, { kind: 'dropout', rate: 0.5 },
        linear('fc8', 4096, numClasses),
      ],
    },
    training: { epochs_completed: 0, seed: 0, config_digest: '' },
  };
}

/**
 * Conversion verification: run the source-framework reference forward
 * and the training toolkit (through its CLI, the only surface this
 * package consumes) on the same probe images, then report top-1
 * agreement and the max absolute logit difference.
 */
import { execFile } from 'child_process';
import { readdirSync } from 'fs';
import { join } from 'path';
import { promisify } from 'util';

import { decodeBmp } from './bmp.js';
import { readBwck } from './bwck.js';
import { canonicalLayerMap } from './layermap.js';
import { prepare } from './preprocess.js';
import { alexnetLogits } from './reference.js';
import { readSafetensors } from './safetensors.js';

const execFileAsync = promisify(execFile);

export class EnvironmentError extends Error {}

export interface ProbeResult {
  probe: string;
  referenceTop1: number;
  toolkitTop1: number;
  maxAbsDiff: number;
}

export interface VerifyReport {
  probes: ProbeResult[];
  top1Agreement: number;
  maxAbsLogitDiff: number;
  conversionLossless: boolean;
  pass: boolean;
}

export const AGREEMENT_THRESHOLD = 1.0;
export const LOGIT_DIFF_THRESHOLD = 1e-3;

function argmax(values: Float32Array | number[]): number {
  let best = 0;
  for (let i = 1; i < values.length; i++) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

/** Bitwise comparison of BWCK entries against the mapped source tensors. */
export function checkLossless(srcPath: string, bwckPath: string): boolean {
  const source = readSafetensors(srcPath);
  const bwck = readBwck(bwckPath);
  const byName = new Map(bwck.entries.map((e) => [e.name, e]));
  for (const entry of canonicalLayerMap()) {
    const src = source.get(entry.source);
    const dst = byName.get(entry.target);
    if (!src || !dst) return false;
    const srcBits = new Uint32Array(src.data.buffer, src.data.byteOffset, src.data.length);
    const dstBits = new Uint32Array(dst.data.buffer, dst.data.byteOffset, dst.data.length);
    if (srcBits.length !== dstBits.length) return false;
    if (entry.transpose) {
      const [rows, cols] = src.shape;
      for (let r = 0; r < rows; r++) {
        for (let c = 0; c < cols; c++) {
          if (srcBits[r * cols + c] !== dstBits[c * rows + r]) return false;
        }
      }
    } else {
      for (let i = 0; i < srcBits.length; i++) {
        if (srcBits[i] !== dstBits[i]) return false;
      }
    }
  }
  return true;
}

async function toolkitLogits(
  bwckPath: string, probePaths: string[], python: string,
): Promise<Float32Array[]> {
  const args = ['-m', 'burncnn.cli', 'predict', '--checkpoint', bwckPath, '--raw', ...probePaths];
  let stdout: string;
  try {
    ({ stdout } = await execFileAsync(python, args, { maxBuffer: 256 * 1024 * 1024 }));
  } catch (err: unknown) {
    const e = err as NodeJS.ErrnoException & { stderr?: string };
    if (e.code === 'ENOENT') {
      throw new EnvironmentError(`python interpreter not found: ${python}`);
    }
    throw new EnvironmentError(
      `toolkit predict failed (is the burncnn package installed?): ${e.stderr ?? e.message}`);
  }
  const logits: Float32Array[] = [];
  for (const line of stdout.split('\n')) {
    if (line.startsWith('logits=')) {
      logits.push(Float32Array.from(line.slice('logits='.length).split(',').map(Number)));
    }
  }
  if (logits.length !== probePaths.length) {
    throw new EnvironmentError(
      `expected ${probePaths.length} logit lines from the toolkit, got ${logits.length}`);
  }
  return logits;
}

export interface VerifyOptions {
  python?: string;
}

export async function verify(
  srcPath: string, bwckPath: string, probesDir: string, options: VerifyOptions = {},
): Promise<VerifyReport> {
  const python = options.python ?? process.env.BURNCNN_PYTHON ?? 'python3';
  const probeFiles = readdirSync(probesDir)
    .filter((f) => f.toLowerCase().endsWith('.bmp'))
    .sort()
    .map((f) => join(probesDir, f));

  const report: VerifyReport = {
    probes: [],
    top1Agreement: 0,
    maxAbsLogitDiff: 0,
    conversionLossless: false,
    pass: false,
  };
  if (probeFiles.length === 0) {
    return report; // empty results; callers treat this as failure
  }

  // toolkit first: fails fast when the interpreter or package is missing
  const toolkit = await toolkitLogits(bwckPath, probeFiles, python);
  report.conversionLossless = checkLossless(srcPath, bwckPath);
  const source = readSafetensors(srcPath);
  const reference = probeFiles.map((p) => alexnetLogits(prepare(decodeBmp(p)), source));

  let agreements = 0;
  for (let i = 0; i < probeFiles.length; i++) {
    let maxDiff = 0;
    for (let j = 0; j < reference[i].length; j++) {
      const diff = Math.abs(reference[i][j] - toolkit[i][j]);
      if (diff > maxDiff) maxDiff = diff;
    }
    const refTop = argmax(reference[i]);
    const toolTop = argmax(toolkit[i]);
    if (refTop === toolTop) agreements += 1;
    report.probes.push({
      probe: probeFiles[i],
      referenceTop1: refTop,
      toolkitTop1: toolTop,
      maxAbsDiff: maxDiff,
    });
    report.maxAbsLogitDiff = Math.max(report.maxAbsLogitDiff, maxDiff);
  }
  report.top1Agreement = agreements / probeFiles.length;
  report.pass = report.conversionLossless
    && report.top1Agreement >= AGREEMENT_THRESHOLD
    && report.maxAbsLogitDiff <= LOGIT_DIFF_THRESHOLD;
  return report;
}

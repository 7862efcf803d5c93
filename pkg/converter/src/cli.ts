#!/usr/bin/env node
/**
 * Offline weight conversion tool.
 *
 *   convert --src <alexnet.safetensors> --out <weights.bwck>
 *   verify  --src <alexnet.safetensors> --bwck <weights.bwck> --probes <dir>
 *
 * Exit codes mirror the training toolkit: 0 success, 2 input/validation
 * error, 4 I/O failure.
 */
import { ConversionError, convert } from './convert.js';
import { SafetensorsError } from './safetensors.js';
import { BwckFormatError } from './bwck.js';
import { EnvironmentError, verify } from './verify.js';

const EXIT_OK = 0;
const EXIT_VALIDATION = 2;
const EXIT_IO = 4;

function parseFlags(argv: string[], allowed: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith('--') || !allowed.includes(key.slice(2))) {
      throw new ConversionError(`unknown argument ${key}`);
    }
    const value = argv[i + 1];
    if (value === undefined) {
      throw new ConversionError(`flag ${key} needs a value`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (!value) throw new ConversionError(`--${name} is required`);
  return value;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    if (command === 'convert') {
      const flags = parseFlags(rest, ['src', 'out']);
      const result = convert(required(flags, 'src'), required(flags, 'out'));
      console.log(`wrote ${flags.get('out')} with ${result.entries} tensor entries`);
      return EXIT_OK;
    }
    if (command === 'verify') {
      const flags = parseFlags(rest, ['src', 'bwck', 'probes', 'python']);
      const report = await verify(
        required(flags, 'src'), required(flags, 'bwck'), required(flags, 'probes'),
        { python: flags.get('python') });
      console.log(JSON.stringify(report, null, 2));
      if (report.probes.length === 0) {
        console.error('error: no probe images (*.bmp) found');
        return EXIT_VALIDATION;
      }
      console.log(`top-1 agreement ${(report.top1Agreement * 100).toFixed(1)}% ` +
        `max |logit diff| ${report.maxAbsLogitDiff.toExponential(2)} ` +
        `lossless ${report.conversionLossless} -> ${report.pass ? 'PASS' : 'FAIL'}`);
      return report.pass ? EXIT_OK : EXIT_VALIDATION;
    }
    console.error('usage: convert --src <file> --out <file> | ' +
      'verify --src <file> --bwck <file> --probes <dir>');
    return EXIT_VALIDATION;
  } catch (err) {
    if (err instanceof ConversionError || err instanceof SafetensorsError ||
        err instanceof BwckFormatError || err instanceof EnvironmentError) {
      console.error(`error: ${err.message}`);
      return EXIT_VALIDATION;
    }
    if (err instanceof Error && 'code' in err) {
      console.error(`error: ${err.message}`);
      return EXIT_IO;
    }
    throw err;
  }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split('/').pop() ?? '');
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}

/**
 * Reader for the pipeline's TSV manifest contract.
 *
 * Format, bit-exact with the producer:
 *   line 1: `#inkline-manifest v1<TAB>seed=N<TAB>config=F`
 *   line 2: tab-joined column names (fixed order)
 *   lines 3+: one record per line, 7 tab-separated fields
 * All parse errors carry 1-based line numbers.
 */

import { readFileSync } from 'node:fs';

export const MANIFEST_MAGIC = '#inkline-manifest';
export const MANIFEST_VERSION = 'v1';
export const COLUMNS = [
  'sample_id',
  'writer_id',
  'image_path',
  'split',
  'augmentation',
  'source_page',
  'line_index',
] as const;

export type SplitName = 'train' | 'val' | 'test' | 'unassigned';
const SPLITS: readonly SplitName[] = ['train', 'val', 'test', 'unassigned'];

const TAG_RE = /^(original|thinned:(ok|floored)|noised:off=\d+|stretched:f=-?\d+(\.\d+)?([eE][-+]?\d+)?)$/;

export class ManifestFormatError extends Error {
  constructor(
    public readonly lineNo: number,
    message: string,
  ) {
    super(`line ${lineNo}: ${message}`);
  }
}

export interface SampleRecord {
  sampleId: string;
  writerId: string;
  imagePath: string;
  split: SplitName;
  augmentation: string;
  sourcePage: string;
  lineIndex: number;
}

export interface Manifest {
  records: SampleRecord[];
  seed: number;
  configFingerprint: string;
}

function parseHeader(line: string): { seed: number; fingerprint: string } {
  const fields = line.split('\t');
  const magic = (fields[0] ?? '').split(' ');
  if (magic.length !== 2 || magic[0] !== MANIFEST_MAGIC) {
    throw new ManifestFormatError(1, `not a manifest file (expected '${MANIFEST_MAGIC}')`);
  }
  if (magic[1] !== MANIFEST_VERSION) {
    throw new ManifestFormatError(1, `unsupported manifest version '${magic[1]}'`);
  }
  if (fields.length !== 3 || !fields[1]!.startsWith('seed=') || !fields[2]!.startsWith('config=')) {
    throw new ManifestFormatError(1, "header must be '#inkline-manifest v1<TAB>seed=N<TAB>config=F'");
  }
  const seedToken = fields[1]!.slice(5);
  if (!/^-?\d+$/.test(seedToken)) {
    throw new ManifestFormatError(1, `seed is not an integer: '${fields[1]}'`);
  }
  return { seed: Number(seedToken), fingerprint: fields[2]!.slice(7) };
}

export function parseManifestText(text: string): Manifest {
  const lines = text.split('\n');
  if (lines.length > 0 && lines[lines.length - 1] === '') lines.pop();
  if (lines.length < 2) {
    throw new ManifestFormatError(1, 'manifest must have a header and a column line');
  }
  const { seed, fingerprint } = parseHeader(lines[0]!);
  const columns = lines[1]!.split('\t');
  if (columns.length !== COLUMNS.length || columns.some((c, i) => c !== COLUMNS[i])) {
    const unknown = columns.find((c) => !(COLUMNS as readonly string[]).includes(c));
    if (unknown !== undefined) throw new ManifestFormatError(2, `unknown column '${unknown}'`);
    throw new ManifestFormatError(2, `columns must be exactly ${JSON.stringify(COLUMNS)}`);
  }

  const records: SampleRecord[] = [];
  const seen = new Set<string>();
  for (let i = 2; i < lines.length; i++) {
    const lineNo = i + 1;
    const line = lines[i]!;
    if (line === '') throw new ManifestFormatError(lineNo, 'blank line inside manifest body');
    const fields = line.split('\t');
    if (fields.length !== COLUMNS.length) {
      throw new ManifestFormatError(lineNo, `expected ${COLUMNS.length} fields, got ${fields.length}`);
    }
    const [sampleId, writerId, imagePath, splitToken, tag, sourcePage, lineToken] = fields as [
      string, string, string, string, string, string, string,
    ];
    if (!sampleId || !writerId || !imagePath) {
      throw new ManifestFormatError(lineNo, 'sample_id, writer_id and image_path must be nonempty');
    }
    if (seen.has(sampleId)) throw new ManifestFormatError(lineNo, `duplicate sample_id '${sampleId}'`);
    seen.add(sampleId);
    if (!(SPLITS as readonly string[]).includes(splitToken)) {
      throw new ManifestFormatError(lineNo, `unknown split '${splitToken}'`);
    }
    if (!TAG_RE.test(tag)) throw new ManifestFormatError(lineNo, `unknown augmentation tag '${tag}'`);
    if (!/^-?\d+$/.test(lineToken)) {
      throw new ManifestFormatError(lineNo, `line_index is not an integer: '${lineToken}'`);
    }
    const lineIndex = Number(lineToken);
    if (lineIndex < -1) throw new ManifestFormatError(lineNo, `line_index must be >= -1, got ${lineIndex}`);
    records.push({
      sampleId,
      writerId,
      imagePath,
      split: splitToken as SplitName,
      augmentation: tag,
      sourcePage,
      lineIndex,
    });
  }
  return { records, seed, configFingerprint: fingerprint };
}

export function readManifest(path: string): Manifest {
  let text: string;
  try {
    text = readFileSync(path, 'utf-8');
  } catch {
    throw new ManifestFormatError(0, `manifest file not found: ${path}`);
  }
  return parseManifestText(text);
}

export function writers(manifest: Manifest): string[] {
  return [...new Set(manifest.records.map((r) => r.writerId))].sort();
}

export function bySplit(manifest: Manifest, split: SplitName): SampleRecord[] {
  return manifest.records.filter((r) => r.split === split);
}

/** Reject manifests that cannot drive training: every record assigned and
 * every writer present in train, val and test. */
export function requireCompleteSplit(manifest: Manifest): void {
  const unassigned = manifest.records.filter((r) => r.split === 'unassigned');
  if (unassigned.length > 0) {
    throw new Error(
      `${unassigned.length} records have no split assignment (first: '${unassigned[0]!.sampleId}')`,
    );
  }
  for (const writer of writers(manifest)) {
    for (const split of ['train', 'val', 'test'] as const) {
      if (!manifest.records.some((r) => r.writerId === writer && r.split === split)) {
        throw new Error(`writer '${writer}' has no ${split} samples`);
      }
    }
  }
}

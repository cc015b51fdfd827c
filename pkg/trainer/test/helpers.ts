/** Test fixtures: a minimal grayscale PNG encoder and a synthetic corpus
 * written in the exact manifest format the pipeline produces. */

import { mkdirSync, writeFileSync } from 'node:fs';
import * as path from 'node:path';
import { deflateSync } from 'node:zlib';

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (const byte of buf) c = CRC_TABLE[(c ^ byte) & 0xff]! ^ (c >>> 8);
  return (c ^ 0xffffffff) >>> 0;
}

export const PNG_SIG = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export function pngChunk(kind: string, body: Buffer): Buffer {
  const head = Buffer.alloc(4);
  head.writeUInt32BE(body.length);
  const tagged = Buffer.concat([Buffer.from(kind, 'latin1'), body]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(tagged));
  return Buffer.concat([head, tagged, crc]);
}

/** 8-bit grayscale, color type 0, filter 0 on every scanline. */
export function encodeGrayPng(width: number, height: number, pixels: Uint8Array): Buffer {
  if (pixels.length !== width * height) throw new Error('pixel count mismatch');
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // grayscale
  const raw = Buffer.alloc(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0;
    raw.set(pixels.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  return Buffer.concat([
    PNG_SIG,
    pngChunk('IHDR', ihdr),
    pngChunk('IDAT', deflateSync(raw)),
    pngChunk('IEND', Buffer.alloc(0)),
  ]);
}

function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0;
    return state / 4294967296;
  };
}

/** A writer-distinctive square image: stripes whose period and phase depend
 * on the writer, plus deterministic speckle. */
export function writerImage(writer: number, sample: number, size: number): Uint8Array {
  const rand = lcg(writer * 7919 + sample * 104729 + 17);
  const period = 6 + (writer % 7) * 3;
  const phase = (writer * 5) % period;
  const pixels = new Uint8Array(size * size);
  for (let y = 0; y < size; y++) {
    const stripe = (y + phase) % period < period / 2 ? 40 : 230;
    for (let x = 0; x < size; x++) {
      const jitter = Math.floor(rand() * 30) - 15;
      pixels[y * size + x] = Math.min(255, Math.max(0, stripe + jitter));
    }
  }
  return pixels;
}

export interface CorpusSpec {
  writers: number;
  perSplit: { train: number; val: number; test: number };
  size: number;
}

/** Write images plus a manifest byte-compatible with the pipeline's format;
 * returns the manifest path. */
export function makeCorpus(dir: string, spec: CorpusSpec): string {
  const rows: string[] = [];
  for (let w = 0; w < spec.writers; w++) {
    const writerId = `w${String(w).padStart(2, '0')}`;
    mkdirSync(path.join(dir, writerId), { recursive: true });
    let sample = 0;
    for (const [split, count] of Object.entries(spec.perSplit)) {
      for (let i = 0; i < count; i++, sample++) {
        const rel = `${writerId}/s${String(sample).padStart(3, '0')}.png`;
        writeFileSync(
          path.join(dir, rel),
          encodeGrayPng(spec.size, spec.size, writerImage(w, sample, spec.size)),
        );
        rows.push(
          [
            `${writerId}_s${sample}`,
            writerId,
            rel,
            split,
            'original',
            `p${sample}`,
            '0',
          ].join('\t'),
        );
      }
    }
  }
  const manifestPath = path.join(dir, 'manifest.tsv');
  const header = '#inkline-manifest v1\tseed=0\tconfig=fixture';
  const columns = 'sample_id\twriter_id\timage_path\tsplit\taugmentation\tsource_page\tline_index';
  writeFileSync(manifestPath, [header, columns, ...rows].join('\n') + '\n');
  return manifestPath;
}

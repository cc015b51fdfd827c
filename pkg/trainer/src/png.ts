/**
 * Minimal PNG reader for the pipeline's images: 8-bit, non-interlaced,
 * grayscale (color type 0). Everything else is rejected loudly rather
 * than silently mis-decoded.
 */

import { inflateSync } from 'node:zlib';

const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export class PngError extends Error {}

export interface GrayPng {
  width: number;
  height: number;
  /** Row-major 8-bit intensities, length width*height. */
  pixels: Uint8Array;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export function decodeGrayPng(data: Buffer, source = '<buffer>'): GrayPng {
  if (data.length < 8 || !data.subarray(0, 8).equals(PNG_SIGNATURE)) {
    throw new PngError(`${source}: not a PNG file`);
  }

  let width = 0;
  let height = 0;
  let sawHeader = false;
  const idatParts: Buffer[] = [];
  let offset = 8;
  while (offset + 8 <= data.length) {
    const length = data.readUInt32BE(offset);
    const kind = data.toString('latin1', offset + 4, offset + 8);
    const body = data.subarray(offset + 8, offset + 8 + length);
    if (body.length < length) throw new PngError(`${source}: truncated ${kind} chunk`);
    if (kind === 'IHDR') {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      const bitDepth = body[8];
      const colorType = body[9];
      const interlace = body[12];
      if (bitDepth !== 8 || colorType !== 0) {
        throw new PngError(
          `${source}: only 8-bit grayscale PNGs are supported ` +
            `(bit depth ${bitDepth}, color type ${colorType})`,
        );
      }
      if (interlace !== 0) throw new PngError(`${source}: interlaced PNGs are not supported`);
      sawHeader = true;
    } else if (kind === 'IDAT') {
      idatParts.push(body);
    } else if (kind === 'IEND') {
      break;
    }
    offset += 12 + length; // length + kind + body + crc
  }
  if (!sawHeader || width < 1 || height < 1) throw new PngError(`${source}: missing IHDR`);
  if (idatParts.length === 0) throw new PngError(`${source}: missing IDAT`);

  let raw: Buffer;
  try {
    raw = inflateSync(Buffer.concat(idatParts));
  } catch (err) {
    throw new PngError(`${source}: corrupt image data (${(err as Error).message})`);
  }
  const stride = width + 1; // one filter byte per scanline
  if (raw.length < stride * height) throw new PngError(`${source}: short image data`);

  const pixels = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * stride]!;
    const rowIn = y * stride + 1;
    const rowOut = y * width;
    for (let x = 0; x < width; x++) {
      const value = raw[rowIn + x]!;
      const left = x > 0 ? pixels[rowOut + x - 1]! : 0;
      const up = y > 0 ? pixels[rowOut - width + x]! : 0;
      const upLeft = y > 0 && x > 0 ? pixels[rowOut - width + x - 1]! : 0;
      let out: number;
      switch (filter) {
        case 0: out = value; break;
        case 1: out = value + left; break;
        case 2: out = value + up; break;
        case 3: out = value + ((left + up) >> 1); break;
        case 4: out = value + paeth(left, up, upLeft); break;
        default: throw new PngError(`${source}: unknown scanline filter ${filter}`);
      }
      pixels[rowOut + x] = out & 0xff;
    }
  }
  return { width, height, pixels };
}

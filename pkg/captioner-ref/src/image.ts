/**
 * Image loading. JPEG and PNG are sniffed by magic bytes and decoded
 * to flat RGBA, which is all the feature extractor needs.
 */

import jpeg from "jpeg-js";
import { PNG } from "pngjs";

export interface RgbaImage {
  width: number;
  height: number;
  /** RGBA, 4 bytes per pixel, rows top to bottom. */
  data: Buffer;
}

const JPEG_MAGIC = Buffer.from([0xff, 0xd8, 0xff]);
const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47]);

export function decodeImage(bytes: Buffer): RgbaImage {
  if (bytes.subarray(0, 3).equals(JPEG_MAGIC)) {
    const out = jpeg.decode(bytes, { useTArray: true, formatAsRGBA: true });
    return { width: out.width, height: out.height, data: Buffer.from(out.data) };
  }
  if (bytes.subarray(0, 4).equals(PNG_MAGIC)) {
    const out = PNG.sync.read(bytes);
    return { width: out.width, height: out.height, data: out.data };
  }
  throw new Error("unsupported image format");
}

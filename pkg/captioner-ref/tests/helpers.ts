import { spawn } from "node:child_process";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import jpeg from "jpeg-js";
import { PNG } from "pngjs";
import type { RgbaImage } from "../src/image.js";

export const MAIN_JS = join(
  dirname(fileURLToPath(import.meta.url)),
  "..",
  "dist",
  "main.js",
);

export interface RunResult {
  code: number | null;
  stdout: string;
  stderr: string;
}

/** Spawn the built plugin, feed it stdin lines, wait for exit. */
export function runPlugin(
  lines: string[],
  env: Record<string, string> = {},
  args: string[] = [],
): Promise<RunResult> {
  return new Promise((resolve, reject) => {
    const child = spawn("node", [MAIN_JS, ...args], {
      env: { ...process.env, ...env },
      stdio: ["pipe", "pipe", "pipe"],
    });
    let stdout = "";
    let stderr = "";
    child.stdout.on("data", (d) => (stdout += d));
    child.stderr.on("data", (d) => (stderr += d));
    child.on("error", reject);
    child.on("close", (code) => resolve({ code, stdout, stderr }));
    for (const line of lines) {
      child.stdin.write(`${line}\n`);
    }
    child.stdin.end();
  });
}

/** Deterministic PRNG so fixture pixels are stable across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function solidImage(
  width: number,
  height: number,
  r: number,
  g: number,
  b: number,
): RgbaImage {
  const data = Buffer.alloc(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    data[i * 4] = r;
    data[i * 4 + 1] = g;
    data[i * 4 + 2] = b;
    data[i * 4 + 3] = 255;
  }
  return { width, height, data };
}

export function noiseImage(width: number, height: number, seed: number): RgbaImage {
  const rand = mulberry32(seed);
  const data = Buffer.alloc(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    data[i * 4] = Math.floor(rand() * 256);
    data[i * 4 + 1] = Math.floor(rand() * 256);
    data[i * 4 + 2] = Math.floor(rand() * 256);
    data[i * 4 + 3] = 255;
  }
  return { width, height, data };
}

export function gradientImage(width: number, height: number, channel: number): RgbaImage {
  const data = Buffer.alloc(width * height * 4);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4;
      data[i + channel] = Math.floor((x / (width - 1)) * 255);
      data[i + 3] = 255;
    }
  }
  return { width, height, data };
}

export function toPng(img: RgbaImage): Buffer {
  const png = new PNG({ width: img.width, height: img.height });
  img.data.copy(png.data);
  return PNG.sync.write(png);
}

export function toJpeg(img: RgbaImage, quality = 95): Buffer {
  return Buffer.from(
    jpeg.encode({ data: img.data, width: img.width, height: img.height }, quality).data,
  );
}

export function wordCount(caption: string): number {
  return caption.split(/\s+/).filter((w) => w !== "").length;
}

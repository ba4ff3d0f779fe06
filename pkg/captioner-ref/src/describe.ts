/**
 * The built-in "chroma-1" describing model.
 *
 * Captions are a pure function of the decoded pixels and the
 * generation settings: measured features (brightness, hue, texture,
 * contrast, layout) pick words from fixed tables, a hash of the
 * feature vector breaks ties, and the beam count rotates synonym
 * choices so different beam settings phrase the same image
 * differently. No randomness, no state, no network.
 */

import { createHash } from "node:crypto";
import { PluginConfig } from "./config.js";
import { RgbaImage } from "./image.js";

interface Features {
  meanLuma: number; // 0..255
  lumaStd: number;
  meanSat: number; // 0..1000
  hueShare: number[]; // per HUE_NAMES entry, in 1/1000 of colored pixels
  coloredShare: number; // 1/1000 of sampled pixels
  edgeEnergy: number; // mean abs neighbor luma delta, x10
  brightCell: number; // 0..8, 3x3 grid cell with the highest mean luma
  width: number;
  height: number;
}

const HUE_NAMES = [
  "red", "orange", "yellow", "green", "teal", "blue", "purple", "pink",
];
// Band upper bounds in degrees, wrapping: red owns [345, 15).
const HUE_BOUNDS = [15, 45, 70, 160, 200, 250, 290, 345];

function hueName(deg: number): number {
  for (let i = 0; i < HUE_BOUNDS.length; i++) {
    if (deg < HUE_BOUNDS[i]) {
      return i;
    }
  }
  return 0; // wraps back to red
}

export function extractFeatures(img: RgbaImage): Features {
  const { width, height, data } = img;
  const step = Math.max(1, Math.floor(Math.min(width, height) / 128));

  let n = 0;
  let lumaSum = 0;
  let lumaSq = 0;
  let satSum = 0;
  let colored = 0;
  const hueCounts = new Array(HUE_NAMES.length).fill(0);
  const cellSum = new Array(9).fill(0);
  const cellN = new Array(9).fill(0);
  let edgeSum = 0;
  let edgeN = 0;

  const lumaAt = (x: number, y: number) => {
    const i = (y * width + x) * 4;
    return 0.299 * data[i] + 0.587 * data[i + 1] + 0.114 * data[i + 2];
  };

  for (let y = 0; y < height; y += step) {
    for (let x = 0; x < width; x += step) {
      const i = (y * width + x) * 4;
      const r = data[i];
      const g = data[i + 1];
      const b = data[i + 2];
      const luma = 0.299 * r + 0.587 * g + 0.114 * b;
      n += 1;
      lumaSum += luma;
      lumaSq += luma * luma;

      const max = Math.max(r, g, b);
      const min = Math.min(r, g, b);
      const sat = max === 0 ? 0 : (max - min) / max;
      satSum += sat;
      if (sat > 0.25 && max > 40) {
        colored += 1;
        const d = max - min;
        let hue: number;
        if (max === r) {
          hue = 60 * (((g - b) / d) % 6);
        } else if (max === g) {
          hue = 60 * ((b - r) / d + 2);
        } else {
          hue = 60 * ((r - g) / d + 4);
        }
        if (hue < 0) {
          hue += 360;
        }
        hueCounts[hueName(hue)] += 1;
      }

      const cell = Math.min(2, Math.floor((3 * y) / height)) * 3 +
        Math.min(2, Math.floor((3 * x) / width));
      cellSum[cell] += luma;
      cellN[cell] += 1;

      if (x + step < width) {
        edgeSum += Math.abs(luma - lumaAt(x + step, y));
        edgeN += 1;
      }
      if (y + step < height) {
        edgeSum += Math.abs(luma - lumaAt(x, y + step));
        edgeN += 1;
      }
    }
  }

  const meanLuma = lumaSum / n;
  const variance = Math.max(0, lumaSq / n - meanLuma * meanLuma);
  let brightCell = 0;
  for (let c = 1; c < 9; c++) {
    const mean = cellN[c] ? cellSum[c] / cellN[c] : 0;
    const best = cellN[brightCell] ? cellSum[brightCell] / cellN[brightCell] : 0;
    if (mean > best) {
      brightCell = c;
    }
  }

  return {
    meanLuma: Math.round(meanLuma),
    lumaStd: Math.round(Math.sqrt(variance)),
    meanSat: Math.round((satSum / n) * 1000),
    hueShare: hueCounts.map((c) =>
      colored ? Math.round((c / colored) * 1000) : 0,
    ),
    coloredShare: Math.round((colored / n) * 1000),
    edgeEnergy: Math.round((edgeN ? edgeSum / edgeN : 0) * 10),
    brightCell,
    width,
    height,
  };
}

function band(value: number, bounds: number[], names: string[][]): string[] {
  for (let i = 0; i < bounds.length; i++) {
    if (value < bounds[i]) {
      return names[i];
    }
  }
  return names[names.length - 1];
}

const BRIGHTNESS = [
  ["very", "dark"], ["dark"], ["dim"], ["evenly", "lit"], ["bright"],
  ["very", "bright"],
];
const TEXTURE = [["flat"], ["smooth"], ["textured"], ["detailed"], ["busy"]];
const CONTRAST = [
  ["uniform", "tone"], ["low", "contrast"], ["moderate", "contrast"],
  ["high", "contrast"],
];
const SUBJECTS = ["image", "picture", "frame", "scene", "view"];
const CELL_PHRASES: string[][] = [
  ["the", "upper", "left"], ["the", "top", "edge"], ["the", "upper", "right"],
  ["the", "left", "side"], ["the", "center"], ["the", "right", "side"],
  ["the", "lower", "left"], ["the", "bottom", "edge"], ["the", "lower", "right"],
];
const PAD_RING = [
  "with", "steady", "exposure", "and", "plain", "framing", "over", "a",
  "gently", "graded", "tonal", "range",
];

/** Stable per-slot choice: hash of features, beams and the slot name. */
function pick<T>(items: T[], key: string, f: Features, beams: number): T {
  const digest = createHash("sha256")
    .update(`${featureKey(f)}|beams=${beams}|${key}`)
    .digest();
  return items[digest.readUInt32BE(0) % items.length];
}

function featureKey(f: Features): string {
  return [
    f.meanLuma, f.lumaStd, f.meanSat, f.coloredShare, f.edgeEnergy,
    f.brightCell, f.width, f.height, ...f.hueShare,
  ].join(",");
}

export function describe(img: RgbaImage, config: PluginConfig): string {
  const f = extractFeatures(img);
  const beams = config.beams;

  const brightness = band(f.meanLuma, [40, 90, 140, 190, 230], BRIGHTNESS);
  const subject = pick(SUBJECTS, "subject", f, beams);

  const words: string[] = ["a", ...brightness];
  const grayscale = f.meanSat < 80 || f.coloredShare < 100;
  let mainHue = 0;
  if (grayscale) {
    words.push("grayscale", subject);
  } else {
    for (let i = 1; i < f.hueShare.length; i++) {
      if (f.hueShare[i] > f.hueShare[mainHue]) {
        mainHue = i;
      }
    }
    const strength = f.meanSat < 250 ? ["muted"] : f.meanSat < 500 ? ["soft"] : ["vivid"];
    words.push(...strength, HUE_NAMES[mainHue], subject);
  }

  const extensions: string[][] = [
    ["with", ...band(f.edgeEnergy, [20, 80, 200, 450], TEXTURE), "texture"],
    ["and", ...band(f.lumaStd, [8, 30, 60], CONTRAST)],
    ["brightest", "near", ...CELL_PHRASES[f.brightCell]],
    [
      "in",
      "a",
      f.width > 1.15 * f.height ? "wide" : f.height > 1.15 * f.width ? "tall" : "square",
      "format",
    ],
  ];
  if (!grayscale) {
    let second = -1;
    for (let i = 0; i < f.hueShare.length; i++) {
      if (i !== mainHue && f.hueShare[i] > 100 &&
          (second === -1 || f.hueShare[i] > f.hueShare[second])) {
        second = i;
      }
    }
    if (second !== -1) {
      extensions.push(["leaning", "toward", HUE_NAMES[second], "tones"]);
    }
  }

  // Beams rotate which extension leads; the rest keep their order.
  const start = extensions.length
    ? createHash("sha256")
        .update(`${featureKey(f)}|beams=${beams}|order`)
        .digest()
        .readUInt32BE(0) % extensions.length
    : 0;
  const ordered = [...extensions.slice(start), ...extensions.slice(0, start)];

  for (const ext of ordered) {
    if (words.length >= config.minTokens) {
      break;
    }
    words.push(...ext);
  }
  let i = 0;
  while (words.length < config.minTokens) {
    words.push(PAD_RING[i % PAD_RING.length]);
    i += 1;
  }
  return words.slice(0, config.maxTokens).join(" ");
}

/**
 * Request handling for the caption line protocol.
 *
 * One request line maps to exactly one response line: `OK <caption>`
 * or `ERR <message>`, never anything else. Blank lines are not
 * requests and get no response.
 */

import { readFileSync } from "node:fs";
import { PluginConfig } from "./config.js";
import { decodeImage, RgbaImage } from "./image.js";

export type Model = (img: RgbaImage, config: PluginConfig) => string;

function oneLine(text: string): string {
  return text.replace(/\s+/g, " ").trim();
}

export function handleRequest(
  line: string,
  config: PluginConfig,
  model: Model,
): string | null {
  if (line.trim() === "") {
    return null;
  }
  if (!line.startsWith("CAPTION ")) {
    return "ERR malformed request";
  }
  const path = line.slice("CAPTION ".length).trim();
  let bytes: Buffer;
  try {
    bytes = readFileSync(path);
  } catch (error: unknown) {
    const code = (error as NodeJS.ErrnoException).code;
    if (code === "ENOENT" || code === "ENOTDIR") {
      return "ERR file not found";
    }
    return `ERR ${oneLine(String(error))}`;
  }
  try {
    const caption = oneLine(model(decodeImage(bytes), config));
    if (caption === "") {
      return "ERR empty caption";
    }
    return `OK ${caption}`;
  } catch (error: unknown) {
    const message = error instanceof Error ? error.message : String(error);
    return `ERR ${oneLine(message) || "caption failed"}`;
  }
}

#!/usr/bin/env node
/**
 * Caption plugin entry point.
 *
 * Speaks the line protocol on stdin/stdout; stdout carries nothing but
 * the one response line per request, diagnostics go to stderr, and EOF
 * on stdin is a clean shutdown. Generation settings come from
 * AVT_MIN_TOKENS, AVT_MAX_TOKENS and AVT_BEAMS.
 */

import { createInterface } from "node:readline";
import { parseArgs } from "node:util";
import { configFromEnv, PluginConfig } from "./config.js";
import { describe } from "./describe.js";
import { handleRequest, Model } from "./protocol.js";

const MODELS: Record<string, Model> = {
  "chroma-1": describe,
};

const { values } = parseArgs({
  options: {
    model: { type: "string" },
    device: { type: "string" },
  },
});

let config: PluginConfig;
try {
  config = configFromEnv(values.model, values.device);
} catch (error: unknown) {
  console.error(`avtk-captioner-ref: ${error instanceof Error ? error.message : error}`);
  process.exit(2);
}
const model = MODELS[config.model];
if (!model) {
  console.error(
    `avtk-captioner-ref: unknown model ${JSON.stringify(config.model)}; ` +
      `available: ${Object.keys(MODELS).join(", ")}`,
  );
  process.exit(2);
}
console.error(
  `avtk-captioner-ref: model ${config.model} on ${config.device}, ` +
    `${config.beams} beams, ${config.minTokens}..${config.maxTokens} tokens`,
);

const rl = createInterface({ input: process.stdin, terminal: false });
rl.on("line", (line) => {
  const response = handleRequest(line, config, model);
  if (response !== null) {
    process.stdout.write(`${response}\n`);
  }
});
rl.on("close", () => {
  process.exit(0);
});

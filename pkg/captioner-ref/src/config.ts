/**
 * Plugin configuration.
 *
 * Generation settings arrive from the host process as environment
 * variables; model and device are the plugin's own flags. Defaults
 * are 2 beams, 10..20 tokens.
 */

export interface PluginConfig {
  model: string;
  device: string;
  beams: number;
  minTokens: number;
  maxTokens: number;
}

export const DEFAULTS = {
  model: "chroma-1",
  device: "cpu",
  beams: 2,
  minTokens: 10,
  maxTokens: 20,
};

function intFromEnv(name: string, fallback: number): number {
  const raw = process.env[name];
  if (raw === undefined || raw === "") {
    return fallback;
  }
  const value = Number(raw);
  if (!Number.isInteger(value)) {
    throw new Error(`${name} must be an integer, got ${JSON.stringify(raw)}`);
  }
  return value;
}

export function configFromEnv(model?: string, device?: string): PluginConfig {
  const config: PluginConfig = {
    model: model ?? DEFAULTS.model,
    device: device ?? DEFAULTS.device,
    beams: intFromEnv("AVT_BEAMS", DEFAULTS.beams),
    minTokens: intFromEnv("AVT_MIN_TOKENS", DEFAULTS.minTokens),
    maxTokens: intFromEnv("AVT_MAX_TOKENS", DEFAULTS.maxTokens),
  };
  validate(config);
  return config;
}

export function validate(config: PluginConfig): void {
  if (config.beams < 1) {
    throw new Error(`beams must be at least 1, got ${config.beams}`);
  }
  if (config.minTokens < 1) {
    throw new Error(`min tokens must be at least 1, got ${config.minTokens}`);
  }
  if (config.maxTokens < config.minTokens) {
    throw new Error(
      `max tokens (${config.maxTokens}) below min tokens (${config.minTokens})`,
    );
  }
}

// Client-side command validation: a strict restatement of the server's
// rules, so no control can emit a request the service would reject.

import type { CommandSpec } from "./api.js";

export const MODES = ["AUTO", "MANUAL", "OFF"] as const;
export const CHANNELS = 8;
export const TEMP_MIN_TENTHS = -500;
export const TEMP_MAX_TENTHS = 1500;

const TEMP_LITERAL = /^-?[0-9]+\.[0-9]$/;

export function validateMode(mode: string): string | null {
  return (MODES as readonly string[]).includes(mode) ? null : `mode must be one of ${MODES.join(", ")}`;
}

export function validateChannelIndex(index: number): string | null {
  if (!Number.isInteger(index) || index < 0 || index >= CHANNELS) {
    return `channel index must be an integer 0..${CHANNELS - 1}`;
  }
  return null;
}

export function validateSetpoint(value: string): string | null {
  if (!TEMP_LITERAL.test(value)) {
    return "setpoint must be a decimal with exactly one fractional digit, e.g. 55.0";
  }
  const negative = value.startsWith("-");
  const [whole = "0", fraction = "0"] = value.replace("-", "").split(".");
  let tenths = parseInt(whole, 10) * 10 + parseInt(fraction, 10);
  if (negative) {
    tenths = -tenths;
  }
  if (tenths < TEMP_MIN_TENTHS || tenths > TEMP_MAX_TENTHS) {
    return "setpoint must be between -50.0 and 150.0";
  }
  return null;
}

export function validateCommand(spec: CommandSpec): string | null {
  switch (spec.kind) {
    case "SETMODE":
      return validateMode(spec.mode);
    case "SETPUMP":
      return validateChannelIndex(spec.index) ?? (spec.value === 0 || spec.value === 1 ? null : "pump value must be 0 or 1");
    case "SETSETPOINT":
      return validateChannelIndex(spec.index) ?? validateSetpoint(spec.value);
  }
}

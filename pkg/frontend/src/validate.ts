/** Client-side validation of the session config form. The server
 * validates too; this just blocks obviously bad submissions early. */

import type { SessionCreateRequest } from "./types.js";

export interface ConfigForm {
  datasetId: string;
  budget: string;
  tau: string;
  seed: string;
  trees: string;
  subsample: string;
}

export interface ValidationResult {
  ok: boolean;
  errors: Partial<Record<keyof ConfigForm, string>>;
  request?: SessionCreateRequest;
}

export function validateConfig(form: ConfigForm): ValidationResult {
  const errors: ValidationResult["errors"] = {};

  if (!form.datasetId.trim()) {
    errors.datasetId = "pick a dataset";
  }
  const budget = parseIntStrict(form.budget);
  if (budget === null || budget < 1) {
    errors.budget = "budget must be a positive integer";
  }
  const tau = Number(form.tau);
  if (!Number.isFinite(tau) || tau <= 0 || tau >= 1) {
    errors.tau = "tau must be strictly between 0 and 1";
  }
  const seed = parseIntStrict(form.seed);
  if (seed === null || seed < 0) {
    errors.seed = "seed must be a non-negative integer";
  }
  const trees = parseIntStrict(form.trees);
  if (trees === null || trees < 1) {
    errors.trees = "trees must be a positive integer";
  }
  const subsample = parseIntStrict(form.subsample);
  if (subsample === null || subsample < 1) {
    errors.subsample = "subsample must be a positive integer";
  }

  if (Object.keys(errors).length > 0) {
    return { ok: false, errors };
  }
  return {
    ok: true,
    errors,
    request: {
      dataset_id: form.datasetId.trim(),
      budget: budget!,
      tau,
      seed: seed!,
      num_trees: trees!,
      subsample_size: subsample!,
    },
  };
}

function parseIntStrict(text: string): number | null {
  if (!/^-?\d+$/.test(text.trim())) return null;
  return Number.parseInt(text.trim(), 10);
}

import { describe, expect, it } from "vitest";

import { validateConfig } from "./validate.js";

const good = {
  datasetId: "synthetic",
  budget: "60",
  tau: "0.03",
  seed: "0",
  trees: "100",
  subsample: "256",
};

describe("config form validation", () => {
  it("accepts the defaults and builds a request", () => {
    const result = validateConfig(good);
    expect(result.ok).toBe(true);
    expect(result.request).toEqual({
      dataset_id: "synthetic",
      budget: 60,
      tau: 0.03,
      seed: 0,
      num_trees: 100,
      subsample_size: 256,
    });
  });

  it("blocks tau outside (0, 1)", () => {
    for (const tau of ["1.5", "0", "1", "-0.2", "abc"]) {
      const result = validateConfig({ ...good, tau });
      expect(result.ok).toBe(false);
      expect(result.errors.tau).toMatch(/between 0 and 1/);
    }
  });

  it("blocks non-integer or non-positive counts", () => {
    expect(validateConfig({ ...good, budget: "0" }).ok).toBe(false);
    expect(validateConfig({ ...good, budget: "7.5" }).ok).toBe(false);
    expect(validateConfig({ ...good, trees: "-3" }).ok).toBe(false);
    expect(validateConfig({ ...good, seed: "x" }).ok).toBe(false);
    expect(validateConfig({ ...good, subsample: "" }).ok).toBe(false);
  });

  it("requires a dataset choice", () => {
    expect(validateConfig({ ...good, datasetId: "  " }).ok).toBe(false);
  });
});

import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // Every test shells out to the CLI (a Python process), so individual
    // cases can take a few seconds each.
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});

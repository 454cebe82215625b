import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // The contract suite talks to a live service process; give it headroom.
    testTimeout: 20_000,
    hookTimeout: 60_000,
  },
});

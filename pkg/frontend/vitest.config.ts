import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // The session test spawns the real engine; first contact pays its JIT
    // warm-up, so network tests get a generous budget.
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});

import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    testTimeout: 300_000,
    hookTimeout: 300_000,
    include: ["tests/**/*.test.ts"],
  },
});

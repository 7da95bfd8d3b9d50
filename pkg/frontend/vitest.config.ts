import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    globalSetup: ["./test-setup/fixture-server.ts"],
    testTimeout: 60_000,
    hookTimeout: 120_000,
  },
});

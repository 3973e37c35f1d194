import {defineConfig} from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    // the console is served from the gateway origin (plv serve --console-dir),
    // so the browser window shares it
    environmentOptions: {
      happyDOM: {url: "http://127.0.0.1:8455"},
    },
    include: ["tests/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 180_000,
    fileParallelism: false,
  },
});

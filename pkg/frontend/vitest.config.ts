import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    projects: [
      {
        test: {
          name: "unit",
          environment: "happy-dom",
          include: ["test/**/*.test.ts"],
          exclude: ["test/e2e.test.ts", "**/node_modules/**"],
        },
      },
      {
        test: {
          name: "e2e",
          // node environment: native fetch/FormData drive the live service,
          // happy-dom supplies the document inside the test itself.
          environment: "node",
          include: ["test/e2e.test.ts"],
          testTimeout: 180_000,
          hookTimeout: 180_000,
        },
      },
    ],
  },
});

import { defineConfig } from "vite";

export default defineConfig({
  server: {
    proxy: {
      "/jobs": "http://127.0.0.1:8080",
      "/suggest-directions": "http://127.0.0.1:8080",
      "/healthz": "http://127.0.0.1:8080",
    },
  },
  test: {
    environment: "node",
    testTimeout: 180000,
    hookTimeout: 60000,
  },
});

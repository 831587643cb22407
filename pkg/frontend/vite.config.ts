/// <reference types="vitest/config" />
import react from "@vitejs/plugin-react";
import { defineConfig } from "vite";

// Dev server proxies API routes to a locally running `facet serve`;
// `vite build` emits static assets the API serves at /ui.
const apiRoutes = [
  "/profiles",
  "/tasks",
  "/runs",
  "/jobs",
  "/ratings",
  "/worksheets",
  "/stability",
  "/healthz",
];

export default defineConfig({
  plugins: [react()],
  base: "./",
  server: {
    port: 5173,
    proxy: Object.fromEntries(apiRoutes.map((route) => [route, "http://127.0.0.1:8000"])),
  },
  test: {
    environment: "jsdom",
    globals: true,
    setupFiles: ["src/test-setup.ts"],
  },
});

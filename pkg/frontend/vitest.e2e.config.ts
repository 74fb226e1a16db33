import { defineConfig } from 'vitest/config';

// Live end-to-end run against a real backend; see e2e/run.sh.
export default defineConfig({
  test: {
    environment: 'jsdom',
    include: ['e2e/**/*.test.ts'],
    testTimeout: 60_000,
  },
});

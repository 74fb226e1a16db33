import { defineConfig } from 'vitest/config';

// The dev server proxies API paths to the backend so the client can use
// relative URLs in every environment.
export default defineConfig({
  server: {
    proxy: {
      '/sessions': 'http://127.0.0.1:8000',
      '/healthz': 'http://127.0.0.1:8000',
    },
  },
  test: {
    environment: 'jsdom',
    include: ['tests/**/*.test.ts'],
  },
});

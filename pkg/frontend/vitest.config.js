// plain object on purpose: loads under a globally installed vitest where
// `import "vitest/config"` would not resolve without local node_modules
export default {
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
    globalSetup: ["./test/setup/global.ts"],
    testTimeout: 30000,
    hookTimeout: 60000,
  },
};

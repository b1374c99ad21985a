import { defineConfig } from "vitest/config";

export default defineConfig({
    resolve: {
        // sources import with .js specifiers for browser ESM; map back to .ts
        alias: [{ find: /^(\.{1,2}\/.*)\.js$/, replacement: "$1" }],
    },
    test: {
        environment: "jsdom",
        include: ["test/**/*.test.ts"],
    },
});

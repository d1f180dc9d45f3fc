import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

// The server engine is the single source of truth for selection; the client
// must never compute which object is pointed at. Guard at the source level:
// no distance/ray math anywhere in src/.
const FORBIDDEN = [
  /Math\.hypot/,
  /Math\.sqrt/,
  /\bdistance\w*\s*\(/i,
  /\bdeproject/i,
  /\bnearest/i,
  /point[_-]?ray/i,
];

describe("no client-side selection logic", () => {
  it("src/ contains no distance or ray math", () => {
    const srcDir = join(__dirname, "..", "src");
    for (const file of readdirSync(srcDir)) {
      const text = readFileSync(join(srcDir, file), "utf8");
      for (const pattern of FORBIDDEN) {
        expect(pattern.test(text), `${file} matches ${pattern}`).toBe(false);
      }
    }
  });
});

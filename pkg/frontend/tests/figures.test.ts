import { execFileSync } from "child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { readTable } from "../src/csv.js";
import { renderSvg } from "../src/render.js";
import { FIGURE_SCHEMAS, SchemaMismatch, validateFigureTable } from "../src/schema.js";

const FIXTURES = join(__dirname, "fixtures");
const FIGURES = Object.keys(FIGURE_SCHEMAS);

describe("fixture rendering", () => {
  for (const figure of FIGURES) {
    it(`renders ${figure} with labeled curves`, () => {
      const table = readTable(join(FIXTURES, `${figure}.csv`));
      const data = validateFigureTable(figure, table);
      expect(data.curves.length).toBeGreaterThan(0);
      const svg = renderSvg(data);
      expect(svg).toContain("<svg");
      expect(svg).toContain("polyline");
      for (const curve of data.curves) {
        const escaped = curve.label
          .replace(/&/g, "&amp;")
          .replace(/</g, "&lt;")
          .replace(/>/g, "&gt;");
        expect(svg).toContain(`>${escaped}</text>`);
      }
    });
  }

  it("is pixel-stable: identical input renders identical bytes", () => {
    const table = readTable(join(FIXTURES, "f6.csv"));
    const data = validateFigureTable("f6", table);
    expect(renderSvg(data)).toEqual(renderSvg(data));
  });

  it("f4 carries both helicity channels", () => {
    const table = readTable(join(FIXTURES, "f4.csv"));
    const data = validateFigureTable("f4", table);
    const labels = data.curves.map((c) => c.label);
    expect(labels.some((l) => l.startsWith("I_parallel"))).toBe(true);
    expect(labels.some((l) => l.startsWith("I_perpendicular"))).toBe(true);
  });

  it("f6 names one curve per density", () => {
    const table = readTable(join(FIXTURES, "f6.csv"));
    const data = validateFigureTable("f6", table);
    expect(data.curves.map((c) => c.label)).toEqual(["sigma[n=0.01]", "sigma[n=0.05]"]);
  });
});

describe("schema mismatch handling", () => {
  it("names a missing required column", () => {
    const raw = readFileSync(join(FIXTURES, "f4.csv"), "utf8");
    const broken = raw
      .split("\n")
      .map((line) =>
        line.startsWith("#")
          ? line
          : line
              .split(",")
              .filter((_cell, i) => i !== 2) // drop the I_perpendicular column
              .join(","),
      )
      .join("\n");
    const dir = mkdtempSync(join(tmpdir(), "figtest-"));
    const path = join(dir, "broken.csv");
    writeFileSync(path, broken);
    const table = readTable(path);
    expect(() => validateFigureTable("f4", table)).toThrowError(SchemaMismatch);
    expect(() => validateFigureTable("f4", table)).toThrowError(/I_perpendicular/);
  });

  it("rejects a table served to the wrong figure", () => {
    const table = readTable(join(FIXTURES, "f6.csv"));
    expect(() => validateFigureTable("f4", table)).toThrowError(/theta/);
  });

  it("rejects non-numeric cells", () => {
    const dir = mkdtempSync(join(tmpdir(), "figtest-"));
    const path = join(dir, "bad.csv");
    writeFileSync(path, "detuning,sigma\n0.0,oops\n");
    expect(() => readTable(path)).toThrowError(/sigma/);
  });
});

describe("command line", () => {
  const cli = join(__dirname, "..", "dist", "cli.js");

  it.skipIf(!existsSync(cli))("renders a figure end to end", () => {
    const dir = mkdtempSync(join(tmpdir(), "figcli-"));
    const out = join(dir, "f6.svg");
    const stdout = execFileSync(
      "node",
      [cli, "f6", "--in", join(FIXTURES, "f6.csv"), "--out", out],
      { encoding: "utf8" },
    );
    expect(stdout).toContain("sigma[n=0.01]");
    expect(readFileSync(out, "utf8")).toContain("<svg");
  });

  it.skipIf(!existsSync(cli))("fails loudly on schema mismatch", () => {
    const dir = mkdtempSync(join(tmpdir(), "figcli-"));
    expect(() =>
      execFileSync(
        "node",
        [cli, "f4", "--in", join(FIXTURES, "f6.csv"), "--out", join(dir, "x.svg")],
        { encoding: "utf8", stdio: "pipe" },
      ),
    ).toThrowError();
  });
});

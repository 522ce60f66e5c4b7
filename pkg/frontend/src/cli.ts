#!/usr/bin/env node
import { writeFileSync } from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { readTable, CsvFormatError } from "./csv.js";
import { figureId, validateFigureTable, SchemaMismatch } from "./schema.js";
import { renderSvg } from "./render.js";

const argv = yargs(hideBin(process.argv))
  .usage("$0 <figure> --in <csv> --out <svg> [--logy]")
  .command("$0 <figure>", "render one figure CSV to SVG", (cmd) =>
    cmd.positional("figure", {
      describe: "figure id (f1 f2 f4 f5 f6 f7 f8 f9)",
      type: "string",
      demandOption: true,
    }),
  )
  .option("in", { type: "string", demandOption: true, describe: "input CSV path" })
  .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
  .option("logy", { type: "boolean", default: undefined, describe: "force log y axis" })
  .strict()
  .parseSync();

try {
  const figure = figureId.parse(argv.figure);
  const table = readTable(argv.in);
  const data = validateFigureTable(figure, table);
  const svg = renderSvg(data, { logY: argv.logy });
  writeFileSync(argv.out, svg, "utf8");
  console.log(`${argv.out}: ${data.curves.length} curve(s) [${data.curves.map((c) => c.label).join(", ")}]`);
} catch (err) {
  if (err instanceof SchemaMismatch || err instanceof CsvFormatError) {
    console.error(`schema error: ${err.message}`);
    process.exit(1);
  }
  console.error(err);
  process.exit(1);
}

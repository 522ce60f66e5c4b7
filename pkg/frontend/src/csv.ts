import { readFileSync } from "fs";
import Papa from "papaparse";

export interface DataTable {
  /** column name -> values, in header order */
  columns: Map<string, number[]>;
  header: string[];
  /** unit annotations harvested from the "# units:" comment line */
  units: Record<string, string>;
  /** free-form "# meta key=value" lines */
  meta: Record<string, string>;
}

export class CsvFormatError extends Error {}

/**
 * Read one simulation CSV: '#'-prefixed comment lines carry table name,
 * units and metadata; the remainder is a plain comma-separated table
 * with one header row.
 */
export function readTable(path: string): DataTable {
  const raw = readFileSync(path, "utf8");
  const units: Record<string, string> = {};
  const meta: Record<string, string> = {};
  const dataLines: string[] = [];
  for (const line of raw.split(/\r?\n/)) {
    if (line.startsWith("#")) {
      const body = line.slice(1).trim();
      if (body.startsWith("units:")) {
        for (const pair of body.slice("units:".length).split(", ")) {
          // column labels may embed '='; the unit follows the last one
          const eq = pair.lastIndexOf("=");
          if (eq > 0) units[pair.slice(0, eq).trim()] = pair.slice(eq + 1).trim();
        }
      } else if (body.startsWith("meta ")) {
        const eq = body.indexOf("=");
        if (eq > 5) meta[body.slice(5, eq)] = body.slice(eq + 1);
      } else if (body.startsWith("table=")) {
        meta["table"] = body.slice("table=".length);
      }
      continue;
    }
    if (line.trim().length > 0) dataLines.push(line);
  }
  if (dataLines.length < 2) {
    throw new CsvFormatError(`${path}: no data rows found`);
  }
  const parsed = Papa.parse<Record<string, unknown>>(dataLines.join("\n"), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new CsvFormatError(`${path}: ${first.message} (row ${first.row})`);
  }
  const header = (parsed.meta.fields ?? []).map((f) => f.trim());
  const columns = new Map<string, number[]>();
  for (const name of header) columns.set(name, []);
  for (const row of parsed.data) {
    for (const name of header) {
      const value = row[name];
      if (typeof value !== "number" || !Number.isFinite(value)) {
        throw new CsvFormatError(
          `${path}: column ${name} has non-numeric cell ${JSON.stringify(value)}`,
        );
      }
      columns.get(name)!.push(value);
    }
  }
  return { columns, header, units, meta };
}

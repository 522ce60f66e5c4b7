import { z } from "zod";
import type { DataTable } from "./csv.js";

export class SchemaMismatch extends Error {}

export interface Curve {
  label: string;
  values: number[];
}

export interface FigureData {
  figure: string;
  x: number[];
  xLabel: string;
  yLabel: string;
  curves: Curve[];
  logY: boolean;
  logX: boolean;
}

interface FigureSchema {
  xColumn: string;
  xLabel: string;
  yLabel: string;
  /** exact column names that must all be present */
  exact?: string[];
  /** at least one column starting with each prefix must be present */
  prefixes?: string[];
  logY?: boolean;
  logX?: boolean;
}

/** Column layouts contracted with the simulator's plot-data emitter. */
export const FIGURE_SCHEMAS: Record<string, FigureSchema> = {
  f1: {
    xColumn: "x",
    xLabel: "x [lambdabar]",
    yLabel: "coherent intensity",
    prefixes: ["I_coh"],
  },
  f2: {
    xColumn: "density",
    xLabel: "density [lambdabar^-3]",
    yLabel: "optical thickness",
    exact: ["optical_thickness", "dilute_thickness"],
    logX: true,
  },
  f4: {
    xColumn: "theta",
    xLabel: "scattering angle [deg]",
    yLabel: "intensity [lambdabar^2/sr]",
    prefixes: ["I_parallel", "I_perpendicular"],
    logY: true,
  },
  f5: {
    xColumn: "theta",
    xLabel: "scattering angle [deg]",
    yLabel: "intensity [lambdabar^2/sr]",
    prefixes: ["I_parallel"],
  },
  f6: {
    xColumn: "detuning",
    xLabel: "detuning [gamma]",
    yLabel: "total cross section [lambdabar^2]",
    prefixes: ["sigma"],
  },
  f7: {
    xColumn: "detuning",
    xLabel: "detuning [gamma]",
    yLabel: "total cross section [lambdabar^2]",
    prefixes: ["sigma"],
  },
  f8: {
    xColumn: "detuning",
    xLabel: "detuning [gamma]",
    yLabel: "intensity [lambdabar^2/sr]",
    prefixes: ["I[theta="],
  },
  f9: {
    xColumn: "detuning",
    xLabel: "detuning [gamma]",
    yLabel: "intensity [lambdabar^2/sr]",
    prefixes: ["I_parallel", "I_perpendicular"],
  },
};

export const figureId = z.enum(["f1", "f2", "f4", "f5", "f6", "f7", "f8", "f9"]);

const isSemColumn = (name: string) => name.includes("_sem") || name.includes("sem[");

/**
 * Check a parsed table against the layout contract of one figure and
 * reshape it into labeled curves.  Errors name the offending column.
 */
export function validateFigureTable(figure: string, table: DataTable): FigureData {
  const schema = FIGURE_SCHEMAS[figure];
  if (!schema) {
    throw new SchemaMismatch(`unknown figure id ${figure}`);
  }
  if (!table.columns.has(schema.xColumn)) {
    throw new SchemaMismatch(
      `figure ${figure}: missing x column "${schema.xColumn}" (header: ${table.header.join(", ")})`,
    );
  }
  const x = table.columns.get(schema.xColumn)!;
  const curves: Curve[] = [];
  const pick = (name: string) => {
    const values = table.columns.get(name)!;
    if (values.length !== x.length) {
      throw new SchemaMismatch(`figure ${figure}: column "${name}" length differs from x`);
    }
    curves.push({ label: name, values });
  };
  for (const name of schema.exact ?? []) {
    if (!table.columns.has(name)) {
      throw new SchemaMismatch(`figure ${figure}: missing required column "${name}"`);
    }
    pick(name);
  }
  for (const prefix of schema.prefixes ?? []) {
    const matches = table.header.filter(
      (name) => name.startsWith(prefix) && !isSemColumn(name) && name !== schema.xColumn,
    );
    if (matches.length === 0) {
      throw new SchemaMismatch(`figure ${figure}: no column matching prefix "${prefix}"`);
    }
    matches.forEach(pick);
  }
  return {
    figure,
    x,
    xLabel: schema.xLabel,
    yLabel: schema.yLabel,
    curves,
    logY: schema.logY ?? false,
    logX: schema.logX ?? false,
  };
}

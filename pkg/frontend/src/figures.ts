import { CsvError, requireColumns, seriesColumns, Table } from "./csv.js";

type EChartsOption = import("echarts").EChartsOption;

export interface FigureSpec {
  id: number;
  input: string;
  /** columns that must exist; per-kn series columns are discovered */
  fixedColumns: string[];
  logScale: boolean;
  build: (table: Table, path: string) => EChartsOption;
}

export type { EChartsOption };

function groupBy(rows: Record<string, number>[], key: string): Map<number, Record<string, number>[]> {
  const groups = new Map<number, Record<string, number>[]>();
  for (const row of rows) {
    const value = row[key];
    if (!groups.has(value)) groups.set(value, []);
    groups.get(value)!.push(row);
  }
  return groups;
}

function knLabel(kn: number): string {
  const exponent = Math.log2(kn);
  return Number.isInteger(exponent) ? `kn=2^${exponent}` : `kn=${kn}`;
}

/** Decaying spectra: one log-scale series per kn column (figures 1 and 5). */
function spectraOption(table: Table, path: string, title: string): EChartsOption {
  requireColumns(table, ["index"], path);
  const series = seriesColumns(table, ["index"]);
  if (series.length === 0) {
    throw new CsvError(`${path}: no singular-value series columns`);
  }
  return {
    title: { text: title },
    legend: { data: series, top: 28 },
    xAxis: { type: "value", name: "index" },
    yAxis: { type: "log", name: "singular value" },
    series: series.map((name) => ({
      name,
      type: "line",
      showSymbol: true,
      data: table.rows.map((row) => [row.index, row[name]]),
    })),
  };
}

/** Singular vectors over x, one panel-worth of series per kn (figures 2 and 6). */
function vectorsOption(table: Table, path: string, title: string): EChartsOption {
  requireColumns(table, ["kn", "x", "v1", "v2", "v3"], path);
  const series: NonNullable<EChartsOption["series"]> & unknown[] = [];
  for (const [kn, rows] of groupBy(table.rows, "kn")) {
    for (const component of ["v1", "v2", "v3"]) {
      series.push({
        name: `${knLabel(kn)} ${component}`,
        type: "line",
        showSymbol: false,
        data: rows.map((row) => [row.x, row[component]]),
      });
    }
  }
  return {
    title: { text: title },
    legend: { type: "scroll", top: 28 },
    xAxis: { type: "value", name: "x", min: 0, max: 1 },
    yAxis: { type: "value", name: "component" },
    series,
  };
}

/** Kernel heatmap over (row p, position x) (figure 3). */
function heatmapOption(table: Table, path: string): EChartsOption {
  requireColumns(table, ["p", "i", "x", "value"], path);
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of table.rows) {
    lo = Math.min(lo, row.value);
    hi = Math.max(hi, row.value);
  }
  return {
    title: { text: "Critical scattering kernel (flat in x)" },
    xAxis: { type: "category", name: "x index" },
    yAxis: { type: "category", name: "pair p" },
    visualMap: { min: lo, max: hi, calculable: false, orient: "vertical", right: 0 },
    series: [
      {
        type: "heatmap",
        data: table.rows.map((row) => [row.i - 1, row.p - 1, row.value]),
        progressive: 0,
      },
    ],
  };
}

/** Derivative ratio against its prediction, per kn (figure 4). */
function ratioOption(table: Table, path: string): EChartsOption {
  requireColumns(table, ["kn", "x", "ratio", "predicted"], path);
  const series: NonNullable<EChartsOption["series"]> & unknown[] = [];
  for (const [kn, rows] of groupBy(table.rows, "kn")) {
    series.push({
      name: `${knLabel(kn)} ratio`,
      type: "line",
      showSymbol: false,
      data: rows.map((row) => [row.x, row.ratio]),
    });
    series.push({
      name: `${knLabel(kn)} predicted`,
      type: "line",
      showSymbol: false,
      lineStyle: { type: "dashed" },
      data: rows.map((row) => [row.x, row.predicted]),
    });
  }
  return {
    title: { text: "d(gamma)/dx over d(rho_f rho_g)/dx" },
    legend: { type: "scroll", top: 28 },
    xAxis: { type: "value", name: "x", min: 0, max: 1 },
    yAxis: { type: "value", name: "ratio" },
    series,
  };
}

export const FIGURES: FigureSpec[] = [
  {
    id: 1,
    input: "fig1.csv",
    fixedColumns: ["index"],
    logScale: true,
    build: (table, path) => spectraOption(table, path, "Absorption kernel singular values"),
  },
  {
    id: 2,
    input: "fig2.csv",
    fixedColumns: ["kn", "x", "v1", "v2", "v3"],
    logScale: false,
    build: (table, path) => vectorsOption(table, path, "Absorption kernel singular vectors"),
  },
  {
    id: 3,
    input: "fig3.csv",
    fixedColumns: ["p", "i", "x", "value"],
    logScale: false,
    build: (table, path) => heatmapOption(table, path),
  },
  {
    id: 4,
    input: "fig4.csv",
    fixedColumns: ["kn", "x", "ratio", "predicted"],
    logScale: false,
    build: (table, path) => ratioOption(table, path),
  },
  {
    id: 5,
    input: "fig5.csv",
    fixedColumns: ["index"],
    logScale: true,
    build: (table, path) => spectraOption(table, path, "Interior scattering kernel singular values"),
  },
  {
    id: 6,
    input: "fig6.csv",
    fixedColumns: ["kn", "x", "v1", "v2", "v3"],
    logScale: false,
    build: (table, path) => vectorsOption(table, path, "Scattering kernel singular vectors"),
  },
];

import { readFileSync } from "fs";
import Papa from "papaparse";

export class CsvError extends Error {}

export interface Table {
  columns: string[];
  rows: Record<string, number>[];
}

/** Parse a numeric CSV with a header row. Throws on empty or headerless input. */
export function parseCsv(text: string, path = "<string>"): Table {
  if (text.trim() === "") {
    throw new CsvError(`${path}: empty CSV`);
  }
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new CsvError(`${path}: ${parsed.errors[0].message}`);
  }
  const grid = parsed.data;
  if (grid.length === 0 || grid[0].length === 0 || grid[0][0] === "") {
    throw new CsvError(`${path}: empty CSV`);
  }
  const columns = grid[0];
  if (grid.length === 1) {
    throw new CsvError(`${path}: no data rows`);
  }
  const rows = grid.slice(1).map((cells, index) => {
    const row: Record<string, number> = {};
    columns.forEach((name, j) => {
      const value = Number(cells[j]);
      if (cells[j] === undefined || cells[j] === "" || Number.isNaN(value)) {
        throw new CsvError(`${path}: non-numeric value in column '${name}' at data row ${index + 1}`);
      }
      row[name] = value;
    });
    return row;
  });
  return { columns, rows };
}

export function readCsv(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch {
    throw new CsvError(`cannot read ${path}`);
  }
  return parseCsv(text, path);
}

/** Assert the table has every listed column; names the first missing one. */
export function requireColumns(table: Table, names: string[], path: string): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new CsvError(`${path}: missing column '${name}'`);
    }
  }
}

/** Column names beyond the fixed prefix (the per-kn series of fig1/fig5). */
export function seriesColumns(table: Table, fixed: string[]): string[] {
  return table.columns.filter((name) => !fixed.includes(name));
}

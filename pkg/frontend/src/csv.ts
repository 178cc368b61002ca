/**
 * Reader for the versioned stacknash CSV schema.
 *
 * Files start with a comment line `# stacknash-csv v<version> kind=<kind>`,
 * followed by a header row and comma-separated data rows ('.' decimal
 * point, LF endings). The reader validates the schema line and exposes
 * typed column access; all errors name the offending column and the
 * schema version so mismatches across tool versions are diagnosable.
 */

import { readFileSync } from "fs";

export const SUPPORTED_SCHEMA_VERSION = "1";

export interface CsvTable {
  schemaVersion: string;
  kind: string;
  header: string[];
  rows: string[][];
}

export class CsvError extends Error {}

export function parseCsv(text: string, source: string): CsvTable {
  const lines = text.split("\n").filter((ln) => ln.length > 0);
  if (lines.length === 0) {
    throw new CsvError(`${source}: file is empty`);
  }
  const m = lines[0].match(/^# stacknash-csv v(\S+) kind=(\S+)\s*$/);
  if (!m) {
    throw new CsvError(
      `${source}: missing schema comment line (expected "# stacknash-csv v${SUPPORTED_SCHEMA_VERSION} kind=...")`
    );
  }
  const [, version, kind] = m;
  if (version !== SUPPORTED_SCHEMA_VERSION) {
    throw new CsvError(
      `${source}: schema version v${version} is not supported (reader expects v${SUPPORTED_SCHEMA_VERSION})`
    );
  }
  if (lines.length < 2) {
    throw new CsvError(`${source}: schema v${version}: header row is missing`);
  }
  const header = lines[1].split(",");
  const rows = lines.slice(2).map((ln) => ln.split(","));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new CsvError(
        `${source}: schema v${version}: row has ${row.length} fields, header has ${header.length}`
      );
    }
  }
  if (rows.length === 0) {
    throw new CsvError(`${source}: schema v${version}: no data rows`);
  }
  return { schemaVersion: version, kind, header, rows };
}

export function readCsv(path: string): CsvTable {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new CsvError(`cannot read ${path}: ${(err as Error).message}`);
  }
  return parseCsv(text, path);
}

/** Numeric column accessor; names the column and schema version on failure. */
export function column(table: CsvTable, name: string, source = "csv"): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new CsvError(
      `${source}: column "${name}" not found in schema v${table.schemaVersion} ` +
        `(kind=${table.kind}, columns: ${table.header.join(", ")})`
    );
  }
  return table.rows.map((row, i) => {
    const v = Number(row[idx]);
    if (!Number.isFinite(v)) {
      throw new CsvError(
        `${source}: column "${name}" row ${i}: "${row[idx]}" is not a finite number ` +
          `(schema v${table.schemaVersion})`
      );
    }
    return v;
  });
}

/** String column accessor (for categorical fields like the node block). */
export function textColumn(table: CsvTable, name: string, source = "csv"): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new CsvError(
      `${source}: column "${name}" not found in schema v${table.schemaVersion}`
    );
  }
  return table.rows.map((row) => row[idx]);
}

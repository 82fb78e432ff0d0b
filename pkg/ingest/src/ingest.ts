// SMILES CSV -> canonical fedmol-v1 TSV conversion.
//
// Each input row becomes one record: an ECFP-style fingerprint (hex, MSB
// first), a Murcko scaffold key (canonical SMILES, NO_SCAFFOLD for acyclic
// molecules) and the requested metadata columns as meta: groups.  Rows whose
// SMILES does not parse are skipped and counted.  Output is deterministic:
// identical input files yield identical bytes.

import { parseCsv } from "./csv.js";
import { fingerprintHex, morganFingerprint } from "./fingerprint.js";
import { Molecule, components, subgraph } from "./molecule.js";
import { scaffoldKey } from "./scaffold.js";
import { parseSMILES } from "./smiles.js";

export interface IngestOptions {
  smilesColumn: string;
  metaColumns?: string[]; // default: every column except the SMILES one
  nBits?: number;
  radius?: number;
}

export interface IngestResult {
  tsv: string;
  converted: number;
  skipped: number;
}

interface MetaColumn {
  name: string;
  source: string;
  numeric: boolean;
}

export function largestFragment(mol: Molecule): Molecule {
  const parts = components(mol);
  if (parts.length === 1) return mol;
  let best = parts[0];
  for (const part of parts.slice(1)) {
    if (part.length > best.length) best = part; // ties keep the earlier fragment
  }
  return subgraph(mol, best);
}

function metaColumnSpecs(requested: string[], header: string[], rows: string[][]): MetaColumn[] {
  const columns: MetaColumn[] = [];
  for (const spec of requested) {
    const forcedNumeric = spec.endsWith(":num");
    const source = forcedNumeric ? spec.slice(0, -4) : spec;
    const index = header.indexOf(source);
    if (index < 0) throw new Error(`missing column ${JSON.stringify(source)} in input CSV`);
    const values = rows.map((row) => row[index].trim()).filter((v) => v.length > 0);
    const numeric =
      forcedNumeric ||
      (values.length > 0 && values.every((v) => v !== "" && Number.isFinite(Number(v))));
    columns.push({ name: sanitizeGroupName(source), source, numeric });
  }
  return columns;
}

function sanitizeGroupName(name: string): string {
  const cleaned = name.trim().replace(/[^A-Za-z0-9_.-]+/g, "_");
  if (cleaned.length === 0) throw new Error(`metadata column name ${JSON.stringify(name)} is empty after sanitizing`);
  return cleaned;
}

function metaCell(raw: string, numeric: boolean): string {
  const value = raw.trim();
  if (value.length === 0 || value === "NA") return "NA";
  if (numeric) {
    const parsed = Number(value);
    if (!Number.isFinite(parsed)) return "NA";
    return String(parsed);
  }
  return value.replace(/[\t\n\r]+/g, " ");
}

export function ingestCsv(csvText: string, options: IngestOptions): IngestResult {
  const nBits = options.nBits ?? 2048;
  const radius = options.radius ?? 2;
  const { header, rows } = parseCsv(csvText);

  const smilesIndex = header.indexOf(options.smilesColumn);
  if (smilesIndex < 0) {
    throw new Error(`missing column ${JSON.stringify(options.smilesColumn)} in input CSV`);
  }
  const requested = options.metaColumns ?? header.filter((h) => h !== options.smilesColumn);
  const metaColumns = metaColumnSpecs(requested, header, rows);

  const headerCells = ["mol_id", "scaffold", "fp_hex"].concat(
    metaColumns.map((c) => (c.numeric ? `meta:${c.name}:num` : `meta:${c.name}`)),
  );
  const lines = [`#fedmol-v1\tF=${nBits}`, headerCells.join("\t")];

  let skipped = 0;
  const width = String(rows.length).length;
  rows.forEach((row, rowIndex) => {
    let scaffold: string;
    let hex: string;
    try {
      const mol = largestFragment(parseSMILES(row[smilesIndex]));
      scaffold = scaffoldKey(mol);
      hex = fingerprintHex(morganFingerprint(mol, { radius, nBits }));
    } catch {
      skipped++;
      return;
    }
    const cells = [
      `M${String(rowIndex + 1).padStart(Math.max(width, 4), "0")}`,
      scaffold,
      hex,
    ];
    for (const column of metaColumns) {
      cells.push(metaCell(row[header.indexOf(column.source)], column.numeric));
    }
    lines.push(cells.join("\t"));
  });

  if (lines.length === 2) throw new Error("zero valid rows: no SMILES could be parsed");
  return { tsv: lines.join("\n") + "\n", converted: lines.length - 2, skipped };
}

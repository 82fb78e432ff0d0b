#!/usr/bin/env node
// fedmol-ingest --input X.csv --smiles-col smiles --meta col1,col2:num --out X.tsv

import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { ingestCsv } from "./ingest.js";

function usage(): string {
  return [
    "usage: fedmol-ingest --input <csv> --out <tsv> [--smiles-col smiles]",
    "                     [--meta col1,col2:num,...] [--bits 2048] [--radius 2]",
    "",
    "Converts a SMILES CSV into the canonical fedmol-v1 TSV: circular",
    "fingerprints (radius 2, 2048 bits by default), Murcko scaffold keys",
    "(NO_SCAFFOLD for acyclic molecules) and the listed metadata columns.",
    "Append :num to a column name to force numeric; otherwise numeric-looking",
    "columns are detected. Unparseable SMILES rows are skipped and counted.",
  ].join("\n");
}

export function main(argv: string[]): number {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        input: { type: "string" },
        out: { type: "string" },
        "smiles-col": { type: "string", default: "smiles" },
        meta: { type: "string" },
        bits: { type: "string", default: "2048" },
        radius: { type: "string", default: "2" },
        help: { type: "boolean", default: false },
      },
    }));
  } catch (error) {
    console.error(`error: ${(error as Error).message}`);
    console.error(usage());
    return 2;
  }
  if (values.help) {
    console.log(usage());
    return 0;
  }
  if (!values.input || !values.out) {
    console.error("error: --input and --out are required");
    console.error(usage());
    return 2;
  }

  try {
    const csvText = readFileSync(values.input, "utf-8");
    const result = ingestCsv(csvText, {
      smilesColumn: values["smiles-col"]!,
      metaColumns: values.meta ? values.meta.split(",").map((c) => c.trim()).filter(Boolean) : undefined,
      nBits: Number(values.bits),
      radius: Number(values.radius),
    });
    writeFileSync(values.out, result.tsv, "utf-8");
    if (result.skipped > 0) {
      console.error(`skipped ${result.skipped} row(s) with unparseable SMILES`);
    }
    console.log(`wrote ${result.converted} records to ${values.out}`);
    return 0;
  } catch (error) {
    console.error(`error: ${(error as Error).message}`);
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { ingestCsv } from "../src/ingest.js";
import { main } from "../src/cli.js";

const fixturePath = fileURLToPath(new URL("../fixtures/molecules.csv", import.meta.url));
const fixtureCsv = readFileSync(fixturePath, "utf-8");

describe("ingestCsv", () => {
  it("converts the 10-molecule fixture", () => {
    const result = ingestCsv(fixtureCsv, { smilesColumn: "smiles" });
    expect(result.converted).toBe(10);
    expect(result.skipped).toBe(0);
    const lines = result.tsv.split("\n");
    expect(lines[0]).toBe("#fedmol-v1\tF=2048");
    expect(lines[1]).toBe("mol_id\tscaffold\tfp_hex\tmeta:name\tmeta:year:num\tmeta:assay");
    expect(lines).toHaveLength(13); // header + 10 records + trailing newline
  });

  it("maps acyclic molecules to NO_SCAFFOLD", () => {
    const result = ingestCsv(fixtureCsv, { smilesColumn: "smiles" });
    const rows = result.tsv.trim().split("\n").slice(2).map((l) => l.split("\t"));
    const byName = new Map(rows.map((cells) => [cells[3], cells]));
    expect(byName.get("ethanol")![1]).toBe("NO_SCAFFOLD");
    expect(byName.get("acetic acid")![1]).toBe("NO_SCAFFOLD");
    expect(byName.get("benzene")![1]).not.toBe("NO_SCAFFOLD");
    // aspirin and toluene share the benzene ring scaffold
    expect(byName.get("aspirin")![1]).toBe(byName.get("benzene")![1]);
  });

  it("repeat runs are byte-identical", () => {
    const a = ingestCsv(fixtureCsv, { smilesColumn: "smiles" });
    const b = ingestCsv(fixtureCsv, { smilesColumn: "smiles" });
    expect(a.tsv).toBe(b.tsv);
  });

  it("identical SMILES rows produce identical fingerprint hex", () => {
    const csv = "smiles,tag\nCCO,a\nCCO,b\n";
    const rows = ingestCsv(csv, { smilesColumn: "smiles" }).tsv.trim().split("\n").slice(2);
    const [r1, r2] = rows.map((l) => l.split("\t"));
    expect(r1[2]).toBe(r2[2]);
    expect(r1[0]).not.toBe(r2[0]); // mol_ids stay unique
  });

  it("skips unparseable SMILES with a count", () => {
    const csv = "smiles,tag\nCCO,a\nnot_a_smiles($),b\nc1ccccc1,c\n";
    const result = ingestCsv(csv, { smilesColumn: "smiles" });
    expect(result.converted).toBe(2);
    expect(result.skipped).toBe(1);
  });

  it("errors on a missing column", () => {
    expect(() => ingestCsv(fixtureCsv, { smilesColumn: "nope" })).toThrow(/missing column "nope"/);
    expect(() => ingestCsv(fixtureCsv, { smilesColumn: "smiles", metaColumns: ["ghost"] }))
      .toThrow(/missing column "ghost"/);
  });

  it("errors when zero rows are valid", () => {
    expect(() => ingestCsv("smiles\nxx$\nyy$\n", { smilesColumn: "smiles" }))
      .toThrow(/zero valid rows/);
  });

  it("respects an explicit metadata column list with :num markers", () => {
    const result = ingestCsv(fixtureCsv, {
      smilesColumn: "smiles",
      metaColumns: ["assay", "year:num"],
    });
    const header = result.tsv.split("\n")[1];
    expect(header).toBe("mol_id\tscaffold\tfp_hex\tmeta:assay\tmeta:year:num");
  });

  it("keeps the largest fragment of a salt", () => {
    const csv = "smiles\nCC(=O)[O-].[Na+]\n";
    const row = ingestCsv(csv, { smilesColumn: "smiles" }).tsv.trim().split("\n")[2].split("\t");
    expect(row[1]).toBe("NO_SCAFFOLD"); // acetate, not the bare sodium ion
  });

  it("writes NA for empty metadata cells", () => {
    const csv = 'smiles,note\nCCO,""\n';
    const row = ingestCsv(csv, { smilesColumn: "smiles" }).tsv.trim().split("\n")[2].split("\t");
    expect(row[3]).toBe("NA");
  });
});

describe("cli", () => {
  it("runs end-to-end and is deterministic", () => {
    const dir = mkdtempSync(join(tmpdir(), "ingest-"));
    const out1 = join(dir, "a.tsv");
    const out2 = join(dir, "b.tsv");
    expect(main(["--input", fixturePath, "--out", out1])).toBe(0);
    expect(main(["--input", fixturePath, "--out", out2])).toBe(0);
    expect(readFileSync(out1)).toEqual(readFileSync(out2));
  });

  it("fails cleanly on missing input", () => {
    expect(main(["--input", "/does/not/exist.csv", "--out", "/tmp/x.tsv"])).toBe(1);
    expect(main([])).toBe(2);
  });
});

describe("canonical format interop", () => {
  it("the fedmol reader parses the converted fixture with zero errors", () => {
    const dir = mkdtempSync(join(tmpdir(), "ingest-interop-"));
    const out = join(dir, "molecules.tsv");
    writeFileSync(out, ingestCsv(fixtureCsv, { smilesColumn: "smiles" }).tsv, "utf-8");
    const script = [
      "from fedmol.dataset import read_dataset",
      `manifest, records = read_dataset(${JSON.stringify(out)})`,
      "assert manifest.record_count == 10",
      "assert manifest.fingerprint_bits == 2048",
      "assert sum(r.scaffold == 'NO_SCAFFOLD' for r in records) == 2",
      "assert dict(manifest.feature_groups)['year'] == 'numeric'",
      "print('OK')",
    ].join("\n");
    const stdout = execFileSync("python3", ["-c", script], { encoding: "utf-8" });
    expect(stdout.trim()).toBe("OK");
  });
});

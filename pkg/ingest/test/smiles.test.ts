import { describe, expect, it } from "vitest";

import { parseSMILES, SmilesError } from "../src/smiles.js";
import { hydrogenCounts, ringMembership } from "../src/molecule.js";

describe("parseSMILES", () => {
  it("parses benzene into six aromatic atoms and bonds", () => {
    const mol = parseSMILES("c1ccccc1");
    expect(mol.atoms).toHaveLength(6);
    expect(mol.bonds).toHaveLength(6);
    expect(mol.atoms.every((a) => a.aromatic)).toBe(true);
    expect(mol.bonds.every((b) => b.aromatic)).toBe(true);
  });

  it("computes implicit hydrogens", () => {
    const ethanol = parseSMILES("CCO");
    expect(hydrogenCounts(ethanol)).toEqual([3, 2, 1]);
    const benzene = parseSMILES("c1ccccc1");
    expect(hydrogenCounts(benzene)).toEqual([1, 1, 1, 1, 1, 1]);
  });

  it("handles bracket atoms with isotope, charge and explicit H", () => {
    const mol = parseSMILES("[13CH3][N+](C)(C)C.[O-]C");
    const carbon = mol.atoms[0];
    expect(carbon.isotope).toBe(13);
    expect(carbon.explicitH).toBe(3);
    expect(mol.atoms[1].charge).toBe(1);
    expect(mol.atoms.find((a) => a.symbol === "O")!.charge).toBe(-1);
  });

  it("supports branches, ring closures and %nn", () => {
    const branched = parseSMILES("CC(C)(C)C");
    expect(branched.atoms).toHaveLength(5);
    const big = parseSMILES("C%12CCCCC%12");
    expect(big.bonds).toHaveLength(6);
  });

  it("treats stereo bond markers as plain single bonds", () => {
    const mol = parseSMILES("F/C=C/F");
    expect(mol.bonds.map((b) => b.order).sort()).toEqual([1, 1, 2]);
  });

  it("parses dot-separated fragments as disconnected graphs", () => {
    const mol = parseSMILES("CC(=O)[O-].[Na+]");
    expect(mol.atoms).toHaveLength(5);
    expect(mol.bonds).toHaveLength(3);
  });

  it("marks ring membership only on cycle atoms", () => {
    const toluene = parseSMILES("Cc1ccccc1");
    const ring = ringMembership(toluene);
    expect(ring[0]).toBe(false); // methyl carbon
    expect(ring.slice(1).every(Boolean)).toBe(true);
  });

  it("rejects malformed input", () => {
    expect(() => parseSMILES("")).toThrow(SmilesError);
    expect(() => parseSMILES("C(C")).toThrow(/unmatched/);
    expect(() => parseSMILES("C1CC")).toThrow(/unclosed ring/);
    expect(() => parseSMILES("C$C")).toThrow(/unexpected character/);
    expect(() => parseSMILES("[Xx]")).toThrow(/cannot parse|unknown element/);
  });
});

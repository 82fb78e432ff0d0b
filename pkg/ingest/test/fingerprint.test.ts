import { describe, expect, it } from "vitest";

import { fingerprintHex, morganFingerprint } from "../src/fingerprint.js";
import { parseSMILES } from "../src/smiles.js";

const hex = (smiles: string, nBits = 2048) =>
  fingerprintHex(morganFingerprint(parseSMILES(smiles), { nBits }));

describe("morganFingerprint", () => {
  it("produces the canonical hex width (F/4 chars, lowercase)", () => {
    const h = hex("CC(=O)Oc1ccccc1C(=O)O");
    expect(h).toHaveLength(512);
    expect(h).toBe(h.toLowerCase());
    expect([...h].some((c) => c !== "0")).toBe(true);
  });

  it("identical SMILES give identical fingerprints", () => {
    expect(hex("Cn1cnc2c1c(=O)n(C)c(=O)n2C")).toBe(hex("Cn1cnc2c1c(=O)n(C)c(=O)n2C"));
  });

  it("is invariant to atom ordering of the same molecule", () => {
    expect(hex("CC(=O)Oc1ccccc1C(=O)O")).toBe(hex("O=C(O)c1ccccc1OC(C)=O"));
  });

  it("differs between different molecules", () => {
    expect(hex("CC(=O)Oc1ccccc1C(=O)O")).not.toBe(hex("CC(C)Cc1ccc(cc1)C(C)C(=O)O"));
    expect(hex("CCO")).not.toBe(hex("CCN"));
  });

  it("bit 0 is the most significant bit of the first hex char", () => {
    // force every hash onto bit 0 via nBits=8: byte must have the top bit set
    const bytes = morganFingerprint(parseSMILES("C"), { nBits: 8, radius: 0 });
    expect(bytes).toHaveLength(1);
    const h = fingerprintHex(bytes);
    expect(h).toHaveLength(2);
    expect(parseInt(h, 16)).toBeGreaterThan(0);
  });

  it("radius grows the set of active bits", () => {
    const mol = parseSMILES("CC(C)Cc1ccc(cc1)C(C)C(=O)O");
    const popcount = (radius: number) =>
      [...morganFingerprint(mol, { radius })].reduce(
        (total, byte) => total + byte.toString(2).split("1").length - 1, 0);
    expect(popcount(2)).toBeGreaterThan(popcount(0));
  });

  it("rejects invalid widths", () => {
    expect(() => morganFingerprint(parseSMILES("C"), { nBits: 100 })).toThrow(/multiple of 8/);
  });
});

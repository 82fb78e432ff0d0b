// Circular (Morgan/ECFP-style) fingerprints: hashed neighborhood invariants
// up to the given radius, folded onto a fixed-width bit vector.  Radius 2 and
// 2048 bits reproduce the usual ECFP4 setup.  Hashes are 32-bit
// (boost-style hash_combine), so fingerprints are deterministic everywhere.

import { Bond, Molecule, bondsOf, hydrogenCounts, ringMembership } from "./molecule.js";

export interface FingerprintOptions {
  radius?: number;
  nBits?: number;
}

function hashCombine(seed: number, value: number): number {
  let hash = seed >>> 0;
  const val = value >>> 0;
  hash ^= (val + 0x9e3779b9 + ((hash << 6) >>> 0) + (hash >>> 2)) >>> 0;
  return hash >>> 0;
}

function hashVector(components: number[]): number {
  let hash = 0;
  for (const component of components) {
    hash = hashCombine(hash, component);
  }
  return hash;
}

function bondInvariant(bond: Bond): number {
  if (bond.aromatic) return 12;
  return bond.order;
}

export function morganFingerprint(mol: Molecule, options?: FingerprintOptions): Uint8Array {
  const radius = options?.radius ?? 2;
  const nBits = options?.nBits ?? 2048;
  if (nBits <= 0 || nBits % 8 !== 0) throw new Error(`nBits must be a positive multiple of 8, got ${nBits}`);

  const hydrogens = hydrogenCounts(mol);
  const inRing = ringMembership(mol);
  const adjacency = bondsOf(mol);

  let invariants = mol.atoms.map((atom) =>
    hashVector([
      atom.atomicNumber,
      adjacency[atom.index].length,
      hydrogens[atom.index],
      atom.charge & 0xff,
      atom.isotope,
      inRing[atom.index] ? 1 : 0,
    ]),
  );

  const seen = new Set<number>(invariants);
  for (let layer = 0; layer < radius; layer++) {
    const next: number[] = new Array(mol.atoms.length);
    for (let i = 0; i < mol.atoms.length; i++) {
      const neighborhood: Array<[number, number]> = adjacency[i].map((bond) => [
        bondInvariant(bond),
        invariants[bond.a === i ? bond.b : bond.a],
      ]);
      neighborhood.sort((x, y) => (x[1] !== y[1] ? x[1] - y[1] : x[0] - y[0]));
      let invariant = hashCombine(layer + 1, invariants[i]);
      for (const [bondInv, neighborInv] of neighborhood) {
        invariant = hashCombine(invariant, hashCombine(bondInv, neighborInv));
      }
      next[i] = invariant;
      seen.add(invariant);
    }
    invariants = next;
  }

  // fold: bit i is the most significant bit of byte i/8 (fedmol-v1 convention)
  const bytes = new Uint8Array(nBits / 8);
  for (const hash of seen) {
    const bit = hash % nBits;
    bytes[bit >> 3] |= 0x80 >> (bit & 7);
  }
  return bytes;
}

export function fingerprintHex(bytes: Uint8Array): string {
  return [...bytes].map((b) => b.toString(16).padStart(2, "0")).join("");
}

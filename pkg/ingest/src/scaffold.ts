// Murcko scaffold extraction (iterative terminal-atom pruning) and a
// canonical SMILES writer used for scaffold identity keys.  Canonical ranks
// come from iterative neighborhood refinement with deterministic tie
// breaking, so any atom ordering of the same (kekulization-consistent) input
// graph yields the same string.  Keys only need equality semantics downstream.

import {
  Atom, Bond, Molecule, bondsOf, hydrogenCounts, neighborsOf, ringMembership, subgraph,
} from "./molecule.js";

export const NO_SCAFFOLD = "NO_SCAFFOLD";

const ORGANIC_SUBSET = new Set(["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"]);

/** Ring systems + linkers: iteratively prune degree-1 atoms; null when acyclic. */
export function murckoScaffold(mol: Molecule): Molecule | null {
  const degree = mol.atoms.map(() => 0);
  const alive = mol.atoms.map(() => true);
  const adjacency = neighborsOf(mol);
  for (const bond of mol.bonds) {
    degree[bond.a]++;
    degree[bond.b]++;
  }
  let queue = mol.atoms.filter((a) => degree[a.index] <= 1).map((a) => a.index);
  while (queue.length > 0) {
    const next: number[] = [];
    for (const leaf of queue) {
      if (!alive[leaf]) continue;
      alive[leaf] = false;
      for (const other of adjacency[leaf]) {
        if (alive[other] && --degree[other] === 1) next.push(other);
      }
    }
    queue = next;
  }
  const kept = mol.atoms.filter((a) => alive[a.index]).map((a) => a.index);
  if (kept.length === 0) return null;
  const scaffold = subgraph(mol, kept);
  // an atom that lost side-chain neighbors must not keep a pinned H count:
  // its hydrogens are recomputed from the scaffold's own valences
  for (const atom of scaffold.atoms) {
    const original = kept[atom.index];
    if (degree[original] < adjacency[original].length) {
      (atom as { explicitH: number | null }).explicitH = null;
    }
  }
  return scaffold;
}

/** Canonical SMILES of the scaffold, or NO_SCAFFOLD for acyclic molecules. */
export function scaffoldKey(mol: Molecule): string {
  const scaffold = murckoScaffold(mol);
  return scaffold === null ? NO_SCAFFOLD : canonicalSmiles(scaffold);
}

function initialRanks(mol: Molecule): number[] {
  const hydrogens = hydrogenCounts(mol);
  const inRing = ringMembership(mol);
  const adjacency = neighborsOf(mol);
  return ranksOf(
    mol.atoms.map((atom) =>
      [
        atom.atomicNumber, atom.aromatic ? 1 : 0, atom.charge, atom.isotope,
        adjacency[atom.index].length, hydrogens[atom.index], inRing[atom.index] ? 1 : 0,
      ].join(","),
    ),
  );
}

function refineRanks(adjacency: number[][], start: number[]): number[] {
  let ranks = start;
  for (;;) {
    const refined = ranks.map((rank, i) => {
      const neighborRanks = adjacency[i].map((j) => ranks[j]).sort((x, y) => x - y);
      return `${String(rank).padStart(6, "0")}|${neighborRanks.map((r) => String(r).padStart(6, "0")).join(",")}`;
    });
    const next = ranksOf(refined);
    if (classes(next) === classes(ranks)) return next;
    ranks = next;
  }
}

function ranksOf(keys: string[]): number[] {
  const sorted = [...new Set(keys)].sort();
  const index = new Map(sorted.map((k, i) => [k, i]));
  return keys.map((k) => index.get(k)!);
}

function classes(ranks: number[]): number {
  return new Set(ranks).size;
}

const MAX_CANONICAL_BRANCHES = 20_000;

/**
 * Canonical SMILES: branch over every member of the first still-tied
 * refinement class and keep the lexicographically smallest emission.
 * Neighborhood refinement alone is not a complete invariant, and picking a
 * tied atom by input index would make the string depend on atom order; the
 * branch-and-minimize search is order-independent by construction.  Scaffold
 * graphs are small, so the branching stays cheap.
 */
export function canonicalSmiles(mol: Molecule): string {
  if (mol.atoms.length === 0) throw new Error("cannot write SMILES of an empty molecule");
  const n = mol.atoms.length;
  const adjacency = neighborsOf(mol);
  let best: string | null = null;
  let budget = MAX_CANONICAL_BRANCHES;

  const visit = (ranks: number[]): void => {
    if (classes(ranks) === n) {
      const candidate = emitSmiles(mol, ranks);
      if (best === null || candidate < best) best = candidate;
      return;
    }
    if (--budget < 0) throw new Error("canonicalization branch budget exceeded");
    const byRank = new Map<number, number[]>();
    ranks.forEach((rank, i) => byRank.set(rank, [...(byRank.get(rank) ?? []), i]));
    const tiedRank = [...byRank.keys()].sort((x, y) => x - y).find((r) => byRank.get(r)!.length > 1)!;
    for (const chosen of byRank.get(tiedRank)!) {
      const bumped = ranksOf(
        ranks.map((rank, i) => String(2 * rank + (i === chosen ? 0 : 1)).padStart(7, "0")),
      );
      visit(refineRanks(adjacency, bumped));
    }
  };
  visit(refineRanks(adjacency, initialRanks(mol)));
  return best!;
}

function emitSmiles(mol: Molecule, ranks: number[]): string {
  const adjacency = bondsOf(mol);
  const order = (i: number) =>
    [...adjacency[i]].sort((x, y) => ranks[otherEnd(x, i)] - ranks[otherEnd(y, i)]);

  // pass 1: DFS from the rank-0 atom, record tree children and ring closures
  const root = ranks.indexOf(0);
  const visited = new Array(mol.atoms.length).fill(false);
  const children = new Map<number, Array<{ atom: number; bond: Bond }>>();
  const closures = new Map<number, Array<{ digit: number; bond: Bond }>>();
  const seenBonds = new Set<Bond>();
  let nextDigit = 1;

  const stack: Array<{ atom: number; slot: number; edges: Bond[] }> = [
    { atom: root, slot: 0, edges: order(root) },
  ];
  visited[root] = true;
  while (stack.length > 0) {
    const frame = stack[stack.length - 1];
    if (frame.slot >= frame.edges.length) {
      stack.pop();
      continue;
    }
    const bond = frame.edges[frame.slot++];
    if (seenBonds.has(bond)) continue;
    seenBonds.add(bond);
    const other = otherEnd(bond, frame.atom);
    if (!visited[other]) {
      visited[other] = true;
      children.set(frame.atom, [...(children.get(frame.atom) ?? []), { atom: other, bond }]);
      stack.push({ atom: other, slot: 0, edges: order(other) });
    } else {
      const digit = nextDigit++;
      closures.set(frame.atom, [...(closures.get(frame.atom) ?? []), { digit, bond }]);
      closures.set(other, [...(closures.get(other) ?? []), { digit, bond }]);
    }
  }

  // pass 2: emit (iterative, children in recorded order)
  const hydrogens = hydrogenCounts(mol);
  const pieces: string[] = [];
  type Step = { kind: "atom"; atom: number; bond: Bond | null } | { kind: "text"; text: string };
  const work: Step[] = [{ kind: "atom", atom: root, bond: null }];
  while (work.length > 0) {
    const step = work.pop()!;
    if (step.kind === "text") {
      pieces.push(step.text);
      continue;
    }
    const { atom, bond } = step;
    if (bond !== null) pieces.push(bondToken(bond, mol));
    pieces.push(atomToken(mol.atoms[atom], hydrogens[atom]));
    for (const closure of closures.get(atom) ?? []) {
      pieces.push(bondToken(closure.bond, mol) + closureDigit(closure.digit));
    }
    const kids = children.get(atom) ?? [];
    for (let k = kids.length - 1; k >= 0; k--) {
      const last = k === kids.length - 1;
      if (!last) work.push({ kind: "text", text: ")" });
      work.push({ kind: "atom", atom: kids[k].atom, bond: kids[k].bond });
      if (!last) work.push({ kind: "text", text: "(" });
    }
  }
  return pieces.join("");
}

function otherEnd(bond: Bond, atom: number): number {
  return bond.a === atom ? bond.b : bond.a;
}

function closureDigit(digit: number): string {
  return digit < 10 ? String(digit) : `%${String(digit).padStart(2, "0")}`;
}

function bondToken(bond: Bond, mol: Molecule): string {
  if (bond.aromatic) return "";
  if (bond.order === 2) return "=";
  if (bond.order === 3) return "#";
  // explicit single bond between two aromatic atoms (e.g. biphenyl)
  if (mol.atoms[bond.a].aromatic && mol.atoms[bond.b].aromatic) return "-";
  return "";
}

function atomToken(atom: Atom, hydrogens: number): string {
  const symbol = atom.aromatic ? atom.symbol.toLowerCase() : atom.symbol;
  const needsBracket =
    atom.charge !== 0 ||
    atom.isotope !== 0 ||
    !ORGANIC_SUBSET.has(atom.symbol) ||
    (atom.aromatic && atom.symbol === "N" && hydrogens > 0);
  if (!needsBracket) return symbol;
  let token = "[";
  if (atom.isotope !== 0) token += atom.isotope;
  token += symbol;
  if (hydrogens === 1) token += "H";
  else if (hydrogens > 1) token += `H${hydrogens}`;
  if (atom.charge === 1) token += "+";
  else if (atom.charge === -1) token += "-";
  else if (atom.charge > 1) token += `+${atom.charge}`;
  else if (atom.charge < -1) token += `-${-atom.charge}`;
  return token + "]";
}

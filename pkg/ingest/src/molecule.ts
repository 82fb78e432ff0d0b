// Molecular graph model shared by the parser, scaffold extraction and
// fingerprinting. Hydrogens are implicit unless a bracket atom pinned them.

export interface Atom {
  index: number;
  symbol: string;
  atomicNumber: number;
  aromatic: boolean;
  charge: number;
  isotope: number; // 0 = unspecified
  explicitH: number | null; // bracket H count; null = infer from valence
}

export type BondOrder = 1 | 2 | 3;

export interface Bond {
  a: number;
  b: number;
  order: BondOrder;
  aromatic: boolean;
}

export interface Molecule {
  atoms: Atom[];
  bonds: Bond[];
}

export const ATOMIC_NUMBERS: Record<string, number> = {
  H: 1, Li: 3, B: 5, C: 6, N: 7, O: 8, F: 9, Na: 11, Mg: 12, Al: 13,
  Si: 14, P: 15, S: 16, Cl: 17, K: 19, Ca: 20, Mn: 25, Fe: 26, Cu: 29,
  Zn: 30, As: 33, Se: 34, Br: 35, Ag: 47, Sn: 50, I: 53, Pt: 78, Au: 79,
  Hg: 80,
};

// allowed valences, smallest preferred
const VALENCES: Record<string, number[]> = {
  B: [3], C: [4], N: [3, 5], O: [2], F: [1], Si: [4], P: [3, 5],
  S: [2, 4, 6], Cl: [1], Br: [1], I: [1], Se: [2, 4, 6], H: [1],
};

export function neighborsOf(mol: Molecule): number[][] {
  const out: number[][] = mol.atoms.map(() => []);
  for (const bond of mol.bonds) {
    out[bond.a].push(bond.b);
    out[bond.b].push(bond.a);
  }
  return out;
}

export function bondsOf(mol: Molecule): Bond[][] {
  const out: Bond[][] = mol.atoms.map(() => []);
  for (const bond of mol.bonds) {
    out[bond.a].push(bond);
    out[bond.b].push(bond);
  }
  return out;
}

function bondOrderSum(mol: Molecule, atom: number): number {
  let sum = 0;
  for (const bond of mol.bonds) {
    if (bond.a === atom || bond.b === atom) {
      sum += bond.aromatic ? 1.5 : bond.order;
    }
  }
  return sum;
}

/** Implicit+explicit hydrogen count per atom. */
export function hydrogenCounts(mol: Molecule): number[] {
  return mol.atoms.map((atom) => {
    if (atom.explicitH !== null) return atom.explicitH;
    const valences = VALENCES[atom.symbol];
    if (!valences) return 0;
    const used = Math.ceil(bondOrderSum(mol, atom.index));
    // a charge stretches or shrinks the effective valence ([NH4+], [O-])
    for (const valence of valences.map((v) => v + atom.charge)) {
      if (used <= valence) return valence - used;
    }
    return 0;
  });
}

/** Per-atom ring membership: an atom is in a ring iff it touches a non-bridge edge. */
export function ringMembership(mol: Molecule): boolean[] {
  const n = mol.atoms.length;
  const adjacency: Array<Array<{ to: number; edge: number }>> = mol.atoms.map(() => []);
  mol.bonds.forEach((bond, edge) => {
    adjacency[bond.a].push({ to: bond.b, edge });
    adjacency[bond.b].push({ to: bond.a, edge });
  });

  const isBridge = new Array(mol.bonds.length).fill(false);
  const visited = new Array(n).fill(false);
  const discovery = new Array(n).fill(0);
  const low = new Array(n).fill(0);
  let clock = 0;

  for (let root = 0; root < n; root++) {
    if (visited[root]) continue;
    // iterative Tarjan bridge finding
    const stack: Array<{ node: number; parentEdge: number; slot: number }> = [
      { node: root, parentEdge: -1, slot: 0 },
    ];
    visited[root] = true;
    discovery[root] = low[root] = clock++;
    while (stack.length > 0) {
      const frame = stack[stack.length - 1];
      if (frame.slot < adjacency[frame.node].length) {
        const { to, edge } = adjacency[frame.node][frame.slot++];
        if (edge === frame.parentEdge) continue;
        if (!visited[to]) {
          visited[to] = true;
          discovery[to] = low[to] = clock++;
          stack.push({ node: to, parentEdge: edge, slot: 0 });
        } else {
          low[frame.node] = Math.min(low[frame.node], discovery[to]);
        }
      } else {
        stack.pop();
        if (stack.length > 0) {
          const parent = stack[stack.length - 1];
          low[parent.node] = Math.min(low[parent.node], low[frame.node]);
          if (low[frame.node] > discovery[parent.node]) {
            isBridge[frame.parentEdge] = true;
          }
        }
      }
    }
  }

  const inRing = new Array(n).fill(false);
  mol.bonds.forEach((bond, edge) => {
    if (!isBridge[edge]) {
      inRing[bond.a] = true;
      inRing[bond.b] = true;
    }
  });
  return inRing;
}

/** Connected components as lists of atom indices. */
export function components(mol: Molecule): number[][] {
  const adjacency = neighborsOf(mol);
  const seen = new Array(mol.atoms.length).fill(false);
  const out: number[][] = [];
  for (let start = 0; start < mol.atoms.length; start++) {
    if (seen[start]) continue;
    const queue = [start];
    seen[start] = true;
    const part: number[] = [];
    while (queue.length > 0) {
      const node = queue.pop()!;
      part.push(node);
      for (const next of adjacency[node]) {
        if (!seen[next]) {
          seen[next] = true;
          queue.push(next);
        }
      }
    }
    out.push(part.sort((x, y) => x - y));
  }
  return out;
}

/** Induced subgraph on the kept atoms (reindexed, order preserved). */
export function subgraph(mol: Molecule, kept: number[]): Molecule {
  const remap = new Map<number, number>();
  kept.forEach((old, fresh) => remap.set(old, fresh));
  const atoms: Atom[] = kept.map((old, fresh) => ({ ...mol.atoms[old], index: fresh }));
  const bonds: Bond[] = [];
  for (const bond of mol.bonds) {
    const a = remap.get(bond.a);
    const b = remap.get(bond.b);
    if (a !== undefined && b !== undefined) {
      bonds.push({ a, b, order: bond.order, aromatic: bond.aromatic });
    }
  }
  return { atoms, bonds };
}

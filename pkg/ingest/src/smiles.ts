// SMILES parser covering the common drug-like subset: organic-subset atoms,
// bracket atoms (isotope, charge, explicit H, chirality markers), single /
// double / triple / aromatic bonds, branches, ring closures (incl. %nn) and
// dot-separated fragments. Stereo bond markers (/ and \) parse as single
// bonds; chirality tags are accepted and dropped — this tool only needs the
// connection graph.

import { ATOMIC_NUMBERS, Atom, Bond, BondOrder, Molecule } from "./molecule.js";

const ORGANIC_SUBSET = new Set(["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"]);
const AROMATIC_SYMBOLS = new Set(["b", "c", "n", "o", "p", "s", "se"]);
const TWO_LETTER = ["Cl", "Br"];

export class SmilesError extends Error {
  constructor(message: string, public readonly position: number) {
    super(`${message} (at position ${position})`);
  }
}

interface PendingRing {
  atom: number;
  bond: string | null;
}

export function parseSMILES(smiles: string): Molecule {
  const text = smiles.trim();
  if (text.length === 0) throw new SmilesError("empty SMILES", 0);

  const atoms: Atom[] = [];
  const bonds: Bond[] = [];
  const stack: number[] = [];
  const rings = new Map<number, PendingRing>();
  let previous: number | null = null;
  let pendingBond: string | null = null;
  let i = 0;

  const addAtom = (atom: Omit<Atom, "index">): number => {
    const index = atoms.length;
    atoms.push({ ...atom, index });
    if (previous !== null) {
      bonds.push(makeBond(previous, index, pendingBond, atoms));
    }
    pendingBond = null;
    previous = index;
    return index;
  };

  while (i < text.length) {
    const ch = text[i];

    if (ch === "(") {
      if (previous === null) throw new SmilesError("branch before any atom", i);
      stack.push(previous);
      i++;
    } else if (ch === ")") {
      if (stack.length === 0) throw new SmilesError("unmatched ')'", i);
      previous = stack.pop()!;
      i++;
    } else if (ch === "-" || ch === "=" || ch === "#" || ch === ":" || ch === "/" || ch === "\\") {
      pendingBond = ch === "/" || ch === "\\" ? "-" : ch;
      i++;
    } else if (ch === ".") {
      previous = null;
      pendingBond = null;
      i++;
    } else if (ch >= "0" && ch <= "9") {
      closeRing(Number(ch), i);
      i++;
    } else if (ch === "%") {
      if (i + 2 >= text.length + 1 || !/^\d\d$/.test(text.slice(i + 1, i + 3))) {
        throw new SmilesError("bad %nn ring closure", i);
      }
      closeRing(Number(text.slice(i + 1, i + 3)), i);
      i += 3;
    } else if (ch === "[") {
      const end = text.indexOf("]", i);
      if (end < 0) throw new SmilesError("unterminated bracket atom", i);
      addAtom(parseBracket(text.slice(i + 1, end), i));
      i = end + 1;
    } else {
      // organic subset, possibly two letters, possibly aromatic lowercase
      const two = text.slice(i, i + 2);
      if (TWO_LETTER.includes(two)) {
        addAtom(plainAtom(two, false, i));
        i += 2;
      } else if (ORGANIC_SUBSET.has(ch)) {
        addAtom(plainAtom(ch, false, i));
        i += 1;
      } else if (AROMATIC_SYMBOLS.has(ch)) {
        addAtom(plainAtom(ch.toUpperCase(), true, i));
        i += 1;
      } else {
        throw new SmilesError(`unexpected character ${JSON.stringify(ch)}`, i);
      }
    }
  }
  if (stack.length > 0) throw new SmilesError("unmatched '('", text.length);
  if (rings.size > 0) {
    throw new SmilesError(`unclosed ring bond(s): ${[...rings.keys()].join(", ")}`, text.length);
  }
  if (atoms.length === 0) throw new SmilesError("no atoms", 0);
  return { atoms, bonds };

  function closeRing(number: number, position: number): void {
    if (previous === null) throw new SmilesError("ring closure before any atom", position);
    const open = rings.get(number);
    if (open === undefined) {
      rings.set(number, { atom: previous, bond: pendingBond });
      pendingBond = null;
      return;
    }
    rings.delete(number);
    if (open.atom === previous) throw new SmilesError("ring bond to itself", position);
    const token = pendingBond ?? open.bond;
    bonds.push(makeBond(open.atom, previous, token, atoms));
    pendingBond = null;
  }
}

function plainAtom(symbol: string, aromatic: boolean, position: number): Omit<Atom, "index"> {
  const atomicNumber = ATOMIC_NUMBERS[symbol];
  if (atomicNumber === undefined) throw new SmilesError(`unknown element ${symbol}`, position);
  return { symbol, atomicNumber, aromatic, charge: 0, isotope: 0, explicitH: null };
}

function parseBracket(body: string, position: number): Omit<Atom, "index"> {
  const match = body.match(
    /^(\d+)?([A-Za-z][a-z]?)(@{1,2})?(H\d*)?((?:\+{1,3}|-{1,3})|(?:[+-]\d+))?$/,
  );
  if (!match) throw new SmilesError(`cannot parse bracket atom [${body}]`, position);
  const [, isotopeText, rawSymbol, , hText, chargeText] = match;

  let symbol = rawSymbol;
  let aromatic = false;
  if (AROMATIC_SYMBOLS.has(rawSymbol)) {
    aromatic = true;
    symbol = rawSymbol.length === 2
      ? rawSymbol[0].toUpperCase() + rawSymbol[1]
      : rawSymbol.toUpperCase();
  }
  const atomicNumber = ATOMIC_NUMBERS[symbol];
  if (atomicNumber === undefined) throw new SmilesError(`unknown element ${symbol}`, position);

  let charge = 0;
  if (chargeText) {
    if (/^[+-]\d+$/.test(chargeText)) {
      charge = Number(chargeText);
    } else {
      charge = (chargeText[0] === "+" ? 1 : -1) * chargeText.length;
    }
  }
  let explicitH = 0;
  if (hText) explicitH = hText === "H" ? 1 : Number(hText.slice(1));

  return {
    symbol,
    atomicNumber,
    aromatic,
    charge,
    isotope: isotopeText ? Number(isotopeText) : 0,
    explicitH,
  };
}

function makeBond(a: number, b: number, token: string | null, atoms: Atom[]): Bond {
  if (token === "=") return { a, b, order: 2, aromatic: false };
  if (token === "#") return { a, b, order: 3, aromatic: false };
  if (token === ":") return { a, b, order: 1, aromatic: true };
  if (token === "-") return { a, b, order: 1, aromatic: false };
  // default bond: aromatic when both endpoints are aromatic
  const aromatic = atoms[a].aromatic && atoms[b].aromatic;
  return { a, b, order: 1, aromatic };
}

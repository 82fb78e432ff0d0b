export { parseSMILES, SmilesError } from "./smiles.js";
export { murckoScaffold, scaffoldKey, canonicalSmiles, NO_SCAFFOLD } from "./scaffold.js";
export { morganFingerprint, fingerprintHex } from "./fingerprint.js";
export { ingestCsv, largestFragment } from "./ingest.js";
export { parseCsv } from "./csv.js";
export type { Molecule, Atom, Bond } from "./molecule.js";

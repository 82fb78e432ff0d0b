"""Canonical data model and file format for molecular fingerprint datasets.

A dataset file is line-oriented TSV (UTF-8, LF):

    #fedmol-v1<TAB>F=<bits>
    mol_id<TAB>scaffold<TAB>fp_hex<TAB>meta:<group>[:num]...
    <one record per line>

``fp_hex`` holds exactly F/4 lowercase hex chars; bit 0 of the fingerprint is
the most significant bit of the first hex char.  Metadata groups suffixed
``:num`` are numeric, all others categorical; a missing value is the literal
``NA``.  Partitioned datasets are one such file per client, named
``<dataset>.client<k>.tsv``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = "#fedmol-v1"
NO_SCAFFOLD = "NO_SCAFFOLD"
NA = "NA"

_HEX_CHARS = frozenset(string.digits + "abcdef")


class DatasetFormatError(ValueError):
    """A dataset file violates the canonical format; carries the line number."""

    def __init__(self, message: str, path: object = None, line_no: int | None = None):
        self.path = path
        self.line_no = line_no
        where = f"{path}:{line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    fingerprint_bits: int
    feature_groups: tuple[tuple[str, str], ...]  # (name, "categorical" | "numeric")
    record_count: int

    def __post_init__(self):
        if self.fingerprint_bits <= 0 or self.fingerprint_bits % 4 != 0:
            raise ValueError(f"fingerprint_bits must be a positive multiple of 4, got {self.fingerprint_bits}")
        for name, kind in self.feature_groups:
            if kind not in ("categorical", "numeric"):
                raise ValueError(f"unknown feature-group kind {kind!r} for group {name!r}")


@dataclass(frozen=True, eq=False)
class MoleculeRecord:
    mol_id: str
    fingerprint: np.ndarray  # uint8 vector of length F
    scaffold: str
    metadata: dict[str, object]  # group name -> str | float | None


@dataclass(frozen=True, eq=False)
class ClientShard:
    client_id: int
    records: tuple[MoleculeRecord, ...]

    def __post_init__(self):
        if not self.records:
            raise ValueError(f"client {self.client_id}: shard must not be empty")
        lengths = {len(r.fingerprint) for r in self.records}
        if len(lengths) != 1:
            raise ValueError(f"client {self.client_id}: mixed fingerprint lengths {sorted(lengths)}")

    def __len__(self) -> int:
        return len(self.records)


def fingerprint_from_hex(hex_str: str, n_bits: int) -> np.ndarray:
    """Decode fp_hex (MSB-first) into a read-only uint8 bit vector."""
    raw = np.frombuffer(bytes.fromhex(hex_str), dtype=np.uint8)
    bits = np.unpackbits(raw)[:n_bits]
    bits.flags.writeable = False
    return bits


def fingerprint_to_hex(bits: np.ndarray) -> str:
    return np.packbits(bits.astype(np.uint8)).tobytes().hex()


def fingerprint_matrix(records: Sequence[MoleculeRecord]) -> np.ndarray:
    """Stack record fingerprints into an (n, F) uint8 matrix."""
    return np.vstack([r.fingerprint for r in records])


def popcount(bits: np.ndarray) -> int:
    return int(bits.sum())


def tanimoto_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - |A∩B| / |A∪B| for two bit vectors; 0.0 when both are all-zero."""
    if a.shape != b.shape:
        raise ValueError(f"fingerprint length mismatch: {a.shape} vs {b.shape}")
    inter = int(np.sum((a != 0) & (b != 0)))
    union = int(np.sum((a != 0) | (b != 0)))
    if union == 0:
        return 0.0
    return 1.0 - inter / union


def tanimoto_matrix(fps: np.ndarray) -> np.ndarray:
    """Pairwise Tanimoto distance matrix for an (n, F) bit matrix."""
    x = (fps != 0).astype(np.float64)
    inter = x @ x.T
    pop = x.sum(axis=1)
    union = pop[:, None] + pop[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = 1.0 - inter / union
    dist[union == 0] = 0.0  # all-zero pairs are identical objects
    np.fill_diagonal(dist, 0.0)
    return dist


def _parse_header(lines: list[str], path) -> tuple[int, tuple[tuple[str, str], ...]]:
    if not lines or not lines[0].startswith(MAGIC):
        raise DatasetFormatError(f"malformed header: expected {MAGIC!r} magic", path, 1)
    parts = lines[0].split("\t")
    if len(parts) != 2 or not parts[1].startswith("F="):
        raise DatasetFormatError("malformed header: expected '#fedmol-v1<TAB>F=<bits>'", path, 1)
    try:
        n_bits = int(parts[1][2:])
    except ValueError:
        raise DatasetFormatError(f"malformed header: bad bit count {parts[1][2:]!r}", path, 1) from None
    if n_bits <= 0 or n_bits % 4 != 0:
        raise DatasetFormatError(f"malformed header: F={n_bits} is not a positive multiple of 4", path, 1)

    if len(lines) < 2:
        raise DatasetFormatError("malformed header: missing column header line", path, 2)
    cols = lines[1].split("\t")
    if cols[:3] != ["mol_id", "scaffold", "fp_hex"]:
        raise DatasetFormatError("malformed header: first columns must be mol_id, scaffold, fp_hex", path, 2)
    groups = []
    for col in cols[3:]:
        if not col.startswith("meta:"):
            raise DatasetFormatError(f"malformed header: metadata column {col!r} must start with 'meta:'", path, 2)
        spec = col[5:]
        if spec.endswith(":num"):
            name, kind = spec[:-4], "numeric"
        else:
            name, kind = spec, "categorical"
        if not name:
            raise DatasetFormatError(f"malformed header: empty group name in {col!r}", path, 2)
        groups.append((name, kind))
    names = [g for g, _ in groups]
    if len(set(names)) != len(names):
        raise DatasetFormatError("malformed header: duplicate metadata group names", path, 2)
    return n_bits, tuple(groups)


def read_dataset(path) -> tuple[DatasetManifest, list[MoleculeRecord]]:
    """Parse a canonical dataset file; errors carry the offending line number."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    n_bits, groups = _parse_header(lines, path)
    hex_len = n_bits // 4
    n_cols = 3 + len(groups)

    records: list[MoleculeRecord] = []
    seen_ids: set[str] = set()
    for i, line in enumerate(lines[2:], start=3):
        cells = line.split("\t")
        if len(cells) != n_cols:
            raise DatasetFormatError(f"inconsistent column count: expected {n_cols}, got {len(cells)}", path, i)
        mol_id, scaffold, fp_hex = cells[0], cells[1], cells[2]
        if mol_id in seen_ids:
            raise DatasetFormatError(f"duplicate mol_id {mol_id!r}", path, i)
        seen_ids.add(mol_id)
        if not scaffold:
            raise DatasetFormatError("empty scaffold key (use NO_SCAFFOLD for acyclic molecules)", path, i)
        if len(fp_hex) != hex_len:
            raise DatasetFormatError(f"wrong hex length: expected {hex_len} chars for F={n_bits}, got {len(fp_hex)}", path, i)
        if not set(fp_hex) <= _HEX_CHARS:
            raise DatasetFormatError("invalid fingerprint hex (must be lowercase [0-9a-f])", path, i)
        meta: dict[str, object] = {}
        for (name, kind), cell in zip(groups, cells[3:]):
            if cell == NA:
                meta[name] = None
            elif kind == "numeric":
                try:
                    meta[name] = float(cell)
                except ValueError:
                    raise DatasetFormatError(f"bad numeric value {cell!r} for group {name!r}", path, i) from None
            else:
                meta[name] = cell
        records.append(MoleculeRecord(mol_id, fingerprint_from_hex(fp_hex, n_bits), scaffold, meta))

    manifest = DatasetManifest(
        name=dataset_name(path),
        fingerprint_bits=n_bits,
        feature_groups=groups,
        record_count=len(records),
    )
    return manifest, records


def dataset_name(path: Path) -> str:
    """Dataset name implied by a file path (the stem without .tsv)."""
    stem = path.name
    if stem.endswith(".tsv"):
        stem = stem[:-4]
    return stem


def write_dataset(manifest: DatasetManifest, records: Sequence[MoleculeRecord], path) -> None:
    """Write a canonical dataset file; identical inputs yield identical bytes."""
    if manifest.record_count != len(records):
        raise ValueError(f"manifest record_count {manifest.record_count} != {len(records)} records")
    ids = {r.mol_id for r in records}
    if len(ids) != len(records):
        raise ValueError("duplicate mol_id in records")
    group_names = [name for name, _ in manifest.feature_groups]
    header_cols = ["mol_id", "scaffold", "fp_hex"]
    for name, kind in manifest.feature_groups:
        header_cols.append(f"meta:{name}:num" if kind == "numeric" else f"meta:{name}")

    out = [f"{MAGIC}\tF={manifest.fingerprint_bits}", "\t".join(header_cols)]
    for rec in records:
        if len(rec.fingerprint) != manifest.fingerprint_bits:
            raise ValueError(f"record {rec.mol_id}: fingerprint length {len(rec.fingerprint)} != F={manifest.fingerprint_bits}")
        cells = [rec.mol_id, rec.scaffold, fingerprint_to_hex(rec.fingerprint)]
        for name, kind in manifest.feature_groups:
            value = rec.metadata.get(name)
            if kind == "categorical" and isinstance(value, str):
                if value == NA:
                    raise ValueError(f"record {rec.mol_id}: categorical value equal to the NA token is not representable")
                if "\t" in value or "\n" in value:
                    raise ValueError(f"record {rec.mol_id}: metadata value contains tab/newline")
            if kind == "numeric" and value is not None:
                value = float(value)
            cells.append(_format_cell(value))
        out.append("\t".join(cells))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def _format_cell(value: object) -> str:
    if value is None:
        return NA
    if isinstance(value, float):
        return repr(value)
    return str(value)


def infer_feature_kinds(records: Sequence[MoleculeRecord]) -> dict[str, str]:
    """Recover group kinds from parsed values (float => numeric); all-NA groups count as categorical."""
    kinds: dict[str, str] = {}
    for name in records[0].metadata:
        kind = "categorical"
        for rec in records:
            v = rec.metadata.get(name)
            if isinstance(v, float):
                kind = "numeric"
                break
            if isinstance(v, str):
                break
        kinds[name] = kind
    return kinds


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale stand-in for a fingerprint+scaffold dataset.

    Each scaffold gets a core bit pattern and each molecule is its scaffold
    core plus ``noise_bits`` extra bits sampled outside the core.  Cores are
    disjoint whenever they fit into F; otherwise they are sampled from a
    compact shared region twice the core size, which makes the region's bits
    mid-frequency (high-entropy) on every client the way common substructure
    bits are in real fingerprint data.
    """

    n_scaffolds: int
    molecules_per_scaffold: int
    bits_per_scaffold_core: int
    noise_bits: int
    fingerprint_bits: int = 2048
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        if self.n_scaffolds < 1:
            raise ValueError("n_scaffolds must be >= 1")
        if self.molecules_per_scaffold < 1:
            raise ValueError("molecules_per_scaffold must be >= 1")
        if self.bits_per_scaffold_core + self.noise_bits > self.fingerprint_bits:
            raise ValueError("bits_per_scaffold_core + noise_bits must not exceed fingerprint_bits")
        if self.fingerprint_bits % 4 != 0:
            raise ValueError("fingerprint_bits must be a multiple of 4")


def generate_synthetic(spec: SyntheticSpec) -> tuple[DatasetManifest, list[MoleculeRecord]]:
    """Generate the synthetic dataset described by ``spec`` (pure in the seed).

    Metadata carries the scaffold key itself, a "series" group that is a
    deterministic function of the scaffold (correlated), and a "lab" group
    drawn independently of it (uncorrelated).
    """
    rng = np.random.default_rng(spec.seed)
    F = spec.fingerprint_bits
    cores: list[np.ndarray] = []
    if spec.n_scaffolds * spec.bits_per_scaffold_core <= F:
        perm = rng.permutation(F)
        for i in range(spec.n_scaffolds):
            cores.append(np.sort(perm[i * spec.bits_per_scaffold_core:(i + 1) * spec.bits_per_scaffold_core]))
    else:
        region = np.sort(rng.permutation(F)[:min(F, 2 * spec.bits_per_scaffold_core)])
        for _ in range(spec.n_scaffolds):
            cores.append(np.sort(rng.choice(region, size=spec.bits_per_scaffold_core, replace=False)))

    n_series = max(2, spec.n_scaffolds // 2)
    records: list[MoleculeRecord] = []
    for i in range(spec.n_scaffolds):
        scaffold = f"SCAF{i:04d}"
        non_core = np.setdiff1d(np.arange(F), cores[i])
        for j in range(spec.molecules_per_scaffold):
            bits = np.zeros(F, dtype=np.uint8)
            bits[cores[i]] = 1
            if spec.noise_bits > 0:
                bits[rng.choice(non_core, size=spec.noise_bits, replace=False)] = 1
            bits.flags.writeable = False
            meta = {
                "scaffold": scaffold,
                "series": f"series{i % n_series:03d}",
                "lab": f"lab{int(rng.integers(4))}",
            }
            records.append(MoleculeRecord(f"M{i:04d}_{j:04d}", bits, scaffold, meta))

    manifest = DatasetManifest(
        name=spec.name,
        fingerprint_bits=F,
        feature_groups=(("scaffold", "categorical"), ("series", "categorical"), ("lab", "categorical")),
        record_count=len(records),
    )
    return manifest, records

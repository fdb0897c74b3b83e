#!/usr/bin/env python3
"""Regenerates the bundled synthetic corpus and the test fixtures.

    python3 tools/make_corpus.py [repo_root]

Backbones are built from ideal bond geometry and a scripted phi/psi track, so
the files are deterministic and need no download.
"""

import math
import random
import struct
import sys
from pathlib import Path

T4L = ("MNIFEMLRIDEGLRLKIYKDTEGYYTIGIGHLLTKSPSLNAAKSELDKAIGRNTNGVITKDEAEKLFNQDVDAAVRGIL"
       "RNAKLKPVYDSLDAVRRCALINMVFQMGETGVAGFTNSLRMLQQKRWDEAAVNLAKSRWYNQTPNRAKRVITTFRTGTWDAYKNL")
MINI = "GSHMKTAYIAKQRQISFVKSHFSRQLEERLGLIEVQAPILSRVGDGTQDNLSGAEKAVQVKVKALPDAQFEVV"

THREE = {"A": "ALA", "C": "CYS", "D": "ASP", "E": "GLU", "F": "PHE", "G": "GLY", "H": "HIS", "I": "ILE",
         "K": "LYS", "L": "LEU", "M": "MET", "N": "ASN", "P": "PRO", "Q": "GLN", "R": "ARG", "S": "SER",
         "T": "THR", "V": "VAL", "W": "TRP", "Y": "TYR"}
ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
KD = {"A": 1.8, "R": -4.5, "N": -3.5, "D": -3.5, "C": 2.5, "Q": -3.5, "E": -3.5, "G": -0.4, "H": -3.2, "I": 4.5,
      "L": 3.8, "K": -3.9, "M": 1.9, "F": 2.8, "P": -1.6, "S": -0.8, "T": -0.7, "W": -0.9, "Y": -1.3, "V": 4.2}


def sub(a, b):
    return [a[i] - b[i] for i in range(3)]


def add(a, b):
    return [a[i] + b[i] for i in range(3)]


def scale(a, s):
    return [x * s for x in a]


def cross(a, b):
    return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]


def unit(a):
    n = math.sqrt(sum(x * x for x in a))
    return [x / n for x in a]


def place(a, b, c, bond, angle, torsion):
    """Position of d given a, b, c, |cd|, angle bcd and torsion abcd (degrees)."""
    angle, torsion = math.radians(angle), math.radians(torsion)
    bc = unit(sub(c, b))
    n = unit(cross(sub(b, a), bc))
    m = cross(n, bc)
    d2 = [-bond * math.cos(angle), bond * math.sin(angle) * math.cos(torsion), bond * math.sin(angle) * math.sin(torsion)]
    return add(c, add(scale(bc, d2[0]), add(scale(m, d2[1]), scale(n, d2[2]))))


def torsion_track(n, seed):
    rng = random.Random(seed)
    out = []
    i = 0
    while i < n:
        kind = rng.choice(["helix", "helix", "strand", "loop"])
        span = rng.randint(4, 14)
        for _ in range(span):
            if kind == "helix":
                out.append((-57.0 + rng.uniform(-5, 5), -47.0 + rng.uniform(-5, 5)))
            elif kind == "strand":
                out.append((-120.0 + rng.uniform(-10, 10), 130.0 + rng.uniform(-10, 10)))
            else:
                out.append((rng.uniform(-160, -60), rng.uniform(-60, 160)))
        i += span
    return out[:n]


def build_backbone(n, seed):
    track = torsion_track(n, seed)
    N = [0.0, 0.0, 0.0]
    CA = [1.458, 0.0, 0.0]
    C = place([0.0, 1.0, 0.0], N, CA, 1.525, 111.2, -60.0)
    residues = []
    for i in range(n):
        phi, psi = track[i]
        if i > 0:
            prev = residues[-1]
            N = place(prev["N"], prev["CA"], prev["C"], 1.329, 116.2, prev_psi)
            CA = place(prev["CA"], prev["C"], N, 1.458, 121.7, 180.0)
            C = place(prev["C"], N, CA, 1.525, 111.2, phi)
        next_n = place(N, CA, C, 1.329, 116.2, psi)
        O = place(next_n, CA, C, 1.231, 120.5, 180.0)
        residues.append({"N": N, "CA": CA, "C": C, "O": O})
        prev_psi = psi
    return residues


def pdb_text(pdb_id, chain, seq, seed):
    lines = [f"HEADER    SYNTHETIC BACKBONE                                  {pdb_id}",
             "REMARK   1 IDEAL GEOMETRY, SCRIPTED TORSIONS"]
    serial = 1
    for i, (aa, atoms) in enumerate(zip(seq, build_backbone(len(seq), seed))):
        for name in ("N", "CA", "C", "O"):
            x, y, z = atoms[name]
            lines.append("ATOM  {:5d} {:<4s} {:3s} {:1s}{:4d}    {:8.3f}{:8.3f}{:8.3f}{:6.2f}{:6.2f}          {:>2s}".format(
                serial, " " + name if len(name) < 4 else name, THREE[aa], chain, i + 1, x, y, z, 1.0, 20.0, name[0]))
            serial += 1
    lines.append(f"TER   {serial:5d}      {THREE[seq[-1]]} {chain}{len(seq):4d}")
    lines.append("END")
    return "\n".join(lines) + "\n"


def mutation_rows(pdb_id, seq, n, rng):
    rows = set()
    out = []
    while len(out) < n:
        pos = rng.randint(1, len(seq))
        wt = seq[pos - 1]
        mut = rng.choice([a for a in ALPHABET if a != wt])
        if (pos, mut) in rows:
            continue
        rows.add((pos, mut))
        burial = math.sin(pos * 0.37) + 0.5 * math.cos(pos * 0.11)
        ddg = 0.35 * (KD[wt] - KD[mut]) * (0.6 + 0.4 * burial) + (0.8 if mut == "P" else 0.0) + rng.gauss(0.0, 0.3)
        out.append((pdb_id, "A", pos, wt, mut, round(ddg, 4), "val" if rng.random() < 0.13 else "train"))
    return out


def write_csv(path, rows):
    with open(path, "w") as f:
        f.write("pdb_id,chain,position,wt_aa,mut_aa,ddg,split\n")
        for r in rows:
            f.write(",".join(str(x) for x in r) + "\n")


def dedup_fixture(path):
    rng = random.Random(31)
    rows = []
    for split, n_unique, n_dup in (("train", 2487, 13), ("val", 396, 4)):
        unique = []
        keys = set()
        while len(unique) < n_unique:
            pos = rng.randint(1, 400)
            wt = rng.choice(ALPHABET)
            mut = rng.choice([a for a in ALPHABET if a != wt])
            pdb = "P%03d" % rng.randint(0, 60)
            key = (pdb, pos, wt, mut)
            if key in keys:
                continue
            keys.add(key)
            unique.append([pdb, "A", pos, wt, mut, round(rng.gauss(0.5, 1.5), 3), split])
        dups = [list(r) for r in rng.sample(unique, n_dup)]
        for d in dups:
            d[5] = round(d[5] + 0.25, 3)
        block = unique + dups
        rng.shuffle(block)
        rows.extend(block)
    write_csv(path, rows)


def golden_emb1(path):
    # id "GOLD", L=3, dim=2, rows (0.5,-1.25) (2,0) (3.75,-0.125)
    ident = b"GOLD"
    values = [0.5, -1.25, 2.0, 0.0, 3.75, -0.125]
    blob = b"EMB1" + struct.pack("<III", 3, 2, len(ident)) + ident + struct.pack("<6f", *values)
    path.write_bytes(blob)


def main():
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent
    pdb_dir = root / "data" / "corpus" / "pdb"
    pdb_dir.mkdir(parents=True, exist_ok=True)
    (pdb_dir / "2LZM.pdb").write_text(pdb_text("2LZM", "A", T4L, 2))
    (pdb_dir / "9SYN.pdb").write_text(pdb_text("9SYN", "A", MINI, 9))

    rng = random.Random(7)
    rows = mutation_rows("2LZM", T4L, 360, rng) + mutation_rows("9SYN", MINI, 140, rng)
    write_csv(root / "data" / "corpus" / "dataset.csv", rows)

    tdata = root / "tests" / "data"
    tdata.mkdir(parents=True, exist_ok=True)
    dedup_fixture(tdata / "dedup_fixture.csv")
    golden_emb1(tdata / "golden.emb1")


if __name__ == "__main__":
    main()

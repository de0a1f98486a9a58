#!/usr/bin/env python3
"""Solve a sparse SDPA (.dat-s) file and print its optimal value.

The file encodes

    (P)  min  c^T y   s.t.  sum_k y_k F_k - F_0  >= 0   (blockwise psd)

with negative block sizes denoting diagonal blocks.  The script rebuilds
(P) with cvxpy and prints ``optimal <value>`` for the primal optimum.
Note the sign convention: a problem exported as ``min <C, X>`` sits on the
file's dual side, so the value printed here is the *negative* of the
exporting solver's objective.

Usage:  solve_sdpa.py FILE [--solver CLARABEL|SCS] [--digits N]
"""

import argparse
import sys

import numpy as np


def tokenize(text):
    """All whitespace-separated tokens outside comment lines, with the
    bracket/comma decoration the format allows stripped."""
    toks = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped[0] in '"*':
            continue
        for raw in stripped.replace(",", " ").replace("(", " ").replace(")", " ") \
                           .replace("{", " ").replace("}", " ").split():
            toks.append(raw)
    return toks


def parse_dat_s(text):
    toks = tokenize(text)
    pos = 0

    def take(count):
        nonlocal pos
        if pos + count > len(toks):
            raise ValueError("unexpected end of file")
        chunk = toks[pos : pos + count]
        pos += count
        return chunk

    m = int(take(1)[0])
    nblocks = int(take(1)[0])
    sizes = [int(t) for t in take(nblocks)]
    rhs = np.array([float(t) for t in take(m)])
    entries = []
    while pos + 5 <= len(toks):
        mat, blk, i, j = (int(t) for t in take(4))
        val = float(take(1)[0])
        entries.append((mat, blk - 1, i - 1, j - 1, val))
    if pos != len(toks):
        raise ValueError(f"{len(toks) - pos} trailing tokens")
    return m, sizes, rhs, entries


def solve(m, sizes, rhs, entries, solver):
    import cvxpy as cp

    y = cp.Variable(m)
    # Per block: dense symmetric F_0 and per-constraint coefficient data.
    constraints = []
    for b, size in enumerate(sizes):
        dim = abs(size)
        f0 = np.zeros((dim, dim))
        coeff = {}  # matno -> matrix
        for mat, blk, i, j, val in entries:
            if blk != b:
                continue
            target = f0 if mat == 0 else coeff.setdefault(mat, np.zeros((dim, dim)))
            target[i, j] = val
            target[j, i] = val
        expr = -f0
        for mat, fk in sorted(coeff.items()):
            expr = expr + y[mat - 1] * fk
        if size > 0:
            constraints.append(expr >> 0)
        else:
            constraints.append(cp.diag(expr) >= 0)
    prob = cp.Problem(cp.Minimize(rhs @ y), constraints)
    prob.solve(solver=solver)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"solver status: {prob.status}")
    return prob.value, prob.status


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("file")
    ap.add_argument("--solver", default="CLARABEL", choices=["CLARABEL", "SCS"])
    ap.add_argument("--digits", type=int, default=12)
    args = ap.parse_args()

    with open(args.file) as fh:
        text = fh.read()
    m, sizes, rhs, entries = parse_dat_s(text)
    print(
        f"parsed: {m} constraints, {len(sizes)} blocks, {len(entries)} entries",
        file=sys.stderr,
    )
    try:
        value, status = solve(m, sizes, rhs, entries, args.solver)
    except Exception as exc:  # noqa: BLE001 - fall back once, then fail
        if args.solver != "SCS":
            print(f"{args.solver} failed ({exc}); retrying with SCS", file=sys.stderr)
            value, status = solve(m, sizes, rhs, entries, "SCS")
        else:
            raise
    print(f"status {status}", file=sys.stderr)
    print(f"optimal {value:.{args.digits}f}")


if __name__ == "__main__":
    main()

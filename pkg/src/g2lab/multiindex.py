"""Multi-index combinatorics for dense alternating tensors.

Degree-k forms on an n-dimensional space are stored as flat arrays over
strictly increasing multi-indices in lexicographic order (0-based
internally; printable names are 1-based).  All sign bookkeeping for
wedge, interior product and Hodge duality reduces to merge signs of
disjoint ascending tuples, which are tabulated here once per (n, k).
"""

from functools import lru_cache
from itertools import combinations

import numpy as np


@lru_cache(maxsize=None)
def indices(n: int, k: int) -> tuple:
    """All strictly increasing k-tuples from range(n), lexicographic."""
    return tuple(combinations(range(n), k))


@lru_cache(maxsize=None)
def index_position(n: int, k: int) -> dict:
    return {idx: p for p, idx in enumerate(indices(n, k))}


def dim(n: int, k: int) -> int:
    from math import comb

    return comb(n, k)


def merge_sign(a: tuple, b: tuple) -> int:
    """Sign of the shuffle sorting a+b, or 0 if they share an index."""
    if set(a) & set(b):
        return 0
    inv = 0
    for x in a:
        for y in b:
            if x > y:
                inv += 1
    return -1 if inv % 2 else 1


def perm_sign(seq) -> int:
    """Sign of the permutation sorting seq, or 0 on repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    inv = sum(
        1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j]
    )
    return -1 if inv % 2 else 1


@lru_cache(maxsize=None)
def wedge_table(n: int, p: int, q: int):
    """Triples (pos_a, pos_b, pos_ab, sign) defining the wedge bilinear map."""
    pos_ab = index_position(n, p + q)
    out = []
    for ia, a in enumerate(indices(n, p)):
        for ib, b in enumerate(indices(n, q)):
            s = merge_sign(a, b)
            if s:
                merged = tuple(sorted(a + b))
                out.append((ia, ib, pos_ab[merged], s))
    return tuple(out)


@lru_cache(maxsize=None)
def interior_table(n: int, k: int):
    """For each ambient direction i: pairs mapping degree k to k-1.

    Entry [i] is a tuple of (pos_in, pos_out, sign) with
    (e_i interior e^I) = sign * e^(I minus i) whenever i is in I, where
    sign places i in front: e^I = sign * e^i wedge e^(I minus i).
    """
    pos_out = index_position(n, k - 1)
    table = [[] for _ in range(n)]
    for p, idx in enumerate(indices(n, k)):
        for j, i in enumerate(idx):
            rest = idx[:j] + idx[j + 1 :]
            table[i].append((p, pos_out[rest], -1 if j % 2 else 1))
    return tuple(tuple(t) for t in table)


@lru_cache(maxsize=None)
def complement_table(n: int, k: int):
    """Pairs (pos, pos_complement, merge_sign(I, I^c)) for each ascending I."""
    pos_c = index_position(n, n - k)
    out = []
    full = set(range(n))
    for p, idx in enumerate(indices(n, k)):
        comp = tuple(sorted(full - set(idx)))
        out.append((p, pos_c[comp], merge_sign(idx, comp)))
    return tuple(out)


@lru_cache(maxsize=None)
def interior_matrices(n: int, k: int) -> np.ndarray:
    """Stack of n matrices M[i] with (e_i interior a) = M[i] @ a.coeffs."""
    rows = dim(n, k - 1)
    cols = dim(n, k)
    out = np.zeros((n, rows, cols))
    for i, entries in enumerate(interior_table(n, k)):
        for pos_in, pos_out, sign in entries:
            out[i, pos_out, pos_in] = sign
    return out


@lru_cache(maxsize=None)
def wedge_matrix_tensor(n: int, p: int, q: int) -> np.ndarray:
    """Dense tensor W with (a ^ b) = einsum('iab,a,b->i', W, a, b)."""
    W = np.zeros((dim(n, p + q), dim(n, p), dim(n, q)))
    for ia, ib, iab, s in wedge_table(n, p, q):
        W[iab, ia, ib] = s
    return W


def index_name(idx: tuple) -> str:
    """1-based printable name, e.g. (0, 1, 2) -> '123'."""
    return "".join(str(i + 1) for i in idx)


def name_to_index(name: str) -> tuple:
    """Inverse of index_name; validates strict ascent."""
    idx = tuple(int(c) - 1 for c in name)
    if any(not 0 <= i for i in idx) or any(
        idx[j] >= idx[j + 1] for j in range(len(idx) - 1)
    ):
        raise ValueError(f"not an ascending index name: {name!r}")
    return idx

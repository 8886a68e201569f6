"""Symmetric-group and partition combinatorics.

All public objects use 1-based indices. Internally permutations are numpy
integer arrays of 0-based images, and composition is right-to-left:
``compose(a, b)[i] = a[b[i]]``, so ``gamma^-1 alpha`` means "apply alpha
first".

Lifted permutations act on ``[p] x [k]`` flattened lexicographically,
``(i, r) -> (i - 1) * k + r``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ResourceError, ValidationError

# Enumeration caps; callers may pass an explicit override instead.
CAPS = {
    "partition_p": 12,
    "permutation_p": 8,
    "pairing_2p": 12,
    "nc_pairing_2p": 24,
    "lift_p": 5,
    "lift_k": 3,
}


def _check_cap(name: str, value: int, override: int | None = None) -> None:
    cap = CAPS[name] if override is None else override
    if value > cap:
        raise ResourceError(f"{name}={value} exceeds cap {cap}", cap=name, value=value, limit=cap)


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class Permutation:
    """Bijection of {1..p} stored as its 1-based image list."""

    images: tuple[int, ...]
    array: np.ndarray = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        imgs = tuple(int(x) for x in self.images)
        p = len(imgs)
        if sorted(imgs) != list(range(1, p + 1)):
            raise ValidationError("images must be a bijection of {1..p}", images=list(imgs))
        object.__setattr__(self, "images", imgs)
        arr = np.asarray(imgs, dtype=np.int64) - 1
        arr.setflags(write=False)
        object.__setattr__(self, "array", arr)

    @classmethod
    def from_array(cls, arr) -> "Permutation":
        return cls(tuple(int(x) + 1 for x in arr))

    @classmethod
    def identity(cls, p: int) -> "Permutation":
        return cls(tuple(range(1, p + 1)))

    @classmethod
    def from_cycles(cls, cycles: Iterable[Sequence[int]], p: int) -> "Permutation":
        """Build from 1-based cycles; ``(a b c)`` maps a->b->c->a."""
        img = list(range(1, p + 1))
        seen = set()
        for cyc in cycles:
            for t, x in enumerate(cyc):
                if not 1 <= x <= p or x in seen:
                    raise ValidationError("invalid cycle notation", cycles=[list(c) for c in cycles])
                seen.add(x)
                img[x - 1] = cyc[(t + 1) % len(cyc)]
        return cls(tuple(img))

    @property
    def size(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    def compose(self, other: "Permutation") -> "Permutation":
        """Return ``self o other`` (apply ``other`` first)."""
        _same_size(self, other)
        return Permutation.from_array(self.array[other.array])

    __mul__ = compose

    def inverse(self) -> "Permutation":
        return Permutation.from_array(np.argsort(self.array))

    def cycles(self) -> list[tuple[int, ...]]:
        out, seen = [], set()
        for start in range(1, self.size + 1):
            if start in seen:
                continue
            cyc, j = [], start
            while j not in seen:
                seen.add(j)
                cyc.append(j)
                j = self(j)
            out.append(tuple(cyc))
        return out

    def to_json(self) -> list[int]:
        return list(self.images)


@dataclass(frozen=True)
class LevelFunction:
    """Map f:[p] -> [k] given by its 1-based values."""

    values: tuple[int, ...]
    k: int

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if self.k < 1 or any(not 1 <= v <= self.k for v in vals):
            raise ValidationError("level function values must lie in {1..k}", values=list(vals), k=self.k)
        object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def image_size(self) -> int:
        return len(set(self.values))

    def level_sets(self) -> list[list[int]]:
        sets: dict[int, list[int]] = {}
        for i, v in enumerate(self.values, start=1):
            sets.setdefault(v, []).append(i)
        return [sets[v] for v in sorted(sets)]


@dataclass(frozen=True)
class PairPartition:
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple(sorted(tuple(sorted((int(a), int(b)))) for a, b in self.pairs))
        flat = sorted(x for pr in pairs for x in pr)
        if flat != list(range(1, 2 * len(pairs) + 1)) or any(a == b for a, b in pairs):
            raise ValidationError("pairs must partition {1..2p}", pairs=[list(p) for p in pairs])
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_involution(cls, perm: Permutation) -> "PairPartition":
        pairs = [(i, perm(i)) for i in range(1, perm.size + 1) if i < perm(i)]
        return cls(tuple(pairs))

    def to_permutation(self) -> Permutation:
        img = [0] * (2 * len(self.pairs))
        for a, b in self.pairs:
            img[a - 1], img[b - 1] = b, a
        return Permutation(tuple(img))

    def to_json(self) -> list[list[int]]:
        return [list(pr) for pr in self.pairs]


@dataclass(frozen=True)
class SetPartition:
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(int(x) for x in b)) for b in self.blocks), key=lambda b: b[0] if b else 0))
        flat = sorted(x for b in blocks for x in b)
        if any(len(b) == 0 for b in blocks) or flat != list(range(1, len(flat) + 1)):
            raise ValidationError("blocks must partition {1..p}", blocks=[list(b) for b in blocks])
        object.__setattr__(self, "blocks", blocks)

    @property
    def size(self) -> int:
        return sum(len(b) for b in self.blocks)

    def is_noncrossing(self) -> bool:
        """Stack scan over 1..p: a block may only be revisited when it is on top."""
        owner, last = {}, {}
        for bi, b in enumerate(self.blocks):
            for x in b:
                owner[x] = bi
            last[bi] = b[-1]
        stack: list[int] = []
        opened = set()
        for i in range(1, self.size + 1):
            b = owner[i]
            if b not in opened:
                opened.add(b)
                if last[b] != i:
                    stack.append(b)
                continue
            if not stack or stack[-1] != b:
                return False
            if last[b] == i:
                stack.pop()
        return True

    def to_permutation(self) -> Permutation:
        """Each block b_1<...<b_m becomes the cycle (b_m ... b_1), oriented like gamma."""
        return Permutation.from_cycles([b[::-1] for b in self.blocks], self.size)

    def to_json(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]


def _same_size(a: Permutation, b: Permutation) -> None:
    if a.size != b.size:
        raise ValidationError("size mismatch", sizes=[a.size, b.size])


# ---------------------------------------------------------------------------
# vectorised kernels (0-based arrays, last axis is the permutation)


def batch_compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise ``a o b`` with broadcasting over leading axes."""
    a, b = np.broadcast_arrays(a, b)
    return np.take_along_axis(a, b, axis=-1)


def batch_cycle_count(perms: np.ndarray) -> np.ndarray:
    """Number of cycles of every permutation along the last axis.

    Pointer doubling: after ceil(log2 n) rounds each point carries the
    minimum label of its cycle, and cycles are counted by their minima.
    """
    perms = np.asarray(perms)
    n = perms.shape[-1]
    if n == 0:
        return np.zeros(perms.shape[:-1], dtype=np.int64)
    lab = np.broadcast_to(np.arange(n, dtype=perms.dtype), perms.shape).copy()
    ptr = perms.copy()
    for _ in range(max(1, math.ceil(math.log2(n)))):
        lab = np.minimum(lab, np.take_along_axis(lab, ptr, axis=-1))
        ptr = np.take_along_axis(ptr, ptr, axis=-1)
    return (lab == np.arange(n)).sum(axis=-1)


def _full_cycle_array(p: int) -> np.ndarray:
    return (np.arange(p) - 1) % p


def _gamma_blocks_array(labels: np.ndarray) -> np.ndarray:
    """Product of canonical full cycles on the level sets of each row.

    ``labels`` has shape (..., n); points sharing a label form one cycle
    mapping each point to the previous point of its level set.
    """
    labels = np.asarray(labels)
    n = labels.shape[-1]
    flat = labels.reshape(-1, n)
    out = np.empty_like(flat, dtype=np.int64)
    idx = np.arange(n)
    for row in range(flat.shape[0]):
        lab = flat[row]
        res = np.empty(n, dtype=np.int64)
        for v in np.unique(lab):
            pos = idx[lab == v]
            res[pos] = np.roll(pos, 1)
        out[row] = res
    return out.reshape(labels.shape)


def all_permutations(p: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(p))), dtype=np.int64).reshape(-1, p)


def all_functions(p: int, k: int) -> np.ndarray:
    """All maps [p]->[k] as 0-based value rows, lexicographic order."""
    return np.array(list(itertools.product(range(k), repeat=p)), dtype=np.int64).reshape(-1, p)


def restricted_growth_strings(n: int, max_blocks: int | None = None) -> np.ndarray:
    """Kernels of maps [n]->[k]: one row per set partition with <= max_blocks blocks."""
    max_blocks = n if max_blocks is None else min(max_blocks, n)
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    rows: list[list[int]] = []

    def rec(prefix: list[int], top: int) -> None:
        if len(prefix) == n:
            rows.append(prefix.copy())
            return
        for v in range(min(top + 2, max_blocks)):
            prefix.append(v)
            rec(prefix, max(top, v))
            prefix.pop()

    rec([0], 0)
    return np.array(rows, dtype=np.int64)


def _pairings_rec(points: tuple[int, ...], noncrossing: bool) -> Iterator[list[tuple[int, int]]]:
    if not points:
        yield []
        return
    first, rest = points[0], points[1:]
    for t, partner in enumerate(rest):
        if noncrossing and t % 2 == 1:
            continue
        inside, outside = rest[:t], rest[t + 1 :]
        if noncrossing:
            for a in _pairings_rec(inside, True):
                for b in _pairings_rec(outside, True):
                    yield [(first, partner)] + a + b
        else:
            for a in _pairings_rec(inside + outside, False):
                yield [(first, partner)] + a


@lru_cache(maxsize=None)
def pairing_array(two_p: int, noncrossing: bool = False) -> np.ndarray:
    """All (or all non-crossing) pairings of {0..2p-1} as involution rows."""
    rows = []
    for prs in _pairings_rec(tuple(range(two_p)), noncrossing):
        row = np.empty(two_p, dtype=np.int64)
        for a, b in prs:
            row[a], row[b] = b, a
        rows.append(row)
    out = np.array(rows, dtype=np.int64).reshape(-1, two_p)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# basic operations


def cycle_count(perm: Permutation) -> int:
    return int(batch_cycle_count(perm.array))


def cayley_distance(perm: Permutation) -> int:
    """Minimal number of transpositions, p - #cycles."""
    return perm.size - cycle_count(perm)


def canonical_full_cycle(p: int) -> Permutation:
    """The cycle (p ... 1), i.e. i -> i-1 and 1 -> p."""
    if p < 1:
        raise ValidationError("p must be >= 1", p=p)
    return Permutation.from_array(_full_cycle_array(p))


def gamma_f(f: LevelFunction) -> Permutation:
    return Permutation.from_array(_gamma_blocks_array(np.asarray(f.values)))


def geodesic_defect(alpha: Permutation, f: LevelFunction) -> int:
    """delta = (p + |im f| - #alpha - #(gamma_f^-1 alpha)) / 2."""
    if alpha.size != f.size:
        raise ValidationError("size mismatch", sizes=[alpha.size, f.size])
    gf = gamma_f(f)
    twice = alpha.size + f.image_size - cycle_count(alpha) - cycle_count(gf.inverse() * alpha)
    if twice % 2 or twice < 0:
        raise AssertionError(f"parity violated for alpha={alpha.images}, f={f.values}")
    return twice // 2


def catalan(p: int) -> int:
    if p < 0:
        raise ValidationError("p must be >= 0", p=p)
    return math.comb(2 * p, p) // (p + 1)


def narayana(p: int, m: int) -> int:
    if not 1 <= m <= p:
        raise ValidationError("need 1 <= m <= p", p=p, m=m)
    return math.comb(p + 1, m) * math.comb(p - 1, m - 1) // (p + 1)


# ---------------------------------------------------------------------------
# enumeration


def _nc_blocks(points: tuple[int, ...]) -> Iterator[list[tuple[int, ...]]]:
    """Non-crossing partitions of an ordered point tuple.

    The block of the first point splits the rest into gaps that are
    partitioned independently.
    """
    if not points:
        yield []
        return
    first, rest = points[0], points[1:]
    for r in range(len(rest) + 1):
        for chosen in itertools.combinations(range(len(rest)), r):
            block = (first,) + tuple(rest[c] for c in chosen)
            bounds = (-1,) + chosen + (len(rest),)
            gaps = [rest[bounds[t] + 1 : bounds[t + 1]] for t in range(len(bounds) - 1)]
            for parts in itertools.product(*[list(_nc_blocks(g)) for g in gaps]):
                yield [block] + [b for part in parts for b in part]


def enumerate_noncrossing(p: int, cap: int | None = None) -> list[SetPartition]:
    if p < 1:
        raise ValidationError("p must be >= 1", p=p)
    _check_cap("partition_p", p, cap)
    out = [SetPartition(tuple(bl)) for bl in _nc_blocks(tuple(range(1, p + 1)))]
    out.sort(key=lambda sp: sp.blocks)
    return out


def enumerate_nc_pairings(two_p: int, cap: int | None = None) -> list[PairPartition]:
    if two_p < 2 or two_p % 2:
        raise ValidationError("two_p must be a positive even integer", two_p=two_p)
    _check_cap("nc_pairing_2p", two_p, cap)
    return sorted(
        (PairPartition(tuple(prs)) for prs in _pairings_rec(tuple(range(1, two_p + 1)), True)),
        key=lambda pp: pp.pairs,
    )


def enumerate_pairings(two_p: int, cap: int | None = None) -> list[PairPartition]:
    if two_p < 2 or two_p % 2:
        raise ValidationError("two_p must be a positive even integer", two_p=two_p)
    _check_cap("pairing_2p", two_p, cap)
    return [PairPartition.from_involution(Permutation.from_array(r)) for r in pairing_array(two_p)]


# ---------------------------------------------------------------------------
# lifted permutations


def _lift_arrays(alphas: np.ndarray, f: np.ndarray, k: int) -> np.ndarray:
    """Lift rows of ``alphas`` (shape (N, p)) for one 0-based function f."""
    n_rows, p = alphas.shape
    i = np.repeat(np.arange(p), k)
    r = np.tile(np.arange(k), p)
    ai = alphas[:, i]  # (N, pk)
    moved = r == f[i]
    target = np.where(moved, ai * k + f[ai], i * k + r)
    return target


def lift_alpha_f(alpha: Permutation, f: LevelFunction, k: int | None = None) -> Permutation:
    """alpha_hat_f(i, r) = (alpha(i), f(alpha(i))) if r = f(i), else (i, r)."""
    k = f.k if k is None else k
    if alpha.size != f.size:
        raise ValidationError("size mismatch", sizes=[alpha.size, f.size])
    if max(f.values) > k:
        raise ValidationError("f takes values above k", k=k)
    fz = np.asarray(f.values) - 1
    return Permutation.from_array(_lift_arrays(alpha.array[None, :], fz, k)[0])


def lift_gamma(p: int, k: int) -> Permutation:
    """gamma_hat(i, r) = (gamma(i), r)."""
    g = _full_cycle_array(p)
    i = np.repeat(np.arange(p), k)
    r = np.tile(np.arange(k), p)
    return Permutation.from_array(g[i] * k + r)


class LiftCheck(NamedTuple):
    ok: bool
    cases: int
    counterexamples: list


def verify_lift_formula(p: int, k: int, max_p: int | None = None, max_k: int | None = None) -> LiftCheck:
    """Exhaustively check #(gamma_hat^-1 alpha_hat_f) = #(gamma_f^-1 alpha) + k - |im f|."""
    if p < 1 or k < 1:
        raise ValidationError("p, k must be >= 1", p=p, k=k)
    _check_cap("lift_p", p, max_p)
    _check_cap("lift_k", k, max_k)
    alphas = all_permutations(p)
    ghat_inv = np.argsort(lift_gamma(p, k).array)
    bad = []
    cases = 0
    for f in all_functions(p, k):
        lifted = _lift_arrays(alphas, f, k)
        lhs = batch_cycle_count(ghat_inv[lifted])
        gf_inv = np.argsort(_gamma_blocks_array(f))
        rhs = batch_cycle_count(gf_inv[alphas]) + k - len(np.unique(f))
        cases += len(alphas)
        for row in np.flatnonzero(lhs != rhs):
            bad.append({"alpha": (alphas[row] + 1).tolist(), "f": (f + 1).tolist(), "lhs": int(lhs[row]), "rhs": int(rhs[row])})
    return LiftCheck(not bad, cases, bad)


# ---------------------------------------------------------------------------
# defect counting


class DefectCount(NamedTuple):
    count: int
    bound: Fraction | None  # None where no bound is defined
    within_bound: bool


def _kernel_weights(n: int, k: int) -> tuple[np.ndarray, list[int], np.ndarray]:
    """Set partitions with <= k blocks, the number of f having each kernel, and block counts."""
    rgs = restricted_growth_strings(n, k)
    nblocks = rgs.max(axis=1) + 1
    weights = [math.perm(k, int(b)) for b in nblocks]
    return rgs, weights, nblocks


def pairing_defect_histogram(p: int, k: int | None = None, cap: int | None = None) -> dict[int, int]:
    """delta -> count; without k over pairings, with k over pairs (f, lambda)."""
    _check_cap("pairing_2p", 2 * p, cap)
    lam = pairing_array(2 * p)
    hist: dict[int, int] = {}
    if k is None:
        ginv = np.argsort(_full_cycle_array(2 * p))
        delta = (p + 1 - batch_cycle_count(ginv[lam])) // 2
        for d_, c in zip(*np.unique(delta, return_counts=True)):
            hist[int(d_)] = int(c)
        return hist
    rgs, weights, nb = _kernel_weights(2 * p, k)
    for row, w, b in zip(rgs, weights, nb):
        gf_inv = np.argsort(_gamma_blocks_array(row))
        delta = (p + int(b) - batch_cycle_count(gf_inv[lam])) // 2
        for d_, c in zip(*np.unique(delta, return_counts=True)):
            hist[int(d_)] = hist.get(int(d_), 0) + w * int(c)
    return hist


def count_defect_pairings(p: int, delta: int, k: int | None = None, cap: int | None = None) -> DefectCount:
    """|{lambda : #(gamma^-1 lambda) = p+1-2 delta}|, or the (f, lambda) count with k.

    Bounds: Cat_p (p^4/4)^delta without k, k^(p+2 delta) Cat_p (p^4/4)^delta
    with k; both stated for delta <= floor(p/2).
    """
    if p < 1 or delta < 0:
        raise ValidationError("need p >= 1 and delta >= 0", p=p, delta=delta)
    count = pairing_defect_histogram(p, k, cap).get(delta, 0)
    bound = None
    if delta <= p // 2:
        bound = Fraction(catalan(p)) * Fraction(p**4, 4) ** delta
        if k is not None:
            bound *= k ** (p + 2 * delta)
    return DefectCount(count, bound, bound is None or count <= bound)


def permutation_defect_table(p: int, k: int | None = None, cap: int | None = None) -> dict[tuple[int, int], int]:
    """(delta, m) -> count over alpha (gamma case) or over (f, alpha)."""
    _check_cap("permutation_p", p, cap)
    alphas = all_permutations(p)
    m = batch_cycle_count(alphas)
    table: dict[tuple[int, int], int] = {}

    def add(delta, weight):
        keys, counts = np.unique(np.stack([delta, m], axis=1), axis=0, return_counts=True)
        for (d_, m_), c in zip(keys, counts):
            table[(int(d_), int(m_))] = table.get((int(d_), int(m_)), 0) + weight * int(c)

    if k is None:
        ginv = np.argsort(_full_cycle_array(p))
        add((p + 1 - m - batch_cycle_count(ginv[alphas])) // 2, 1)
        return table
    rgs, weights, nb = _kernel_weights(p, k)
    for row, w, b in zip(rgs, weights, nb):
        gf_inv = np.argsort(_gamma_blocks_array(row))
        add((p + int(b) - m - batch_cycle_count(gf_inv[alphas])) // 2, w)
    return table


def count_defect_permutations(p: int, delta: int, m: int, k: int | None = None, cap: int | None = None) -> DefectCount:
    """Size of S_{delta,m}(p) (gamma case) or of {(f, alpha) : alpha in S_{f,delta,m}(p)}.

    Bounds checked: |S_{0,m}| (p^3/2)^delta without k; (4 k^4 p^4)^delta
    sum_eps k^(m-eps) Nar_p^(m-eps) with k. Both for delta <= floor(p/2)
    and m <= p - 2 delta.
    """
    if p < 1 or delta < 0 or not 1 <= m <= p:
        raise ValidationError("need p >= 1, delta >= 0, 1 <= m <= p", p=p, delta=delta, m=m)
    count = permutation_defect_table(p, k, cap).get((delta, m), 0)
    bound = None
    if delta <= p // 2 and m <= p - 2 * delta:
        if k is None:
            bound = Fraction(narayana(p, m)) * Fraction(p**3, 2) ** delta
        else:
            s = sum(k ** (m - e) * narayana(p, m - e) for e in range(2 * delta + 1) if m - e >= 1)
            bound = Fraction(4 * k**4 * p**4) ** delta * s
    return DefectCount(count, bound, bound is None or count <= bound)


# ---------------------------------------------------------------------------
# permutation <-> even-odd pairing


def perm_to_evenodd_pairing(alpha: Permutation) -> PairPartition:
    """Pair 2i with 2 alpha^-1(i) - 1; fixed points give {2i-1, 2i}."""
    inv = alpha.inverse()
    return PairPartition(tuple((2 * i, 2 * inv(i) - 1) for i in range(1, alpha.size + 1)))


def evenodd_pairing_to_perm(lam: PairPartition) -> Permutation:
    """Collapse {2i-1, 2i} to i; inverse of ``perm_to_evenodd_pairing``."""
    p = len(lam.pairs)
    inv = [0] * p
    for a, b in lam.pairs:
        even, odd = (a, b) if a % 2 == 0 else (b, a)
        if even % 2 or odd % 2 == 0:
            raise ValidationError("pairing has an even-even or odd-odd pair", pairs=lam.to_json())
        inv[even // 2 - 1] = (odd + 1) // 2
    return Permutation(tuple(inv)).inverse()

"""Random matrices, tensor embeddings and spectra.

Operators on ``A (x) B_1 (x) ... (x) B_k`` are dense complex matrices whose
row index is the lexicographic flattening of ``(a, b_1, ..., b_k)``.

Complex normal entries have independent real and imaginary parts of
variance 1/2, so ``E|g|^2 = 1``.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import ResourceError, ValidationError

HERMITIAN_TOL = 1e-12
MEMORY_CAP_BYTES = 2 * 1024**3
SYMMETRIZE_MAX_K = 5
DENSE_NORM_MAX_DIM = 256


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class HermitianOperator:
    matrix: np.ndarray
    factor_dims: tuple[int, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dims = tuple(int(x) for x in self.factor_dims)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("matrix must be square", shape=list(m.shape))
        if any(x < 1 for x in dims) or math.prod(dims) != m.shape[0]:
            raise ValidationError("factor dims do not match matrix size", factor_dims=list(dims), dim=m.shape[0])
        scale = max(1.0, float(np.abs(m).max(initial=0.0)))
        if m.size and np.abs(m - m.conj().T).max() > HERMITIAN_TOL * scale:
            raise ValidationError("matrix is not Hermitian", deviation=float(np.abs(m - m.conj().T).max()))
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "factor_dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def roles(self) -> tuple[str, ...]:
        return ("A",) + tuple(f"B{j}" for j in range(1, len(self.factor_dims)))

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


@dataclass
class SpectralSample:
    eigenvalues: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eigenvalues = np.sort(np.asarray(self.eigenvalues, dtype=float))

    def __len__(self):
        return len(self.eigenvalues)

    def to_csv(self) -> str:
        head = "# " + ", ".join(f"{k}={v}" for k, v in self.meta.items())
        return "\n".join([head, "eigenvalue"] + [repr(float(x)) for x in self.eigenvalues]) + "\n"


# ---------------------------------------------------------------------------
# seeding and repetition runner


def rep_rng(master_seed: int, rep: int) -> np.random.Generator:
    """Stream for repetition ``rep``; injective in (master_seed, rep)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(rep),)))


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def run_reps(fn: Callable[[np.random.Generator, int], object], reps: int, seed: int, workers: int | None = None) -> list:
    """Evaluate ``fn(rng_r, r)`` for r < reps; results are returned in repetition order."""
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = range(reps)
    if workers == 1 or reps <= 1:
        return [fn(rep_rng(seed, r), r) for r in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(rep_rng(seed, r), r), jobs))


# ---------------------------------------------------------------------------
# sampling


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)


def _dims(n: int, factor_dims) -> tuple[int, ...]:
    return (n,) if factor_dims is None else tuple(factor_dims)


def sample_gue(n: int, rng: np.random.Generator, factor_dims=None) -> HermitianOperator:
    """(H + H^dagger)/sqrt(2); off-diagonal E|G_ij|^2 = 1, diagonal N(0, 1)."""
    if n < 1:
        raise ValidationError("n must be >= 1", n=n)
    h = complex_normal(rng, (n, n))
    g = (h + h.conj().T) * math.sqrt(0.5)
    return HermitianOperator(g, _dims(n, factor_dims))


def sample_wishart(n: int, s: int, rng: np.random.Generator, factor_dims=None) -> HermitianOperator:
    if n < 1 or s < 1:
        raise ValidationError("n and s must be >= 1", n=n, s=s)
    g = complex_normal(rng, (n, s))
    w = g @ g.conj().T
    return HermitianOperator((w + w.conj().T) / 2, _dims(n, factor_dims))


def sample_induced_state(n: int, s: int, rng: np.random.Generator, factor_dims=None) -> HermitianOperator:
    w = sample_wishart(n, s, rng, factor_dims)
    return HermitianOperator(w.matrix / np.trace(w.matrix).real, w.factor_dims)


def environment_size(c: float, d: int) -> int:
    """s = round(c d^2), halves rounded up."""
    s = math.floor(c * d * d + 0.5)
    if s < 1:
        raise ValidationError("c d^2 rounds to zero", c=c, d=d)
    return s


# ---------------------------------------------------------------------------
# embeddings


def _check_memory(dim: int) -> None:
    if dim * dim * 16 > MEMORY_CAP_BYTES:
        raise ResourceError("operator exceeds memory cap", dim=dim, cap_bytes=MEMORY_CAP_BYTES)


def _bipartite(m: HermitianOperator) -> tuple[int, int]:
    if len(m.factor_dims) != 2:
        raise ValidationError("expected an operator on A (x) B", factor_dims=list(m.factor_dims))
    return m.factor_dims


def _embed_into(out: np.ndarray, m4: np.ndarray, j: int, k: int, d_a: int, d_b: int) -> None:
    """Add m4 acting on (A, B_j) to ``out`` in place, by strided assembly."""
    pre, post = d_b ** (j - 1), d_b ** (k - j)
    t = out.reshape(d_a, pre, d_b, post, d_a, pre, d_b, post)
    # diagonal view over the untouched factors: t[a,i,b,q,c,i,e,q]
    view = np.einsum("aibqcieq->aibqce", t)
    view += m4[:, None, :, None, :, :]


def embedded_sum(mats: Sequence[np.ndarray], d_a: int, d_b: int) -> np.ndarray:
    """sum_j mats[j-1] acting on (A, B_j), tensored with identity elsewhere."""
    k = len(mats)
    dim = d_a * d_b**k
    _check_memory(dim)
    out = np.zeros((dim, dim), dtype=complex)
    for j, m in enumerate(mats, start=1):
        _embed_into(out, np.asarray(m).reshape(d_a, d_b, d_a, d_b), j, k, d_a, d_b)
    return out


def embed(m: HermitianOperator, j: int, k: int) -> HermitianOperator:
    """M_{AB_j} (x) Id on the remaining B factors."""
    d_a, d_b = _bipartite(m)
    if not 1 <= j <= k:
        raise ValidationError("need 1 <= j <= k", j=j, k=k)
    mats = [np.zeros_like(m.matrix)] * k
    mats[j - 1] = m.matrix
    return HermitianOperator(embedded_sum(mats, d_a, d_b), (d_a,) + (d_b,) * k)


def tensor_sum(m: HermitianOperator, k: int) -> HermitianOperator:
    """Unnormalised sum_j M~(j) over j = 1..k."""
    d_a, d_b = _bipartite(m)
    if k < 1:
        raise ValidationError("k must be >= 1", k=k)
    return HermitianOperator(embedded_sum([m.matrix] * k, d_a, d_b), (d_a,) + (d_b,) * k)


def partial_transpose_matrix(mat: np.ndarray, dims: Sequence[int], which: Sequence[int]) -> np.ndarray:
    n = len(dims)
    if any(not 0 <= w < n for w in which):
        raise ValidationError("invalid factor index", which=list(which), factors=n)
    t = np.asarray(mat).reshape(tuple(dims) * 2)
    axes = list(range(2 * n))
    for w in set(which):
        axes[w], axes[n + w] = n + w, w
    return t.transpose(axes).reshape(mat.shape)


def partial_transpose(m: HermitianOperator, which: Sequence[int]) -> HermitianOperator:
    """Transpose the tensor factors listed in ``which`` (0 is A)."""
    return HermitianOperator(partial_transpose_matrix(m.matrix, m.factor_dims, which), m.factor_dims)


def ppt_summands(m: HermitianOperator, k: int) -> list[np.ndarray]:
    """Summands of (sum_j M~(j))^Gamma with Gamma on the last ceil(k/2) B factors."""
    d_a, d_b = _bipartite(m)
    mt = partial_transpose_matrix(m.matrix, (d_a, d_b), [1])
    lo = k // 2
    return [m.matrix] * lo + [mt] * (k - lo)


def symmetrize(m: HermitianOperator) -> HermitianOperator:
    """Average of (Id (x) U(pi)) M (Id (x) U(pi))^dagger over permutations of the B factors."""
    dims = m.factor_dims
    k = len(dims) - 1
    if k > SYMMETRIZE_MAX_K:
        raise ResourceError("too many B factors to symmetrize", k=k, cap=SYMMETRIZE_MAX_K)
    if len(set(dims[1:])) > 1:
        raise ValidationError("B factors must share a dimension", factor_dims=list(dims))
    n = len(dims)
    t = m.matrix.reshape(dims * 2)
    acc = np.zeros_like(t)
    perms = list(itertools.permutations(range(1, n)))
    for pi in perms:
        rows = (0,) + pi
        acc += t.transpose(rows + tuple(n + r for r in rows))
    return HermitianOperator(acc.reshape(m.matrix.shape) / len(perms), dims)


# ---------------------------------------------------------------------------
# swap-symmetric reduction for k = 2


def _swap_bases(d_b: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal real bases of Sym^2 and of the antisymmetric square, shape (d_b, d_b, m)."""
    iu = [(i, j) for i in range(d_b) for j in range(i, d_b)]
    ia = [(i, j) for i in range(d_b) for j in range(i + 1, d_b)]
    vs = np.zeros((d_b, d_b, len(iu)))
    va = np.zeros((d_b, d_b, len(ia)))
    r = math.sqrt(0.5)
    for c, (i, j) in enumerate(iu):
        if i == j:
            vs[i, i, c] = 1.0
        else:
            vs[i, j, c] = vs[j, i, c] = r
    for c, (i, j) in enumerate(ia):
        va[i, j, c], va[j, i, c] = r, -r
    return vs, va


def swap_blocks(mat: np.ndarray, d_a: int, d_b: int) -> tuple[np.ndarray, np.ndarray]:
    """Blocks of M~(1) + M~(2) on A (x) Sym^2(B) and A (x) Alt^2(B).

    The sum commutes with the swap of B_1 and B_2, so its spectrum is the
    union of the two block spectra. Each block equals 2 V^dagger (M (x) Id) V
    for the corresponding isometry V.
    """
    m4 = np.asarray(mat).reshape(d_a, d_b, d_a, d_b)
    out = []
    for v in _swap_bases(d_b):
        n_v = v.shape[2]
        # (M (x) Id) V : [a, b1, b2 ; c, col] = sum_e M[a,b1,c,e] V[e,b2,col]
        t = np.tensordot(m4, v, axes=([3], [0]))  # a, b1, c, b2, col
        t = t.transpose(0, 1, 3, 2, 4).reshape(d_a, d_b * d_b, d_a * n_v)
        vv = v.reshape(d_b * d_b, n_v)
        blk = 2.0 * np.matmul(vv.T, t).reshape(d_a * n_v, d_a * n_v)
        out.append((blk + blk.conj().T) / 2)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# spectra


def eigenvalues(m: HermitianOperator, validate: bool = False, meta: dict | None = None) -> SpectralSample:
    if validate:
        w, v = np.linalg.eigh(m.matrix)
        resid = np.abs(m.matrix - (v * w) @ v.conj().T).max()
        scale = max(float(np.abs(w).max(initial=0.0)), 1e-300)
        if resid > 1e-9 * scale:
            raise ValidationError("eigendecomposition residual too large", residual=float(resid))
    else:
        w = np.linalg.eigvalsh(m.matrix)
    return SpectralSample(w, dict(meta or {}))


def tensor_sum_spectrum(m: HermitianOperator, k: int) -> np.ndarray:
    """Sorted spectrum of sum_j M~(j), using the swap reduction when k = 2."""
    d_a, d_b = _bipartite(m)
    if k == 2 and d_b > 1:
        bs, ba = swap_blocks(m.matrix, d_a, d_b)
        return np.sort(np.concatenate([np.linalg.eigvalsh(bs), np.linalg.eigvalsh(ba)]))
    return np.linalg.eigvalsh(embedded_sum([m.matrix] * k, d_a, d_b))


def empirical_moment(sample: SpectralSample | np.ndarray, p: int, scale: float = 1.0) -> float:
    ev = sample.eigenvalues if isinstance(sample, SpectralSample) else np.asarray(sample)
    if ev.size == 0:
        raise ValidationError("empty sample")
    if p < 1 or scale <= 0:
        raise ValidationError("need p >= 1 and scale > 0", p=p, scale=scale)
    return float(np.mean((ev / scale) ** p))


def operator_norm(m: HermitianOperator | np.ndarray) -> float:
    mat = m.matrix if isinstance(m, HermitianOperator) else np.asarray(m)
    w = np.linalg.eigvalsh(mat)
    return float(max(abs(w[0]), abs(w[-1])))


def embedded_sum_operator(mats: Sequence[np.ndarray], d_a: int, d_b: int) -> LinearOperator:
    """Matrix-free sum_j mats[j-1] on (A, B_j); each product costs O(d_a^2 d_b^(k+1))."""
    k = len(mats)
    dim = d_a * d_b**k
    shape = (d_a,) + (d_b,) * k
    mats = [np.asarray(x) for x in mats]

    def matvec(x):
        x = np.asarray(x).reshape(shape)
        y = np.zeros(shape, dtype=complex)
        for j, mj in enumerate(mats, start=1):
            # bring B_j next to A, apply, move back
            xt = np.moveaxis(x, j, 1).reshape(d_a * d_b, -1)
            yt = (mj @ xt).reshape((d_a, d_b) + tuple(np.delete(np.array(shape[1:]), j - 1)))
            y += np.moveaxis(yt, 1, j)
        return y.ravel()

    return LinearOperator((dim, dim), matvec=matvec, rmatvec=matvec, dtype=complex)


def _lanczos_extremes(op: LinearOperator, tol: float = 1e-10) -> tuple[float, float]:
    # fixed start vector so results depend only on the operator
    v0 = np.random.default_rng(0x5EED).standard_normal(op.shape[0]).astype(complex)
    hi = float(eigsh(op, k=1, which="LA", v0=v0, tol=tol, return_eigenvectors=False)[0])
    # the tolerance is relative, so look for the bottom as the top of shift - op,
    # whose largest eigenvalue is bounded away from zero
    shift = hi + abs(hi) + 1.0
    flipped = LinearOperator(op.shape, matvec=lambda x: shift * x - op.matvec(x), dtype=complex)
    top = float(eigsh(flipped, k=1, which="LA", v0=v0, tol=tol, return_eigenvectors=False)[0])
    return shift - top, hi


def embedded_sum_extremes(mats: Sequence[np.ndarray], d_a: int, d_b: int, method: str = "auto") -> tuple[float, float]:
    """(lambda_min, lambda_max) of sum_j mats[j-1] embedded on (A, B_j).

    ``auto`` diagonalises densely up to DENSE_NORM_MAX_DIM and uses Lanczos
    above it; only the two extremes are needed, so Lanczos is much cheaper.
    """
    k = len(mats)
    dim = d_a * d_b**k
    if method not in ("auto", "dense", "lanczos"):
        raise ValidationError("unknown method", method=method)
    if method == "lanczos" or (method == "auto" and dim > DENSE_NORM_MAX_DIM):
        return _lanczos_extremes(embedded_sum_operator(mats, d_a, d_b))
    if k == 2 and d_b > 1 and np.array_equal(mats[0], mats[1]):
        bs, ba = swap_blocks(mats[0], d_a, d_b)
        ws, wa = np.linalg.eigvalsh(bs), np.linalg.eigvalsh(ba)
        return float(min(ws[0], wa[0])), float(max(ws[-1], wa[-1]))
    w = np.linalg.eigvalsh(embedded_sum(mats, d_a, d_b))
    return float(w[0]), float(w[-1])


def embedded_sum_norm(mats: Sequence[np.ndarray], d_a: int, d_b: int, method: str = "auto") -> float:
    lo, hi = embedded_sum_extremes(mats, d_a, d_b, method)
    return max(abs(lo), abs(hi))


def trace_powers(blocks: Sequence[np.ndarray], p_max: int) -> np.ndarray:
    """[Tr X^q for q = 1..p_max] where X is block diagonal with the given blocks."""
    out = np.zeros(p_max)
    for b in blocks:
        pw = [np.eye(b.shape[0], dtype=b.dtype), b]
        for _ in range(2, (p_max + 1) // 2 + 1):
            pw.append(pw[-1] @ b)
        for q in range(1, p_max + 1):
            h = (q + 1) // 2
            out[q - 1] += np.einsum("ij,ji->", pw[h], pw[q - h]).real
    return out


def tensor_sum_trace_powers(m: HermitianOperator, k: int, p_max: int) -> np.ndarray:
    """[Tr (sum_j M~(j))^q for q = 1..p_max] without diagonalising."""
    d_a, d_b = _bipartite(m)
    if k == 2 and d_b > 1:
        return trace_powers(swap_blocks(m.matrix, d_a, d_b), p_max)
    return trace_powers([embedded_sum([m.matrix] * k, d_a, d_b)], p_max)


def word_trace(mat: np.ndarray, word: Sequence[int], k: int, d_a: int, d_b: int) -> complex:
    """Tr[M~(w_1) M~(w_2) ... M~(w_L)] by tensor contraction, never forming M~.

    Factor i has row index on A labelled a_i and column a_{i+1}; along each
    B_j the label advances only at the letters equal to j. Untouched B
    factors contribute d_b each.
    """
    if any(not 1 <= w <= k for w in word):
        raise ValidationError("word letters must lie in 1..k", word=list(word), k=k)
    m4 = np.asarray(mat).reshape(d_a, d_b, d_a, d_b)
    n_lab = 0

    def new():
        nonlocal n_lab
        n_lab += 1
        return n_lab - 1

    length = len(word)
    a_lab = [new() for _ in range(length)]
    operands = []
    positions = {j: [i for i, w in enumerate(word) if w == j] for j in range(1, k + 1)}
    b_row, b_col = {}, {}
    for j, pos in positions.items():
        labs = [new() for _ in pos]
        for t, i in enumerate(pos):
            b_row[i], b_col[i] = labs[t], labs[(t + 1) % len(pos)]
    for i in range(length):
        operands += [m4, [a_lab[i], b_row[i], a_lab[(i + 1) % length], b_col[i]]]
    idle = sum(1 for pos in positions.values() if not pos)
    val = np.einsum(*operands, [], optimize="greedy")
    return complex(val) * d_b**idle

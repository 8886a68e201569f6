"""Shared oracles: explicit Kronecker embeddings and exact Wick sums over a Hermitian basis."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest


def herm_basis(n):
    """Orthonormal (Hilbert-Schmidt) basis of n x n Hermitian matrices.

    G ~ GUE(n) equals sum_a g_a E_a with g_a iid N(0, 1), so
    E[G (x) G] = sum_a E_a (x) E_a.
    """
    out = []
    r = 1 / math.sqrt(2)
    for i in range(n):
        e = np.zeros((n, n), complex)
        e[i, i] = 1
        out.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), complex)
            e[i, j] = e[j, i] = r
            out.append(e)
            e = np.zeros((n, n), complex)
            e[i, j], e[j, i] = -1j * r, 1j * r
            out.append(e)
    return out


def kron_embed(m, j, k, d_a, d_b):
    """M on (A, B_j) (x) Id, built with np.kron followed by an axis transpose."""
    big = np.kron(m, np.eye(d_b ** (k - 1)))
    dims = (d_a,) + (d_b,) * k
    # big has its factors ordered (A, B_j, the other B's); slot t of the
    # standard order reads axis order[t] of big
    order = [0] + [i + 1 for i in range(1, j)] + [1] + list(range(j + 1, k + 1))
    axes = order + [x + k + 1 for x in order]
    return big.reshape(dims * 2).transpose(axes).reshape(big.shape)


def kron_sum(mats, d_a, d_b):
    k = len(mats)
    return sum(kron_embed(m, j + 1, k, d_a, d_b) for j, m in enumerate(mats))


def transpose_b(m, d_a, d_b):
    return m.reshape(d_a, d_b, d_a, d_b).transpose(0, 3, 2, 1).reshape(d_a * d_b, d_a * d_b)


def wick_gue_trace(d, k, order, pt=False, word=None):
    """Exact E Tr[X_1 ... X_order] for X_i = sum_j G~(j) (or G~(word_i)), orders 2 and 4.

    With ``pt`` the summands j > floor(k/2) carry the partial transpose on B.
    """
    n = d * d
    lo = k // 2

    def lift(e):
        if word is not None:
            return [kron_embed(e, j, k, d, d) for j in range(1, k + 1)]
        mats = [transpose_b(e, d, d) if (pt and j >= lo) else e for j in range(k)]
        return kron_sum(mats, d, d)

    basis = [lift(e) for e in herm_basis(n)]
    if word is not None:
        def op(a, i):
            return basis[a][word[i] - 1]
    else:
        def op(a, i):
            return basis[a]
    nb = len(basis)
    if order == 2:
        return sum(np.trace(op(a, 0) @ op(a, 1)).real for a in range(nb))
    if order != 4:
        raise ValueError("orders 2 and 4 only")
    total = 0.0
    # pairings of 4 points: (01)(23), (03)(12), (02)(13)
    for a in range(nb):
        for b in range(nb):
            total += np.trace(op(a, 0) @ op(a, 1) @ op(b, 2) @ op(b, 3)).real
            total += np.trace(op(a, 0) @ op(b, 1) @ op(b, 2) @ op(a, 3)).real
            total += np.trace(op(a, 0) @ op(b, 1) @ op(a, 2) @ op(b, 3)).real
    return total


def wick_wishart_trace(d, k, s, order):
    """Exact E Tr[(sum_j W~(j))^order] for orders 1, 2 via E W_ij W_kl = s^2 d_ij d_kl + s d_il d_kj."""
    n = d * d

    def lift(e):
        return kron_sum([e] * k, d, d)

    if order == 1:
        return s * np.trace(lift(np.eye(n))).real
    if order != 2:
        raise ValueError("orders 1 and 2 only")
    li = lift(np.eye(n))
    total = s * s * np.trace(li @ li).real
    units = {}
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n))
            e[i, j] = 1
            units[i, j] = lift(e)
    total += s * sum(np.trace(units[i, j] @ units[j, i]).real for i in range(n) for j in range(n))
    return total


def fit_odd_polynomial(values, ds, exps):
    """Integer coefficients of sum_e c_e d^e through the points (ds, values)."""
    a = np.array([[float(d) ** e for e in exps] for d in ds])
    sol = np.linalg.solve(a, np.array(values, float))
    return [int(round(x)) for x in sol]


def random_hermitian(rng, n, scale=1.0):
    h = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (h + h.conj().T) / 2


def random_state(rng, n, rank=None):
    rank = n if rank is None else rank
    g = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    w = g @ g.conj().T
    return w / np.trace(w).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def brute_lift_sum():
    """Direct evaluation of the f- and pairing-sum with Permutation objects, no kernel tricks."""
    from extk import combinatorics as cb

    def gue(p, k):
        n = 2 * p
        gamma_inv = cb.canonical_full_cycle(n).inverse()
        terms = {}
        for lam in cb.enumerate_pairings(n):
            pl = lam.to_permutation()
            a = cb.cycle_count(gamma_inv * pl)
            for vals in itertools.product(range(1, k + 1), repeat=n):
                f = cb.LevelFunction(vals, k)
                b = cb.cycle_count(cb.gamma_f(f).inverse() * pl) + k - f.image_size
                terms[a + b] = terms.get(a + b, 0) + 1
        return terms

    def wishart(p, k):
        gamma_inv = cb.canonical_full_cycle(p).inverse()
        terms = {}
        for imgs in itertools.permutations(range(1, p + 1)):
            al = cb.Permutation(imgs)
            a = cb.cycle_count(gamma_inv * al)
            m = cb.cycle_count(al)
            for vals in itertools.product(range(1, k + 1), repeat=p):
                f = cb.LevelFunction(vals, k)
                b = cb.cycle_count(cb.gamma_f(f).inverse() * al) + k - f.image_size
                terms[(a + b, m)] = terms.get((a + b, m), 0) + 1
        return terms

    return {"gue": gue, "wishart": wishart, "Fraction": Fraction}

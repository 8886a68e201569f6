"""Exact moment polynomials of the modified GUE and Wishart ensembles.

The modified ensembles are sums of tensor embeddings ``M_{AB_j} (x) Id`` over
j = 1..k.  Their expected trace moments are finite sums over pairings (GUE)
or permutations (Wishart) and level functions f, weighted by powers of the
local dimension d and the environment size s.  A level function enters only
through its kernel, so the sums run over set partitions with at most k
blocks, each weighted by the number k!/(k-b)! of functions sharing it.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import combinatorics as cb
from .errors import ResourceError, ValidationError

CAPS = {
    "gue_p": 5,
    "gue_k": 4,
    "wishart_p": 6,
    "wishart_k": 3,
    "second_p": 3,
    "second_k": 2,
    "word_len": 10,
    "plain_gue_p": 6,
    "plain_wishart_p": 8,
}


def _cap(name: str, value: int, allow_large: bool) -> None:
    if not allow_large and value > CAPS[name]:
        raise ResourceError(f"{name}={value} exceeds cap {CAPS[name]}", cap=name, value=value, limit=CAPS[name])


Number = int | Fraction


@dataclass(frozen=True)
class MomentPolynomial:
    """Sparse polynomial with exact coefficients; zero terms are never stored."""

    vars: tuple[str, ...]
    terms: Mapping[tuple[int, ...], Number]

    def __post_init__(self):
        clean = {}
        for exps, c in self.terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != len(self.vars) or any(e < 0 for e in exps):
                raise ValidationError("exponent tuple does not match variables", exps=list(exps), vars=list(self.vars))
            c = Fraction(c)
            if c:
                clean[exps] = int(c) if c.denominator == 1 else c
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "terms", dict(sorted(clean.items(), reverse=True)))

    @classmethod
    def zero(cls, vars: Sequence[str]) -> "MomentPolynomial":
        return cls(tuple(vars), {})

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, *exps: int) -> Number:
        return self.terms.get(tuple(exps), 0)

    def degree(self, var: str | None = None) -> int:
        """Total degree, or degree in one variable; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        if var is None:
            return max(sum(e) for e in self.terms)
        i = self.vars.index(var)
        return max(e[i] for e in self.terms)

    def evaluate(self, **values: Number) -> Number:
        missing = set(self.vars) - set(values)
        if missing:
            raise ValidationError("missing variable values", missing=sorted(missing))
        total: Number = 0
        for exps, c in self.terms.items():
            term = Fraction(c)
            for v, e in zip(self.vars, exps):
                term *= Fraction(values[v]) ** e
            total += term
        total = Fraction(total)
        return int(total) if total.denominator == 1 else total

    def substitute(self, var: str, factor: Number, target: str, power: int) -> "MomentPolynomial":
        """Replace ``var`` by ``factor * target**power`` and drop ``var``."""
        i, j = self.vars.index(var), self.vars.index(target)
        new_vars = tuple(v for v in self.vars if v != var)
        out: dict[tuple[int, ...], Fraction] = {}
        for exps, c in self.terms.items():
            e = list(exps)
            e[j] += power * e[i]
            c = Fraction(c) * Fraction(factor) ** e[i]
            del e[i]
            out[tuple(e)] = out.get(tuple(e), 0) + c
        return MomentPolynomial(new_vars, out)

    def at_environment_ratio(self, c: Number) -> "MomentPolynomial":
        """Univariate polynomial in d after s = c d^2."""
        return self.substitute("s", c, "d", 2)

    def leading(self, var: str) -> tuple[int, "MomentPolynomial"]:
        """Highest power of ``var`` and its coefficient polynomial in the other variables."""
        deg = self.degree(var)
        i = self.vars.index(var)
        rest = tuple(v for j, v in enumerate(self.vars) if j != i)
        sub = {tuple(x for j, x in enumerate(e) if j != i): c for e, c in self.terms.items() if e[i] == deg}
        return deg, MomentPolynomial(rest, sub)

    def _binary(self, other, sign):
        if not isinstance(other, MomentPolynomial):
            other = MomentPolynomial(self.vars, {(0,) * len(self.vars): other})
        if other.vars != self.vars:
            raise ValidationError("variable mismatch", left=list(self.vars), right=list(other.vars))
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + sign * c
        return MomentPolynomial(self.vars, out)

    def __add__(self, other):
        return self._binary(other, 1)

    def __sub__(self, other):
        return self._binary(other, -1)

    def __mul__(self, other):
        if not isinstance(other, MomentPolynomial):
            return MomentPolynomial(self.vars, {e: c * other for e, c in self.terms.items()})
        if other.vars != self.vars:
            raise ValidationError("variable mismatch", left=list(self.vars), right=list(other.vars))
        out: dict[tuple[int, ...], Number] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return MomentPolynomial(self.vars, out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, MomentPolynomial):
            return NotImplemented
        return self.vars == other.vars and dict(self.terms) == dict(other.terms)

    def __hash__(self):
        return hash((self.vars, tuple(self.terms.items())))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for exps, c in self.terms.items():
            mono = "*".join(f"{v}^{e}" if e > 1 else v for v, e in zip(self.vars, exps) if e)
            parts.append(f"{c}*{mono}" if mono and c != 1 else (mono or str(c)))
        return " + ".join(parts)

    def to_json(self) -> dict:
        return {
            "vars": list(self.vars),
            "terms": [{"exps": list(e), "coeff": str(c)} for e, c in self.terms.items()],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MomentPolynomial":
        return cls(tuple(obj["vars"]), {tuple(t["exps"]): Fraction(t["coeff"]) for t in obj["terms"]})


# ---------------------------------------------------------------------------
# enumeration engine


def _gamma_inverse_rows(labels: np.ndarray) -> np.ndarray:
    """Inverse of gamma_f for every kernel row at once.

    gamma_f sends i to the previous point of its level set (wrapping to the
    last one), so its inverse sends i to the next point (wrapping to the
    first).
    """
    labels = np.asarray(labels)
    n = labels.shape[-1]
    same = labels[:, :, None] == labels[:, None, :]
    j = np.arange(n)
    later = same & (j[None, None, :] > j[None, :, None])
    first = np.where(same, j, n).min(axis=-1)
    nxt = np.where(later, j, n).min(axis=-1)
    return np.where(nxt < n, nxt, first)


def _genus_table(
    perms: np.ndarray,
    a_exp: np.ndarray,
    kernels: np.ndarray,
    weights: Sequence[int],
    b_offset: np.ndarray,
    extra: np.ndarray | None = None,
    chunk_elems: int = 4_000_000,
) -> Counter:
    """Counter over (a, b[, extra]) of  sum_kernels weight * #{perm}.

    b = #(gamma_f^-1 perm) + b_offset[kernel]; a and extra depend on perm only.
    """
    out: Counter = Counter()
    n_perm, n = perms.shape
    ginv = _gamma_inverse_rows(kernels)
    weights = np.asarray(weights, dtype=object)
    a_max = int(a_exp.max()) + 1
    step = max(1, chunk_elems // max(1, n_perm * n))
    e_max = 1 if extra is None else int(extra.max()) + 1
    for start in range(0, len(kernels), step):
        gi = ginv[start : start + step]
        comp = np.take_along_axis(np.broadcast_to(gi[:, None, :], (len(gi), n_perm, n)), np.broadcast_to(perms[None], (len(gi), n_perm, n)), axis=-1)
        b = cb.batch_cycle_count(comp) + b_offset[start : start + step, None]
        b_max = int(b.max()) + 1
        code = (b * a_max + a_exp[None, :]) * e_max + (0 if extra is None else extra[None, :])
        w = weights[start : start + step]
        # group kernels with equal weight so counting stays in int64
        for wv in set(w.tolist()):
            rows = np.flatnonzero(w == wv)
            counts = np.bincount(code[rows].ravel(), minlength=b_max * a_max * e_max)
            for c in np.flatnonzero(counts):
                bb, rem = divmod(int(c), a_max * e_max)
                aa, ee = divmod(rem, e_max)
                key = (aa, bb) if extra is None else (aa, bb, ee)
                out[key] += int(wv) * int(counts[c])
    return out


def _relabel(rows: np.ndarray) -> np.ndarray:
    """Rename labels in order of first appearance (restricted growth form)."""
    n_rows, n = rows.shape
    first = np.full((n_rows, n), n)
    r_idx = np.repeat(np.arange(n_rows), n)
    np.minimum.at(first, (r_idx, rows.ravel()), np.tile(np.arange(n), n_rows))
    rank = np.argsort(np.argsort(first, axis=1, kind="stable"), axis=1, kind="stable")
    return np.take_along_axis(rank, rows, axis=1)


def _kernels(n: int, k: int, rotate: bool = False):
    """Kernels of f:[n]->[k] with weights k!/(k-b)!.

    With ``rotate`` only one kernel per orbit of the cyclic shift
    i -> i-1 is kept and its weight multiplied by the orbit size. This is
    exact for sums against gamma: rotating f conjugates gamma_f by gamma,
    and conjugating the summation variable by gamma preserves every
    cycle count involved.
    """
    rgs = cb.restricted_growth_strings(n, k)
    mult = np.ones(len(rgs), dtype=np.int64)
    if rotate and n > 1:
        base = n ** np.arange(n - 1, -1, -1)
        codes = np.stack([_relabel(np.roll(rgs, -t, axis=1)) @ base for t in range(n)], axis=1).min(axis=1)
        _, idx, mult = np.unique(codes, return_index=True, return_counts=True)
        rgs = rgs[idx]
    nb = rgs.max(axis=1) + 1
    return rgs, [math.perm(k, int(b)) * int(c) for b, c in zip(nb, mult)], nb


# ---------------------------------------------------------------------------
# plain ensembles


def gue_plain_moment(order: int, allow_large: bool = False) -> MomentPolynomial:
    """E Tr G^order for G ~ GUE(n), as a polynomial in n; odd orders give 0."""
    if order < 0:
        raise ValidationError("order must be >= 0", order=order)
    if order % 2:
        return MomentPolynomial.zero(("n",))
    p = order // 2
    if p == 0:
        return MomentPolynomial(("n",), {(1,): 1})
    _cap("plain_gue_p", p, allow_large)
    lam = cb.pairing_array(2 * p)
    ginv = np.argsort(cb._full_cycle_array(2 * p))
    exps = cb.batch_cycle_count(ginv[lam])
    return MomentPolynomial(("n",), {(int(e),): int(c) for e, c in zip(*np.unique(exps, return_counts=True))})


def wishart_plain_moment(p: int, allow_large: bool = False) -> MomentPolynomial:
    """E Tr W^p for W = G G^dagger with G of size n x s."""
    if p < 1:
        raise ValidationError("p must be >= 1", p=p)
    _cap("plain_wishart_p", p, allow_large)
    alphas = cb.all_permutations(p)
    ginv = np.argsort(cb._full_cycle_array(p))
    a = cb.batch_cycle_count(ginv[alphas])
    m = cb.batch_cycle_count(alphas)
    keys, counts = np.unique(np.stack([a, m], 1), axis=0, return_counts=True)
    return MomentPolynomial(("n", "s"), {tuple(int(x) for x in kk): int(c) for kk, c in zip(keys, counts)})


# ---------------------------------------------------------------------------
# modified ensembles


def gue_modified_moment(p: int, k: int, balanced: bool = True, allow_large: bool = False) -> MomentPolynomial:
    """E Tr (sum_j G~(j))^(2p) with G ~ GUE(d_A d_B).

    Balanced: polynomial in d = d_A = d_B. Unbalanced: polynomial in
    (dA, dB) with dA carrying #(gamma^-1 lambda).
    """
    if p < 0 or k < 1:
        raise ValidationError("need p >= 0 and k >= 1", p=p, k=k)
    vars_ = ("d",) if balanced else ("dA", "dB")
    if p == 0:
        return MomentPolynomial(vars_, {(k + 1,) if balanced else (1, k): 1})
    _cap("gue_p", p, allow_large)
    _cap("gue_k", k, allow_large)
    lam = cb.pairing_array(2 * p)
    a = cb.batch_cycle_count(np.argsort(cb._full_cycle_array(2 * p))[lam])
    rgs, w, nb = _kernels(2 * p, k, rotate=True)
    table = _genus_table(lam, a, rgs, w, k - nb)
    return _collect(table, balanced)


def _collect(table: Counter, balanced: bool, with_s: bool = False) -> MomentPolynomial:
    terms: dict[tuple[int, ...], int] = {}
    for key, c in table.items():
        if balanced:
            e = (key[0] + key[1],) + ((key[2],) if with_s else ())
        else:
            e = key
        terms[e] = terms.get(e, 0) + c
    if balanced:
        vars_ = ("d", "s") if with_s else ("d",)
    else:
        vars_ = ("dA", "dB", "s") if with_s else ("dA", "dB")
    return MomentPolynomial(vars_, terms)


def wishart_modified_moment(p: int, k: int, balanced: bool = True, allow_large: bool = False) -> MomentPolynomial:
    """E Tr (sum_j W~(j))^p with W ~ Wishart(d_A d_B, s), as a polynomial in (d, s)."""
    if p < 1 or k < 1:
        raise ValidationError("need p >= 1 and k >= 1", p=p, k=k)
    _cap("wishart_p", p, allow_large)
    _cap("wishart_k", k, allow_large)
    alphas = cb.all_permutations(p)
    a = cb.batch_cycle_count(np.argsort(cb._full_cycle_array(p))[alphas])
    m = cb.batch_cycle_count(alphas)
    rgs, w, nb = _kernels(p, k, rotate=True)
    return _collect(_genus_table(alphas, a, rgs, w, k - nb, extra=m), balanced, with_s=True)


def gue_word_moment(word: Sequence[int], k: int, allow_large: bool = False) -> MomentPolynomial:
    """E Tr[G~(f(1)) ... G~(f(2p))] for a fixed word f with letters in 1..k."""
    f = cb.LevelFunction(tuple(word), k)
    if f.size == 0 or f.size % 2:
        raise ValidationError("word length must be even and positive", length=f.size)
    if not allow_large and f.size > CAPS["word_len"]:
        raise ResourceError("word too long", cap="word_len", value=f.size, limit=CAPS["word_len"])
    two_p = f.size
    lam = cb.pairing_array(two_p)
    a = cb.batch_cycle_count(np.argsort(cb._full_cycle_array(two_p))[lam])
    labels = np.asarray(f.values)[None, :]
    table = _genus_table(lam, a, labels, [1], np.array([k - f.image_size]))
    return _collect(table, True)


def word_limit(word: Sequence[int], k: int) -> int:
    """Coefficient of d^(2p+k+1) of the word moment, the normalised limit."""
    poly = gue_word_moment(word, k)
    return int(poly.coeff(len(word) + k + 1))


def compatible_nc_pairings(word: Sequence[int]) -> int:
    """#{lambda non-crossing : f o lambda = f}, counted directly."""
    count = 0
    for lam in cb.pairing_array(len(word), noncrossing=True):
        if all(word[i] == word[lam[i]] for i in range(len(word))):
            count += 1
    return count


def gamma_modified_moment_leading(p: int, k: int, half_only: bool = True) -> list[tuple[int, int]]:
    """Dominant term of E Tr[(sum_j G~(j)^Gamma)^(2p)], Gamma on the last ceil(k/2) B factors.

    With ``half_only`` the sum is restricted to level functions valued in a
    single half of [k]. Both halves share the exponent 2p+k+1 and merge into
    one term with coefficient Cat_p (floor(k/2)^p + ceil(k/2)^p).

    Without it every pair (lambda, f) with lambda non-crossing and
    f o lambda = f is counted. Such f never pair a transposed factor with an
    untransposed one, so they all stay at order 2p+k+1 and the coefficient
    is k^p Cat_p, the same as without the partial transpose.
    """
    if p < 1 or k < 1:
        raise ValidationError("need p >= 1 and k >= 1", p=p, k=k)
    if not half_only:
        return [(2 * p + k + 1, cb.catalan(p) * k**p)]
    lo, hi = k // 2, (k + 1) // 2
    return [(2 * p + k + 1, cb.catalan(p) * (lo**p + hi**p))]


def second_moment_poly(p: int, k: int, allow_large: bool = False) -> MomentPolynomial:
    """E (Tr[(sum_j W~(j))^p])^2 as a polynomial in (d, s).

    Permutations of [2p] are weighted against gamma_1 gamma_2 (canonical
    cycles on {1..p} and {p+1..2p}) and against gamma_{1,f1} gamma_{2,f2},
    whose level sets in the two copies are kept apart.
    """
    if p < 1 or k < 1:
        raise ValidationError("need p >= 1 and k >= 1", p=p, k=k)
    _cap("second_p", p, allow_large)
    _cap("second_k", k, allow_large)
    alphas = cb.all_permutations(2 * p)
    g = np.concatenate([cb._full_cycle_array(p), cb._full_cycle_array(p) + p])
    a = cb.batch_cycle_count(np.argsort(g)[alphas])
    m = cb.batch_cycle_count(alphas)
    rgs, w, nb = _kernels(p, k)
    labels, weights, offsets = [], [], []
    for r1, w1, b1 in zip(rgs, w, nb):
        for r2, w2, b2 in zip(rgs, w, nb):
            labels.append(np.concatenate([r1, r2 + k]))
            weights.append(w1 * w2)
            offsets.append(2 * k - b1 - b2)
    table = _genus_table(alphas, a, np.array(labels), weights, np.array(offsets), extra=m)
    return _collect(table, True, with_s=True)


def variance_poly(p: int, k: int, c: Number | None = None) -> MomentPolynomial:
    """Var Tr[(sum_j W~(j))^p]; univariate in d when c is given (s = c d^2)."""
    first = wishart_modified_moment(p, k)
    var = second_moment_poly(p, k) - first * first
    return var if c is None else var.at_environment_ratio(c)


# ---------------------------------------------------------------------------
# limit laws


def _rational(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x).limit_denominator(10**12) if isinstance(x, float) else Fraction(x)


def sc_moment(k_param: Number, order: int) -> Fraction:
    """Moment of the centred semicircle with variance k_param."""
    if order < 0:
        raise ValidationError("order must be >= 0", order=order)
    if order % 2:
        return Fraction(0)
    return _rational(k_param) ** (order // 2) * cb.catalan(order // 2)


def mp_moment(lam: Number, order: int) -> Fraction:
    """Moment sum_m lam^m Nar_p^m of the Marcenko-Pastur law with parameter lam."""
    if order < 0:
        raise ValidationError("order must be >= 0", order=order)
    if order == 0:
        return Fraction(1)
    lam = _rational(lam)
    return sum((lam**m * cb.narayana(order, m) for m in range(1, order + 1)), Fraction(0))


def sc_density(k_param: float, x):
    if k_param <= 0:
        raise ValidationError("variance must be positive", k_param=k_param)
    x = np.asarray(x, dtype=float)
    r = 4.0 * k_param - x**2
    return np.where(r > 0, np.sqrt(np.clip(r, 0, None)) / (2 * np.pi * k_param), 0.0)


def mp_support(lam: float) -> tuple[float, float]:
    return (math.sqrt(lam) - 1) ** 2, (math.sqrt(lam) + 1) ** 2


def mp_atom(lam: float) -> float:
    """Point mass at 0, present only for lam < 1."""
    if lam <= 0:
        raise ValidationError("parameter must be positive", lam=lam)
    return max(0.0, 1.0 - lam)


def mp_density(lam: float, x):
    """Absolutely continuous part sqrt((l+ - x)(x - l-)) / (2 pi x) on [l-, l+].

    It has mass min(1, lam); the remainder sits in ``mp_atom``.
    """
    if lam <= 0:
        raise ValidationError("parameter must be positive", lam=lam)
    lo, hi = mp_support(lam)
    x = np.asarray(x, dtype=float)
    r = (hi - x) * (x - lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sqrt(np.clip(r, 0, None)) / (2 * np.pi * x)
    return np.where((r > 0) & (x > 0), val, 0.0)


def limit_law(ensemble: str, k: int, c: float = 1.0):
    """(density, moment) callables of the limit for the normalised modified ensemble."""
    if ensemble == "gue":
        return (lambda x: sc_density(k, x)), (lambda q: sc_moment(k, q))
    if ensemble == "wishart":
        lam = c * k
        return (lambda x: mp_density(lam, x)), (lambda q: mp_moment(_rational(lam), q))
    raise ValidationError("unknown ensemble", ensemble=ensemble)

"""k-extendibility witness, threshold sweeps, mean widths and comparison constants.

For a state rho on A (x) B, the largest overlap Tr(rho sigma) over
k-extendible sigma is the top eigenvalue of (1/k) sum_j rho~(j). Whenever it
falls below the purity Tr(rho^2), rho itself cannot be k-extendible.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from . import moments as mo
from . import rmt
from .errors import ResourceError, ValidationError

DETECTION_TOL = 1e-10
STATE_TOL = 1e-9
SCHEMA = 1


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, Fraction):
        return str(x)
    return x


def _rows_to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


# ---------------------------------------------------------------------------
# witness


def _as_state(rho) -> rmt.HermitianOperator:
    if not isinstance(rho, rmt.HermitianOperator):
        raise ValidationError("state must be a HermitianOperator on A (x) B")
    if len(rho.factor_dims) != 2:
        raise ValidationError("state must live on A (x) B", factor_dims=list(rho.factor_dims))
    tr = rho.trace()
    if abs(tr - 1.0) > STATE_TOL:
        raise ValidationError("state must have unit trace", trace=tr)
    lo = float(np.linalg.eigvalsh(rho.matrix)[0])
    if lo < -STATE_TOL:
        raise ValidationError("state must be positive semidefinite", min_eigenvalue=lo)
    return rho


def purity(rho: rmt.HermitianOperator) -> float:
    m = rho.matrix
    return float(np.vdot(m, m).real)


def witness_value(rho: rmt.HermitianOperator, k: int, method: str = "auto") -> float:
    """max Tr(rho sigma) over k-extendible sigma, i.e. lambda_max((1/k) sum_j rho~(j))."""
    rho = _as_state(rho)
    if k < 1:
        raise ValidationError("k must be >= 1", k=k)
    d_a, d_b = rho.factor_dims
    if d_a * d_b**k * 16 > rmt.MEMORY_CAP_BYTES:
        raise ResourceError("extended space exceeds memory cap", dim=d_a * d_b**k)
    if k == 1:
        return float(np.linalg.eigvalsh(rho.matrix)[-1])
    _, hi = rmt.embedded_sum_extremes([rho.matrix] * k, d_a, d_b, method)
    return hi / k


def detect_not_k_extendible(rho: rmt.HermitianOperator, k: int, tol: float = DETECTION_TOL) -> bool:
    """True certifies rho is not k-extendible; False certifies nothing."""
    return witness_value(rho, k) < purity(rho) - tol


def witness_predictions(d: int, k: int, c: float) -> tuple[float, float]:
    """Large-d values of (purity, witness) for rho induced by an environment of size c d^2."""
    ck = c * k
    return (1 + 1 / c) / d**2, (math.sqrt(ck) + 1) ** 2 / (ck * d**2)


@dataclass
class WitnessReport:
    d: int
    k: int
    c: float
    s: int
    repetitions: int
    seed: int
    purity: list[float]
    witness_value: list[float]
    detected: list[bool]
    purity_mean: float = 0.0
    purity_se: float = 0.0
    witness_mean: float = 0.0
    witness_se: float = 0.0
    detection_rate: float = 0.0
    purity_pred: float = 0.0
    witness_pred: float = 0.0

    def __post_init__(self):
        self.purity_mean, self.purity_se = _mean_se(self.purity)
        self.witness_mean, self.witness_se = _mean_se(self.witness_value)
        self.detection_rate = sum(self.detected) / max(1, len(self.detected))
        self.purity_pred, self.witness_pred = witness_predictions(self.d, self.k, self.c)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_csv(self) -> str:
        rows = zip(range(self.repetitions), self.purity, self.witness_value, map(int, self.detected))
        return _rows_to_csv(["rep", "purity", "witness_value", "detected"], rows)


def run_witness_experiment(d: int, k: int, c: float, reps: int, seed: int, workers: int | None = None) -> WitnessReport:
    if d < 1 or k < 1 or reps < 1:
        raise ValidationError("need d, k, reps >= 1", d=d, k=k, reps=reps)
    if c <= 0:
        raise ValidationError("c must be positive", c=c)
    s = rmt.environment_size(c, d)
    if d ** (k + 1) * 16 > rmt.MEMORY_CAP_BYTES:
        raise ResourceError("extended space exceeds memory cap", dim=d ** (k + 1))

    def one(rng, _r):
        rho = rmt.sample_induced_state(d * d, s, rng, (d, d))
        pu, wv = purity(rho), witness_value(rho, k)
        return pu, wv, wv < pu - DETECTION_TOL

    out = rmt.run_reps(one, reps, seed, workers)
    return WitnessReport(
        d=d, k=k, c=float(c), s=s, repetitions=reps, seed=seed,
        purity=[o[0] for o in out], witness_value=[o[1] for o in out], detected=[bool(o[2]) for o in out],
    )


# ---------------------------------------------------------------------------
# threshold


def c_star(k: int) -> Fraction:
    """(k-1)^2 / 4k, the environment ratio below which detection is typical."""
    if k < 1:
        raise ValidationError("k must be >= 1", k=k)
    return Fraction((k - 1) ** 2, 4 * k)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class ThresholdReport:
    k: int
    d: int
    repetitions: int
    seed: int
    c_grid: list[float]
    detections: list[int]
    rates: list[float]
    ci_low: list[float]
    ci_high: list[float]
    c_star: Fraction
    monotone_within_ci: bool = field(default=False)

    def __post_init__(self):
        n = len(self.rates)
        self.monotone_within_ci = all(self.ci_low[j] <= self.ci_high[i] for i in range(n) for j in range(i + 1, n))

    def to_dict(self) -> dict:
        out = _jsonable(asdict(self))
        out["c_star_float"] = float(self.c_star)
        return out

    def to_csv(self) -> str:
        rows = zip(self.c_grid, self.detections, self.rates, self.ci_low, self.ci_high)
        return _rows_to_csv(["c", "detections", "rate", "ci_low", "ci_high"], rows)


def run_threshold_sweep(
    d: int, k: int, c_grid: Sequence[float], reps: int, seed: int, workers: int | None = None
) -> ThresholdReport:
    """Detection rate across c; every grid point reuses the same repetition streams."""
    grid = [float(c) for c in c_grid]
    if not grid or any(c <= 0 for c in grid):
        raise ValidationError("grid values must be positive", c_grid=grid)
    order = sorted(grid)
    counts, lo, hi = [], [], []
    for c in order:
        rep = run_witness_experiment(d, k, c, reps, seed, workers)
        n_det = sum(rep.detected)
        counts.append(n_det)
        a, b = wilson_interval(n_det, reps)
        lo.append(a)
        hi.append(b)
    return ThresholdReport(
        k=k, d=d, repetitions=reps, seed=seed, c_grid=order, detections=counts,
        rates=[x / reps for x in counts], ci_low=lo, ci_high=hi, c_star=c_star(k),
    )


# ---------------------------------------------------------------------------
# mean width

MODES = ("plain", "ppt_extension", "unbalanced")


@dataclass
class MeanWidthReport:
    mode: str
    dims: tuple[int, int]
    k: int
    repetitions: int
    seed: int
    samples: list[float]
    estimate: float
    standard_error: float
    prediction: float
    ratio: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_csv(self) -> str:
        return _rows_to_csv(["rep", "value"], enumerate(self.samples))


def estimate_mean_width(
    mode: str, dims, k: int, reps: int, seed: int, workers: int | None = None
) -> MeanWidthReport:
    """Monte Carlo estimate of the quantity each mode predicts.

    plain: E||(1/k) sum_j G~(j)|| / d^2 with G ~ GUE(d^2), against 2/(sqrt(k) d).
    ppt_extension: E||sum_j G~(j)^Gamma|| with Gamma on the last ceil(k/2)
    B factors, against sqrt(2k) d.
    unbalanced: like plain on C^dA (x) C^dB, against 2/(sqrt(k dA dB)).
    """
    if mode not in MODES:
        raise ValidationError("unknown mode", mode=mode, modes=list(MODES))
    if isinstance(dims, int):
        dims = (dims, dims)
    d_a, d_b = (int(x) for x in dims)
    if mode != "unbalanced" and d_a != d_b:
        raise ValidationError("balanced modes need d_A = d_B", dims=[d_a, d_b])
    if min(d_a, d_b, k, reps) < 1:
        raise ValidationError("dims, k and reps must be >= 1", dims=[d_a, d_b], k=k, reps=reps)
    if d_a * d_b**k * 16 > rmt.MEMORY_CAP_BYTES:
        raise ResourceError("extended space exceeds memory cap", dim=d_a * d_b**k)
    n = d_a * d_b
    extra: dict = {}

    if mode == "ppt_extension":
        def one(rng, _r):
            g = rmt.sample_gue(n, rng, (d_a, d_b))
            return rmt.embedded_sum_norm(rmt.ppt_summands(g, k), d_a, d_b)

        prediction = math.sqrt(2 * k) * d_a
        extra["alternative_prediction"] = 2 * math.sqrt(k) * d_a
    else:
        def one(rng, _r):
            g = rmt.sample_gue(n, rng, (d_a, d_b))
            return rmt.embedded_sum_norm([g.matrix] * k, d_a, d_b) / (k * n)

        prediction = 2 / math.sqrt(k * n)
        if mode == "unbalanced":
            extra["correction_lower_bound"] = (1 + (k - 1) / d_b**2) ** 0.25

    samples = [float(x) for x in rmt.run_reps(one, reps, seed, workers)]
    est, se = _mean_se(samples)
    if "alternative_prediction" in extra:
        extra["alternative_ratio"] = est / extra["alternative_prediction"]
    return MeanWidthReport(
        mode=mode, dims=(d_a, d_b), k=k, repetitions=reps, seed=seed, samples=samples,
        estimate=est, standard_error=se, prediction=prediction, ratio=est / prediction, extra=extra,
    )


# ---------------------------------------------------------------------------
# comparison constants

WIDTH_PPT_CONSTANT = math.exp(-0.5)
REALIGNMENT_THRESHOLD = (8 / (3 * math.pi)) ** 2
PPT_THRESHOLD = Fraction(4)
TABLE_PPT_K = 17


def min_k_beating(constant, mode: str = "threshold") -> int:
    """Smallest k with (k-1)^2/4k > constant (threshold) or 2/sqrt(k) < constant (width).

    Comparisons are exact: floats are converted to the rational they represent.
    """
    if mode not in ("threshold", "width"):
        raise ValidationError("mode must be 'threshold' or 'width'", mode=mode)
    c = Fraction(constant)
    if c <= 0:
        raise ValidationError("constant must be positive", constant=str(constant))
    if mode == "width":
        # 2/sqrt(k) < c  <=>  k c^2 > 4
        beats = lambda k: k * c * c > 4
        guess, start = math.floor(4 / float(c) ** 2), 1
    else:
        beats = lambda k: Fraction((k - 1) ** 2, 4 * k) > c
        cf = float(c)
        guess, start = math.floor(1 + 2 * cf + 2 * math.sqrt(cf * (cf + 1))), 2
    k = max(start, guess - 2)
    while k > start and beats(k - 1):
        k -= 1
    while not beats(k):
        k += 1
    return k


def comparison_table() -> dict:
    ppt = min_k_beating(PPT_THRESHOLD)
    return {
        "width_vs_ppt_k": min_k_beating(WIDTH_PPT_CONSTANT, "width"),
        "threshold_vs_realignment_k": min_k_beating(REALIGNMENT_THRESHOLD),
        "threshold_vs_ppt_k": ppt,
        "paper_table_value_for_ppt": TABLE_PPT_K,
        "ppt_discrepancy_flag": ppt != TABLE_PPT_K,
        "c_star_at_table_value": str(c_star(TABLE_PPT_K)),
        "c_star_at_computed_value": str(c_star(ppt)),
    }


# ---------------------------------------------------------------------------
# variance decay


def _normalized_wishart_trace(d: int, k: int, p: int, s: int, rng) -> float:
    w = rmt.sample_wishart(d * d, s, rng, (d, d))
    tr = rmt.tensor_sum_trace_powers(w, k, p)[p - 1]
    return float(tr) / (d ** (2 * p) * d ** (k + 1))


def variance_decay_check(
    d_list: Sequence[int], k: int, p: int, c: float, reps: int, seed: int, workers: int | None = None
) -> dict:
    """Variance of Tr[(sum_j W~(j))^p] / d^(2p+k+1) at each d, with exact values when available."""
    d_list = [int(x) for x in d_list]
    if len(d_list) < 2:
        raise ValidationError("need at least two dimensions", d_list=d_list)
    if d_list != sorted(d_list) or len(set(d_list)) != len(d_list):
        raise ValidationError("dimensions must be strictly ascending", d_list=d_list)
    if reps < 2 or p < 1 or k < 1:
        raise ValidationError("need reps >= 2, p >= 1, k >= 1", reps=reps, p=p, k=k)
    try:
        vpoly = mo.variance_poly(p, k)
    except ResourceError:
        vpoly = None
    rows = []
    for i, d in enumerate(d_list):
        s = rmt.environment_size(c, d)
        vals = rmt.run_reps(lambda rng, _r: _normalized_wishart_trace(d, k, p, s, rng), reps, seed + i, workers)
        vals = np.asarray(vals)
        var = float(vals.var(ddof=1))
        exact = None
        if vpoly is not None:
            exact = float(vpoly.evaluate(d=d, s=s)) / float(d) ** (2 * (2 * p + k + 1))
        rows.append({"d": d, "s": s, "mean": float(vals.mean()), "variance": var, "exact_variance": exact})
    ratios = []
    for a, b in zip(rows, rows[1:]):
        ratios.append({
            "d1": a["d"], "d2": b["d"],
            "ratio": a["variance"] / b["variance"] if b["variance"] > 0 else float("inf"),
            "exact_ratio": a["exact_variance"] / b["exact_variance"] if a["exact_variance"] else None,
            "target": (b["d"] / a["d"]) ** 2,
        })
    return {"k": k, "p": p, "c": float(c), "repetitions": reps, "seed": seed, "rows": rows, "ratios": ratios}


# ---------------------------------------------------------------------------
# moment, spectrum and word experiments


def moment_experiment(ensemble: str, p: int, k: int, d: int, reps: int, seed: int, c: float = 1.0, workers=None) -> dict:
    """Monte Carlo mean of Tr[(sum_j X~(j))^q] next to the exact polynomial value.

    q = 2p for ``gue`` and q = p for ``wishart`` (environment s = round(c d^2)).
    """
    if ensemble == "gue":
        q, s = 2 * p, None
        exact = mo.gue_modified_moment(p, k).evaluate(d=d)
        draw = lambda rng: rmt.sample_gue(d * d, rng, (d, d))
    elif ensemble == "wishart":
        q, s = p, rmt.environment_size(c, d)
        exact = mo.wishart_modified_moment(p, k).evaluate(d=d, s=s)
        draw = lambda rng: rmt.sample_wishart(d * d, s, rng, (d, d))
    else:
        raise ValidationError("ensemble must be 'gue' or 'wishart'", ensemble=ensemble)
    vals = rmt.run_reps(lambda rng, _r: float(rmt.tensor_sum_trace_powers(draw(rng), k, q)[q - 1]), reps, seed, workers)
    mean, se = _mean_se(vals)
    return {
        "ensemble": ensemble, "p": p, "k": k, "d": d, "s": s, "order": q, "repetitions": reps, "seed": seed,
        "exact": float(exact), "mean": mean, "standard_error": se,
        "z": (mean - float(exact)) / se if se > 0 else 0.0,
    }


SPECTRUM_MAX_DIM = 4800
SPECTRUM_ENSEMBLES = ("gue-mod", "wishart-mod", "gue-mod-pt")


def spectrum_experiment(ensemble: str, d: int, k: int, reps: int, seed: int, c: float = 1.0, bins: int = 0, workers=None) -> dict:
    """Pooled normalised spectrum of the modified ensemble with its limit law.

    GUE spectra are divided by d and compared to SC(k); Wishart spectra are
    divided by d^2 and compared to MP(ck). The partially transposed GUE is
    overlaid with SC(k) as well. bins = 0 uses the Freedman-Diaconis rule.
    """
    if ensemble not in SPECTRUM_ENSEMBLES:
        raise ValidationError("unknown ensemble", ensemble=ensemble, ensembles=list(SPECTRUM_ENSEMBLES))
    if bins < 0:
        raise ValidationError("bins must be >= 0", bins=bins)
    if d ** (k + 1) > SPECTRUM_MAX_DIM:
        raise ResourceError("spectrum too large to diagonalise", dim=d ** (k + 1))
    s = rmt.environment_size(c, d) if ensemble == "wishart-mod" else None

    def one(rng, _r):
        if ensemble == "wishart-mod":
            w = rmt.sample_wishart(d * d, s, rng, (d, d))
            return rmt.tensor_sum_spectrum(w, k) / d**2
        g = rmt.sample_gue(d * d, rng, (d, d))
        if ensemble == "gue-mod":
            return rmt.tensor_sum_spectrum(g, k) / d
        return np.linalg.eigvalsh(rmt.embedded_sum(rmt.ppt_summands(g, k), d, d)) / d

    ev = np.concatenate(rmt.run_reps(one, reps, seed, workers))
    density, edges = np.histogram(ev, bins="fd" if bins == 0 else bins, density=True)
    centers = (edges[:-1] + edges[1:]) / 2
    dens_fn, mom_fn = mo.limit_law("wishart" if ensemble == "wishart-mod" else "gue", k, c)
    moments = [{"order": q, "empirical": float(np.mean(ev**q)), "limit": float(mom_fn(q))} for q in range(1, 5)]
    out = {
        "ensemble": ensemble, "d": d, "k": k, "c": float(c), "s": s, "repetitions": reps, "seed": seed,
        "binning": "freedman-diaconis" if bins == 0 else f"{bins} equal-width",
        "edges": edges, "density": density, "limit_density": dens_fn(centers), "moments": moments,
    }
    if ensemble == "wishart-mod":
        out["limit_atom"] = mo.mp_atom(c * k)
    return _jsonable(out)


def word_experiment(word: Sequence[int], k: int, d: int, reps: int, seed: int, workers=None) -> dict:
    """Monte Carlo of Tr[G~(w_1)...G~(w_L)] / d^(L+k+1) against its limit."""
    word = [int(w) for w in word]
    if not word or len(word) % 2:
        raise ValidationError("word must have positive even length", word=word)
    norm = float(d) ** (len(word) + k + 1)

    def one(rng, _r):
        g = rmt.sample_gue(d * d, rng, (d, d))
        return rmt.word_trace(g.matrix, word, k, d, d).real / norm

    vals = rmt.run_reps(one, reps, seed, workers)
    mean, se = _mean_se(vals)
    return {
        "word": word, "k": k, "d": d, "repetitions": reps, "seed": seed,
        "mean": mean, "standard_error": se, "limit": mo.word_limit(word, k),
    }

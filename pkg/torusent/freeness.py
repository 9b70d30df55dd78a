"""
Free-independence tests for a map U and a measurement P.

If U and the observable sum_j a_j P_j are free, every alternating centered
moment

    C[r_1..r_n; k_1..k_n] = (1/N) Tr(U^r_1 Q_k_1 U^r_2 Q_k_2 ... U^r_n Q_k_n)

with nonzero r_j vanishes. This module evaluates C on single sequences, on
seeded random samples and exhaustively at low order, fits the long-time
exponential decay |C[n]| ~ exp(-n A h(P) / 2), and computes the statistics of
the variables F(m, j) = U^m P_j (or U^m Q_j) that explain that decay.
"""
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import linregress

from torusent.errors import ConfigError, DegenerateFitError, ResourceCeilingError
from torusent.measurement import ProjectorFamily
from torusent.utils import LOG_FLOOR, floor_log, rng_stream

logger = logging.getLogger(__name__)

EXHAUSTIVE_BUDGET = 10 ** 6
MIN_FIT_POINTS = 4


def format_sequence(sequence):
    return ",".join("{}:{}".format(r, k) for r, k in sequence)


def parse_sequence(text):
    try:
        return tuple((int(r), int(k)) for r, k in (item.split(":") for item in text.split(",")))
    except ValueError:
        raise ConfigError("Bad sequence {!r}; expected 'r1:k1,r2:k2,...'".format(text))


@dataclass(frozen=True)
class CorrelationSample:
    sequence: tuple
    value: complex
    index: int = 0

    @property
    def n(self):
        return len(self.sequence)

    @property
    def abs_value(self):
        return abs(self.value)


def _check_sequence(sequence, K):
    if len(sequence) == 0:
        raise ConfigError("Correlation sequence must not be empty")
    for r, k in sequence:
        if r == 0:
            raise ConfigError("Powers r_j must be nonzero, got sequence {}".format(format_sequence(sequence)))
        if not 1 <= k <= K:
            raise ConfigError("Block index {} outside 1..{}".format(k, K))


def correlation_value(qmap, P, sequence, centering="printed", index=0):
    """
    C = (1/N) Tr(U^r_1 Q_k_1 ... U^r_n Q_k_n), accumulated left to right.
    Right multiplication by Q_k is a column mask minus a scaled copy.
    """
    if qmap.dim != P.dim:
        raise ConfigError("Map dimension {} does not match partition dimension {}".format(qmap.dim, P.dim))
    sequence = tuple((int(r), int(k)) for r, k in sequence)
    _check_sequence(sequence, P.K)

    family = ProjectorFamily(P, centering)
    M = None
    for r, k in sequence:
        Ur = qmap.power(r)
        M = Ur if M is None else M @ Ur
        M = family.apply_centered(k, M, "right")
    return CorrelationSample(sequence, complex(np.trace(M) / P.dim), index)


def sample_correlations(qmap, P, n_max, samples_per_n, r_max=2, seed=0, centering="printed",
                        n_jobs=1, quiet=True):
    """
    For each n = 1..n_max draw samples_per_n sequences with r_j uniform on
    {-r_max..-1, 1..r_max} and k_j uniform on 1..K. Sample i of length n uses
    its own generator derived from (seed, n, i), so results do not depend on
    n_jobs.
    """
    if r_max < 1 or samples_per_n < 1 or n_max < 1:
        raise ConfigError("Need r_max >= 1, samples_per_n >= 1 and n_max >= 1")

    r_values = np.array([r for r in range(-r_max, r_max + 1) if r != 0])
    # fill the power cache before workers share the map
    for r in range(1, r_max + 1):
        qmap.power(r)
        qmap.power(-r)

    def draw(n, i):
        rng = rng_stream(seed, n, i)
        rs = rng.choice(r_values, size=n)
        ks = rng.integers(1, P.K + 1, size=n)
        return correlation_value(qmap, P, list(zip(rs.tolist(), ks.tolist())), centering, index=i)

    jobs = [(n, i) for n in range(1, n_max + 1) for i in range(samples_per_n)]
    samples = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(draw)(n, i) for n, i in jobs)

    n_floored = sum(s.abs_value < LOG_FLOOR for s in samples)
    if n_floored and P.K > 1:
        logger.warning("%d of %d samples have |C| < %.0e", n_floored, len(samples), LOG_FLOOR)
    (logger.debug if quiet else logger.info)(
        "Sampled %d correlations for %s N=%d %s", len(samples), qmap.kind.value, qmap.dim, P.spec)
    return samples


@dataclass
class LowOrderResult:
    n: int
    max_abs: float
    argmax: tuple
    count: int


def exhaustive_low_order_check(qmap, P, max_n=3, r_set=(1,), centering="printed"):
    """
    Evaluate every sequence of length 1..max_n with r_j in +-r_set and return
    the worst |C| per order. r_set holds magnitudes; both signs are used.
    """
    if not 1 <= max_n <= 3:
        raise ConfigError("max_n must be in 1..3, got {}".format(max_n))
    magnitudes = sorted({abs(int(r)) for r in r_set})
    if not magnitudes or magnitudes[0] == 0:
        raise ConfigError("r_set must be a nonempty set of nonzero powers, got {}".format(r_set))
    signed = [-m for m in reversed(magnitudes)] + magnitudes

    per_order = (len(signed) * P.K) ** max_n
    if per_order > EXHAUSTIVE_BUDGET:
        raise ResourceCeilingError("(2|r_set| K)^max_n = {} exceeds the budget of {} evaluations".format(
            per_order, EXHAUSTIVE_BUDGET))

    results = []
    for n in range(1, max_n + 1):
        best, best_seq, count = -1.0, None, 0
        for rs in itertools.product(signed, repeat=n):
            for ks in itertools.product(range(1, P.K + 1), repeat=n):
                c = correlation_value(qmap, P, list(zip(rs, ks)), centering).abs_value
                count += 1
                if c > best:
                    best, best_seq = c, tuple(zip(rs, ks))
        results.append(LowOrderResult(n, best, best_seq, count))
        logger.debug("Order %d: max |C| = %.3e at %s", n, best, format_sequence(best_seq))
    return results


def independence_prediction(P, n):
    """|C[n]| predicted by classical independence of the F variables: exp(-n h(P) / 2)."""
    return np.exp(-0.5 * np.asarray(n) * P.h_meas)


@dataclass
class OrderStats:
    n: int
    count: int
    mean_log: float
    median_log: float
    floored: int


@dataclass
class DecaySummary:
    dim: int
    K: int
    h_meas: float
    breaking_time: float
    per_n: dict
    window: tuple
    rate: float
    rate_stderr: float
    intercept: float
    A: float
    A_stderr: float
    early_gaps: dict = field(default_factory=dict)          # median ln|C[n]| minus the line
    early_mean_gaps: dict = field(default_factory=dict)     # mean ln|C[n]| minus the line
    below_extrapolation_fraction: object = None

    def extrapolate(self, n):
        return self.intercept - self.rate * np.asarray(n)

    def as_dict(self):
        return {
            "N": self.dim,
            "K": self.K,
            "h_meas": self.h_meas,
            "breaking_time": self.breaking_time,
            "rate": self.rate,
            "rate_stderr": self.rate_stderr,
            "intercept": self.intercept,
            "A": self.A,
            "A_stderr": self.A_stderr,
            "fit_window": list(self.window),
            "below_extrapolation_fraction": self.below_extrapolation_fraction,
            "early_gaps": {str(n): g for n, g in self.early_gaps.items()},
            "early_mean_gaps": {str(n): g for n, g in self.early_mean_gaps.items()},
            "per_n": {str(n): {"count": s.count, "mean_log_abs_C": s.mean_log,
                               "median_log_abs_C": s.median_log, "floored": s.floored,
                               "log_independence_prediction": -0.5 * n * self.h_meas}
                      for n, s in self.per_n.items()},
        }


def fit_decay(samples, P, N=None):
    """
    Fit mean ln|C[n]| ~ intercept - rate * n on the window n > 2 ln N / h(P)
    and report A = 2 rate / h(P). Below the breaking time, the gap between the
    median ln|C[n]| and the backward extrapolation of the fit is recorded;
    free independence shows up as observed values below the line. The same gap
    for the mean ln|C[n]| is kept too: the median of ln|C| sits above its mean
    by about 0.1 for a complex-Gaussian spread, so the two gaps differ by that
    much even when the early orders follow the line.
    """
    N = P.dim if N is None else int(N)
    h = P.h_meas
    if h <= 0:
        raise ConfigError("Decay fit needs h(P) > 0, i.e. K > 1")
    breaking_time = 2 * np.log(N) / h

    by_n = {}
    for s in samples:
        by_n.setdefault(s.n, []).append(s.abs_value)

    per_n = {}
    for n in sorted(by_n):
        logs, floored = floor_log(by_n[n])
        per_n[n] = OrderStats(n, len(logs), float(np.mean(logs)), float(np.median(logs)), int(floored.sum()))

    window = tuple(n for n in per_n if n > breaking_time)
    if len(window) < MIN_FIT_POINTS:
        raise ConfigError("Decay fit needs {} orders beyond the breaking time {:.2f}, got {}".format(
            MIN_FIT_POINTS, breaking_time, list(window)))
    if all(per_n[n].floored == per_n[n].count for n in window):
        raise DegenerateFitError("All samples in the fit window are numerically zero")

    x = np.array(window, dtype=float)
    y = np.array([per_n[n].mean_log for n in window])
    fit = linregress(x, y)
    rate = -fit.slope
    logger.debug("Decay fit on n in %s: rate %.4f +- %.4f", window, rate, fit.stderr)

    early = [n for n in per_n if n <= breaking_time]
    gaps = {n: per_n[n].median_log - (fit.intercept + fit.slope * n) for n in early}
    mean_gaps = {n: per_n[n].mean_log - (fit.intercept + fit.slope * n) for n in early}
    below = float(np.mean([g < 0 for g in gaps.values()])) if gaps else None

    return DecaySummary(N, P.K, h, breaking_time, per_n, window,
                        float(rate), float(fit.stderr), float(fit.intercept),
                        float(2 * rate / h), float(2 * fit.stderr / h), gaps, mean_gaps, below)


@dataclass
class RateEntropyFit:
    h_meas: np.ndarray
    rates: np.ndarray
    A: float                          # from rate = (A/2) h through the origin
    A_stderr: float
    slope: float
    intercept: float

    def as_dict(self):
        return {"h_meas": self.h_meas.tolist(), "rates": self.rates.tolist(), "A": self.A,
                "A_stderr": self.A_stderr, "slope": self.slope, "intercept": self.intercept}


def fit_rate_vs_entropy(summaries):
    """Linear dependence of the long-time decay rate on h(P) across partitions."""
    if len(summaries) < 2:
        raise ConfigError("Need decay summaries for at least two partitions")
    h = np.array([s.h_meas for s in summaries])
    rates = np.array([s.rate for s in summaries])

    slope0 = np.sum(h * rates) / np.sum(h * h)
    resid = rates - slope0 * h
    stderr0 = np.sqrt(np.sum(resid ** 2) / (len(h) - 1) / np.sum(h * h))
    fit = linregress(h, rates)
    return RateEntropyFit(h, rates, float(2 * slope0), float(2 * stderr0), float(fit.slope), float(fit.intercept))


@dataclass
class FVariableStats:
    m: int
    j: int
    variant: str
    mean_abs_p: float                 # |(1/N) Tr(U^m P_j)|
    mean_abs_q: float                 # |(1/N) Tr(U^m Q_j)|
    second_moment_p: float            # (1/N) Tr(P_j^+ P_j)
    second_moment_q: float            # (1/N) Tr(Q_j^+ Q_j)

    @property
    def mean_abs(self):
        return self.mean_abs_p if self.variant == "P" else self.mean_abs_q

    @property
    def second_moment(self):
        return self.second_moment_p if self.variant == "P" else self.second_moment_q

    @property
    def rms(self):
        return float(np.sqrt(self.second_moment))


def f_variable_stats(qmap, P, m, j, variant="Q", centering="printed"):
    """
    Mean |<F>| and second moment (1/N) Tr(F^+ F) of F(m, j) = U^m X_j for
    X = P or Q. The second moment does not depend on U since U is unitary.
    """
    if m == 0:
        raise ConfigError("m must be nonzero")
    if variant not in ("P", "Q"):
        raise ConfigError("variant must be 'P' or 'Q', got {!r}".format(variant))
    family = ProjectorFamily(P, centering)
    blk = P.block(j)

    diag = np.diag(qmap.power(m))
    tr_p = np.sum(diag[blk]) / P.dim
    tr_q = tr_p - family.offset(j) * np.sum(diag) / P.dim
    return FVariableStats(int(m), int(j), variant, float(abs(tr_p)), float(abs(tr_q)),
                          float(P.block_sizes[j - 1] / P.dim), float(family.centered_second_moment(j)))


@dataclass
class FVariableTable:
    stats: list
    h_meas: float

    @property
    def mean_abs(self):
        return float(np.mean([s.mean_abs for s in self.stats]))

    @property
    def rms(self):
        return float(np.sqrt(np.mean([s.second_moment for s in self.stats])))

    @property
    def prediction(self):
        """exp(-h(P)/2), which is 1/sqrt(K) for equal blocks."""
        return float(np.exp(-self.h_meas / 2))

    def summary(self):
        return {"mean_abs": self.mean_abs, "rms": self.rms, "prediction": self.prediction,
                "h_meas": self.h_meas, "count": len(self.stats)}


def f_variable_table(qmap, P, m_max, variant="Q", centering="printed"):
    ms = [m for m in range(-m_max, m_max + 1) if m != 0]
    stats = [f_variable_stats(qmap, P, m, j, variant, centering) for m in ms for j in range(1, P.K + 1)]
    return FVariableTable(stats, P.h_meas)

"""
Experiment runners. Each run validates its ExperimentConfig, computes, writes
CSV/JSON payloads plus generated plot scripts into the output directory, and
finishes with exactly one manifest.json.

Payloads are byte-reproducible: they contain the canonical config, floats in
repr form, and no timestamps (those live only in the manifest).
"""
import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.stats import linregress

from torusent import __version__
from torusent import plotscripts
from torusent.choi import MAX_CHOI_DIM, classify_regimes, entropy_series, evolve_choi, linear_entropy
from torusent.errors import ConfigError, ResourceCeilingError
from torusent.freeness import (MIN_FIT_POINTS, correlation_value, exhaustive_low_order_check,
                               f_variable_stats, f_variable_table, fit_decay, fit_rate_vs_entropy,
                               format_sequence, sample_correlations)
from torusent.gram import check_max_enpr, gram_matrix, purity_from_gram, spectral_mismatch
from torusent.measurement import CENTERINGS, build_partition, verify_simplifying_conditions
from torusent.torus_maps import (CAT_MATRIX, ELLIPTIC_MATRIX, MapKind, QuantizedMap, build_unitary,
                                 classify_automorphism)
from torusent.utils import rng_stream, unitarity_deviation

logger = logging.getLogger(__name__)

EXPERIMENTS = ("entropy", "freeness", "fstats", "verify")
SUITES = ("fast", "full")
FAULTS = ("skip-measurement",)
VERIFY_SOFT_BUDGET_S = 300


@dataclass
class ExperimentConfig:
    experiment: str = "entropy"
    map: str = "cat"
    N: int = 64
    partitions: list = field(default_factory=lambda: ["equal:4"])
    n_max: int = 14
    samples_per_n: int = 32
    r_max: int = 2
    seed: int = 0
    out: str = "results"
    mmax: int = 8
    variant: str = "Q"
    centering: str = "printed"
    window: int = 2
    suite: str = "fast"
    inject_fault: object = None
    n_jobs: int = 1

    @classmethod
    def load(cls, path):
        with open(path) as f:
            try:
                values = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError("Cannot parse config file {}: {}".format(path, e))
        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError("Unknown config keys: {}".format(", ".join(sorted(unknown))))
        return cls(**values)

    def updated(self, **overrides):
        """Copy with the non-None overrides applied (CLI flags over file values)."""
        values = asdict(self)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig.from_dict(values)

    def provenance(self):
        """The config as echoed into payloads; the output directory is not part of it."""
        values = asdict(self)
        del values["out"]
        return values

    def to_json(self):
        return json.dumps(self.provenance(), sort_keys=True)

    def validate(self):
        def check(cond, message):
            if not cond:
                raise ConfigError(message)

        check(self.experiment in EXPERIMENTS, "experiment must be one of {}".format(EXPERIMENTS))
        check(self.map in [k.value for k in MapKind], "map must be one of cat, elliptic, shift, haar")
        for name in ("N", "n_max", "samples_per_n", "r_max", "mmax", "window", "seed", "n_jobs"):
            check(isinstance(getattr(self, name), int) and not isinstance(getattr(self, name), bool),
                  "{} must be an integer".format(name))
        check(self.N >= 2, "N must be >= 2")
        check(self.n_max >= 1, "n_max must be >= 1")
        check(self.samples_per_n >= 1, "samples_per_n must be >= 1")
        check(self.r_max >= 1, "r_max must be >= 1")
        check(self.mmax >= 1, "mmax must be >= 1")
        check(self.window >= 1, "window must be >= 1")
        check(self.seed >= 0, "seed must be >= 0")
        check(self.variant in ("P", "Q"), "variant must be P or Q")
        check(self.centering in CENTERINGS, "centering must be one of {}".format(CENTERINGS))
        check(self.suite in SUITES, "suite must be one of {}".format(SUITES))
        check(self.inject_fault is None or self.inject_fault in FAULTS,
              "inject_fault must be one of {}".format(FAULTS))
        check(isinstance(self.partitions, list) and len(self.partitions) > 0,
              "partitions must be a nonempty list")
        if self.experiment != "verify":
            for spec in self.partitions:
                build_partition(self.N, spec)
        return self


@dataclass
class RunManifest:
    config: dict
    artifacts: list
    started: str
    duration_s: float
    version: str
    invariants: dict
    status: str

    def as_dict(self):
        return asdict(self)


def _tag(spec):
    return spec.replace(":", "-").replace(",", "-")


def _clean(value):
    """JSON-safe copy with sorted keys: numpy scalars to Python, nan/inf to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class RunRecorder:
    """
    Tracks the artifacts and invariant checks of one run and writes its
    manifest on exit, also when the run fails.
    """

    def __init__(self, config):
        self.config = config
        self.out = config.out
        self.artifacts = []
        self.invariants = {}

    def __enter__(self):
        os.makedirs(self.out, exist_ok=True)
        self._t0 = time.time()
        self._started = time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(self._t0))
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "ok" if exc_type is None else "failed: {}".format(exc)
        self.manifest = RunManifest(self.config.provenance(), list(self.artifacts), self._started,
                                    round(time.time() - self._t0, 3), __version__, dict(self.invariants), status)
        with open(os.path.join(self.out, "manifest.json"), "w") as f:
            json.dump(_clean(self.manifest.as_dict()), f, indent=2, sort_keys=True)
        return False

    @property
    def elapsed(self):
        return time.time() - self._t0

    def header(self):
        return ["# torusent {}".format(__version__),
                "# config: {}".format(self.config.to_json()),
                "# seed: {}".format(self.config.seed),
                "# units: nats"]

    def write_csv(self, name, columns, rows):
        with open(os.path.join(self.out, name), "w", newline="") as f:
            for line in self.header():
                f.write(line + "\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        self.artifacts.append(name)

    def write_json(self, name, payload):
        header = {"config": self.config.provenance(), "seed": self.config.seed, "units": "nats", "version": __version__}
        # header first, everything else in key order
        doc = {"_header": _clean(header)}
        doc.update(_clean(payload))
        with open(os.path.join(self.out, name), "w") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")
        self.artifacts.append(name)

    def write_script(self, name, text):
        with open(os.path.join(self.out, name), "w") as f:
            f.write(text)
        self.artifacts.append(name)


def reference_ks_entropy(kind):
    """h_KS of the classical map behind a quantized one; None for the random control."""
    kind = MapKind(kind)
    if kind == MapKind.CAT:
        return classify_automorphism(CAT_MATRIX).ks_entropy
    if kind == MapKind.ELLIPTIC:
        return classify_automorphism(ELLIPTIC_MATRIX).ks_entropy
    if kind == MapKind.SHIFT:
        return 0.0
    return None


def run_entropy(config, quiet=True):
    config.validate()
    if config.N > MAX_CHOI_DIM:
        raise ResourceCeilingError("Entropy runs are limited to N <= {}, got N={}".format(MAX_CHOI_DIM, config.N))

    qmap = build_unitary(config.map, config.N, seed=config.seed)
    h_ks = reference_ks_entropy(config.map)
    with RunRecorder(config) as rec:
        for spec in config.partitions:
            P = build_partition(config.N, spec)
            series = entropy_series(qmap, P, config.n_max, window=config.window, quiet=quiet)
            stem = "entropy_{}_N{}_{}".format(config.map, config.N, _tag(spec))
            rec.write_csv(stem + ".csv", ["n", "I_n", "bound_lin", "bound_sat", "slope_window"], series.rows())

            regimes = classify_regimes(series, h_ks) if h_ks is not None else None
            rec.write_json(stem + "_summary.json", {
                "N": config.N, "K": P.K, "map": config.map, "partition": P.spec, "h_meas": P.h_meas,
                "h_ks": h_ks, "values": series.values, "regimes": regimes.as_dict() if regimes else None,
                "violations": [list(v) for v in series.violations],
            })
            rec.write_script("plot_" + stem + ".py", plotscripts.entropy_plot_script(
                rec.header(), stem + ".csv", stem + ".png", config.N, P.K, P.h_meas, h_ks or 0.0,
                use_h_meas=not P.is_equal))

            names = {v[0] for v in series.violations}
            for inv in ("entropy_bound", "entropy_monotonic"):
                rec.invariants["{}[{}]".format(inv, spec)] = inv not in names
            logger.info("%s N=%d %s: I[%d] = %.4f", config.map, config.N, spec, config.n_max, series.values[-1])
    return rec.manifest


def run_freeness(config, quiet=True):
    config.validate()
    qmap = build_unitary(config.map, config.N, seed=config.seed)
    partitions = [build_partition(config.N, spec) for spec in config.partitions]
    for P in partitions:
        if P.K < 2:
            raise ConfigError("Freeness runs need K >= 2, got {}".format(P.spec))
        breaking_time = 2 * np.log(config.N) / P.h_meas
        if config.n_max < math.floor(breaking_time) + MIN_FIT_POINTS:
            raise ConfigError("n_max={} leaves fewer than {} orders beyond the breaking time {:.2f} for {}".format(
                config.n_max, MIN_FIT_POINTS, breaking_time, P.spec))

    summaries = []
    with RunRecorder(config) as rec:
        for P in partitions:
            samples = sample_correlations(qmap, P, config.n_max, config.samples_per_n, config.r_max,
                                          config.seed, config.centering, n_jobs=config.n_jobs, quiet=quiet)
            stem = "correlations_{}_N{}_{}".format(config.map, config.N, _tag(P.spec))
            rec.write_csv(stem + ".csv", ["n", "sample_index", "abs_C", "sequence"],
                          ((s.n, s.index, float(s.abs_value), format_sequence(s.sequence)) for s in samples))

            summary = fit_decay(samples, P, config.N)
            summaries.append(summary)
            fit_name = "decay_fit_{}_N{}_{}.json".format(config.map, config.N, _tag(P.spec))
            rec.write_json(fit_name, summary.as_dict())
            rec.write_script("plot_" + stem + ".py", plotscripts.correlations_plot_script(
                rec.header(), stem + ".csv", fit_name, stem + ".png"))

            rec.invariants["correlation_bound[{}]".format(P.spec)] = all(s.abs_value <= 1 + 1e-12 for s in samples)
            logger.info("%s N=%d %s: rate %.4f, A = %.3f +- %.3f", config.map, config.N, P.spec,
                        summary.rate, summary.A, summary.A_stderr)

        stem = "rate_vs_entropy_{}_N{}".format(config.map, config.N)
        payload = {"h_meas": [s.h_meas for s in summaries], "rates": [s.rate for s in summaries],
                   "A": None, "A_stderr": None, "slope": None, "intercept": None}
        if len(summaries) >= 2:
            payload.update(fit_rate_vs_entropy(summaries).as_dict())
        rec.write_json(stem + ".json", payload)
        rec.write_script("plot_" + stem + ".py", plotscripts.rate_entropy_plot_script(
            rec.header(), stem + ".json", stem + ".png"))
    return rec.manifest


def run_fstats(config, quiet=True):
    config.validate()
    qmap = build_unitary(config.map, config.N, seed=config.seed)
    with RunRecorder(config) as rec:
        for spec in config.partitions:
            P = build_partition(config.N, spec)
            table = f_variable_table(qmap, P, config.mmax, config.variant, config.centering)
            stem = "fstats_{}_N{}_{}_{}".format(config.map, config.N, _tag(spec), config.variant)
            rec.write_csv(stem + ".csv", ["m", "j", "mean_abs", "second_moment", "rms"],
                          ((s.m, s.j, s.mean_abs, s.second_moment, s.rms) for s in table.stats))
            rec.write_json(stem + "_summary.json", table.summary())
            rec.write_script("plot_" + stem + ".py", plotscripts.fstats_plot_script(
                rec.header(), stem + ".csv", stem + "_summary.json", stem + ".png"))

            if P.is_equal and config.variant == "Q":
                expected = (1 / P.K) * (1 - 1 / P.K)
                rec.invariants["f_second_moment[{}]".format(spec)] = all(
                    abs(s.second_moment - expected) <= 1e-12 for s in table.stats)
            logger.info("%s N=%d %s: mean |<F>| = %.4f, rms = %.4f, exp(-h/2) = %.4f", config.map, config.N, spec,
                        table.mean_abs, table.rms, table.prediction)
    return rec.manifest


# Reproduction checks that fail on the literal definitions, and what is observed instead
OPEN_DEVIATIONS = {
    "free_independence_signature":
        "for 2 <= n <= 2 ln N / h(P) the median ln|C[n]| stays within about 0.15 of the backward extrapolation "
        "of the long-time fit instead of lying below it; only n = 1, where C vanishes, is clearly below",
    "f_variable_mean":
        "|(1/N) Tr U^m P_j| of the cat map is O(N^-1/2), far below exp(-h(P)/2); only the rms "
        "sqrt((1/N) Tr F^+F) equals exp(-h(P)/2), and it does so for every unitary",
}


@dataclass
class VerifyCheck:
    name: str
    kind: str                         # "invariant" or "reproduction"
    passed: bool
    value: object = None
    threshold: object = None
    detail: dict = field(default_factory=dict)


class VerifySuite:
    """
    The invariant suite behind `sim verify`. Invariant checks decide the exit
    code; reproduction checks (full suite only) compare against the expected
    regimes and are reported without failing the run.
    """

    def __init__(self, suite="fast", inject_fault=None, seed=0, quiet=True):
        self.suite = suite
        self.measure = inject_fault != "skip-measurement"
        self.seed = seed
        self.quiet = quiet
        self.checks = []
        self.metrics = {"max_spectral_mismatch": 0.0, "trace_drift": 0.0, "purity_mismatch": 0.0}
        self.diagnostics = {}

    def add(self, name, kind, passed, value=None, threshold=None, **detail):
        if not passed and name in OPEN_DEVIATIONS:
            detail["open_deviation"] = OPEN_DEVIATIONS[name]
        check = VerifyCheck(name, kind, bool(passed), value, threshold, detail)
        self.checks.append(check)
        if not check.passed:
            log = logger.error if kind == "invariant" else logger.warning
            log("%s check %s failed: value %s, threshold %s", kind, name, value, threshold)
        return check

    @property
    def passed(self):
        return all(c.passed for c in self.checks if c.kind == "invariant")

    @property
    def failing(self):
        return [c.name for c in self.checks if c.kind == "invariant" and not c.passed]

    @property
    def open_deviations(self):
        return {c.name: c.detail["open_deviation"] for c in self.checks if "open_deviation" in c.detail}

    def run(self):
        self.check_ks_entropy()
        self.check_unitarity()
        self.check_measurement_entropy()
        self.check_oracle_equivalence()
        self.check_entropy_bound((16,) if self.suite == "fast" else (16, 32, 64))
        self.check_basis_independence()
        self.check_correlation_identities()
        self.check_f_second_moment()
        self.diagnose_simplifying_conditions()
        if self.suite == "full":
            self.check_entropy_regimes()
            self.check_decay()
        return self

    def check_ks_entropy(self):
        T = classify_automorphism(CAT_MATRIX)
        expected = math.log(3 + 2 * math.sqrt(2))
        eig = math.log(np.max(np.abs(np.linalg.eigvals(np.array(CAT_MATRIX, dtype=float)))))
        dev = max(abs(T.ks_entropy - expected), abs(T.ks_entropy - eig))
        self.add("ks_entropy", "invariant", dev <= 1e-12 and round(T.ks_entropy, 2) == 1.76, dev, 1e-12,
                 ks_entropy=T.ks_entropy)

    def check_unitarity(self):
        worst = 0.0
        for kind in MapKind:
            for N in (4, 8, 16):
                qmap = build_unitary(kind, N, seed=self.seed)
                for r in range(-8, 9):
                    worst = max(worst, unitarity_deviation(qmap.power(r)))
        self.add("unitarity", "invariant", worst <= 1e-9, worst, 1e-9)

    def check_measurement_entropy(self):
        dev_equal = max(abs(build_partition(16, "equal:{}".format(K)).h_meas - math.log(K)) for K in (1, 2, 4, 8, 16))
        dev_sizes = abs(build_partition(16, "sizes:2,2,4,8").h_meas + math.log(88 / 256))
        dev = max(dev_equal, dev_sizes)
        self.add("measurement_entropy", "invariant", dev <= 1e-12, dev, 1e-12)

    def check_oracle_equivalence(self):
        purity_mismatch, spec_mismatch = 0.0, 0.0
        for kind in MapKind:
            for N in (4, 8):
                qmap = build_unitary(kind, N, seed=self.seed)
                for K in (2, 4):
                    P = build_partition(N, K)
                    for state in evolve_choi(qmap, P, 3, measure=self.measure):
                        D = gram_matrix(qmap, P, state.step_count)
                        purity_mismatch = max(purity_mismatch, abs(math.exp(-linear_entropy(state)) - purity_from_gram(D)))
                        spec_mismatch = max(spec_mismatch, spectral_mismatch(state, D))
                        self.metrics["trace_drift"] = max(self.metrics["trace_drift"], abs(state.trace() - 1),
                                                          abs(D.trace - 1))
        self.metrics["purity_mismatch"] = purity_mismatch
        self.metrics["max_spectral_mismatch"] = spec_mismatch
        self.add("oracle_purity", "invariant", purity_mismatch <= 1e-8, purity_mismatch, 1e-8)
        self.add("oracle_spectrum", "invariant", spec_mismatch <= 1e-7, spec_mismatch, 1e-7)
        self.add("trace_preservation", "invariant", self.metrics["trace_drift"] <= 1e-10,
                 self.metrics["trace_drift"], 1e-10)

    def check_entropy_bound(self, dims):
        worst = -np.inf
        for kind in (MapKind.CAT, MapKind.ELLIPTIC, MapKind.SHIFT):
            for N in dims:
                qmap = build_unitary(kind, N)
                for K in (4, 8):
                    series = entropy_series(qmap, build_partition(N, K), 14, measure=self.measure, quiet=self.quiet)
                    worst = max(worst, float(np.max(series.values - series.bounds)))
        self.add("entropy_bound", "invariant", worst <= 1e-9, worst, 1e-9, dims=list(dims))

    def check_basis_independence(self):
        N = 8
        qmap = build_unitary(MapKind.CAT, N)
        P = build_partition(N, 4)
        V = build_unitary(MapKind.HAAR, N, seed=self.seed + 1).matrix
        a = entropy_series(qmap, P, 6, measure=self.measure).values
        b = entropy_series(qmap, P, 6, measure=self.measure, ancilla_basis=V).values
        dev = float(np.max(np.abs(a - b)))
        self.add("basis_independence", "invariant", dev <= 1e-9, dev, 1e-9)

    def check_correlation_identities(self):
        N = 32
        qmap = build_unitary(MapKind.CAT, N)
        P = build_partition(N, 4)
        rng = rng_stream(self.seed, 7)
        phased = QuantizedMap(MapKind.CAT, np.exp(0.37j) * qmap.matrix)
        worst_phase, worst_conj = 0.0, 0.0
        for n in range(1, 6):
            seq = [(int(r), int(k)) for r, k in zip(rng.choice([-2, -1, 1, 2], n), rng.integers(1, 5, n))]
            c = correlation_value(qmap, P, seq)
            worst_phase = max(worst_phase, abs(c.abs_value - correlation_value(phased, P, seq).abs_value))
            # reversed sequence with negated powers, shifted so each Q follows its own power
            rev = _reversed_conjugate(seq)
            worst_conj = max(worst_conj, abs(correlation_value(qmap, P, rev).value - np.conj(c.value)))
        ksum = max(abs(sum(correlation_value(qmap, P, [(r, k)]).value for k in range(1, 5))) for r in (1, 2, 3))
        self.add("correlation_phase_invariance", "invariant", worst_phase <= 1e-12, worst_phase, 1e-12)
        self.add("correlation_conjugation", "invariant", worst_conj <= 1e-12, worst_conj, 1e-12)
        self.add("correlation_block_sum", "invariant", ksum <= 1e-12, ksum, 1e-12)

    def check_f_second_moment(self):
        P = build_partition(256, 4)
        qmap = build_unitary(MapKind.CAT, 256)
        dev = max(abs(f_variable_stats(qmap, P, m, j, "Q").second_moment - 0.1875)
                  for m in (1, -1, 3) for j in range(1, 5))
        self.add("f_second_moment", "invariant", dev <= 1e-12, dev, 1e-12)

    def diagnose_simplifying_conditions(self):
        report = verify_simplifying_conditions(build_unitary(MapKind.CAT, 64), build_partition(64, 4), 16,
                                               period_search=256)
        self.diagnostics["simplifying_conditions_cat_N64"] = report.as_dict()

    def check_entropy_regimes(self):
        h_ks = reference_ks_entropy(MapKind.CAT)
        N = 64
        cat = build_unitary(MapKind.CAT, N)

        s8 = entropy_series(cat, build_partition(N, 8), 14, quiet=self.quiet)
        reg8 = classify_regimes(s8, h_ks, rel_tol=0.15)
        ok = abs(reg8.initial_rate - math.log(8)) <= 0.15 * math.log(8) and reg8.ks_window_step is not None
        self.add("regime_two_regime_K8", "reproduction", ok, reg8.initial_rate, math.log(8), **reg8.as_dict())

        s4 = entropy_series(cat, build_partition(N, 4), 14, quiet=self.quiet)
        reg4 = classify_regimes(s4, h_ks)
        stop = reg4.saturation_step if reg4.saturation_step is not None else len(s4.values) - 1
        slope4 = float(linregress(s4.steps[:stop], s4.values[:stop]).slope) if stop >= 2 else float("nan")
        self.add("regime_measurement_limited_K4", "reproduction", abs(slope4 - math.log(4)) <= 0.1 * math.log(4),
                 slope4, math.log(4), **reg4.as_dict())

        shift = entropy_series(build_unitary(MapKind.SHIFT, N), build_partition(N, 4), 20, quiet=self.quiet)
        limit = float(np.mean(shift.values[-3:]))
        self.add("shift_saturation", "reproduction", abs(limit - math.log(N)) <= 0.05 * math.log(N),
                 limit, math.log(N))

        ell = entropy_series(build_unitary(MapKind.ELLIPTIC, N), build_partition(N, 4), 14, quiet=self.quiet)
        above = np.nonzero(s4.values > 0.95 * s4.bound_sat)[0]
        if len(above):
            n_cat = int(above[0])
            ok = ell.values[n_cat] < 0.95 * ell.bound_sat
            self.add("elliptic_slower", "reproduction", ok, float(ell.values[n_cat]), 0.95 * ell.bound_sat, step=n_cat)
        else:
            self.add("elliptic_slower", "reproduction", False, None, 0.95 * s4.bound_sat,
                     note="cat run never reached 0.95 * 2 ln N")

    def check_decay(self):
        def summary(N, K, samples=16):
            qmap = build_unitary(MapKind.CAT, N)
            P = build_partition(N, K)
            n_max = math.floor(2 * math.log(N) / P.h_meas) + 10
            return fit_decay(sample_correlations(qmap, P, n_max, samples, seed=self.seed, quiet=self.quiet), P, N)

        by_N = {N: summary(N, 4) for N in (128, 256, 512)}
        rates = [s.rate for s in by_N.values()]
        spread = max(rates) / min(rates) - 1 if min(rates) > 0 else float("inf")
        self.add("decay_rate_N_independence", "reproduction", spread <= 0.2, spread, 0.2,
                 rates={str(N): s.rate for N, s in by_N.items()})

        s8 = summary(256, 8)
        As = {"4": by_N[256].A, "8": s8.A}
        self.add("ansatz_constant", "reproduction", all(0.7 <= A <= 1.3 for A in As.values()), As, [0.7, 1.3])

        s4 = by_N[256]
        frac = s4.below_extrapolation_fraction
        self.add("free_independence_signature", "reproduction", frac is not None and frac >= 0.8, frac, 0.8,
                 early_gaps=s4.early_gaps, early_mean_gaps=s4.early_mean_gaps)

        P = build_partition(256, 4)
        table = f_variable_table(build_unitary(MapKind.CAT, 256), P, 8, variant="P")
        self.add("f_variable_mean", "reproduction", 0.5 * table.prediction <= table.mean_abs <= 2 * table.prediction,
                 table.mean_abs, table.prediction, rms=table.rms)

        low = {}
        for N in (128, 512):
            res = exhaustive_low_order_check(build_unitary(MapKind.CAT, N), build_partition(N, 4), 2, (1,))
            low[str(N)] = [r.max_abs for r in res]
        self.add("low_order_decreases_with_N", "reproduction", low["512"][1] < low["128"][1], low, None)

        haar = {str(N): check_max_enpr(gram_matrix(build_unitary(MapKind.HAAR, N, seed=self.seed),
                                                  build_partition(N, 4), 2)).max_deviation
                for N in (128, 512)}
        self.diagnostics["haar_max_enpr_deviation"] = haar
        self.add("haar_max_enpr_decreases_with_N", "reproduction", haar["512"] < haar["128"], haar, None)

    def report(self):
        return {
            "suite": self.suite,
            "inject_fault": None if self.measure else "skip-measurement",
            "passed": self.passed,
            "failing": self.failing,
            "open_deviations": self.open_deviations,
            "max_spectral_mismatch": self.metrics["max_spectral_mismatch"],
            "trace_drift": self.metrics["trace_drift"],
            "purity_mismatch": self.metrics["purity_mismatch"],
            "checks": [asdict(c) for c in self.checks],
            "diagnostics": self.diagnostics,
        }


def _reversed_conjugate(sequence):
    """
    Sequence whose correlation is the complex conjugate of the given one:
    conj Tr(U^r1 Q1 ... U^rn Qn) = Tr(Qn U^-rn ... Q1 U^-r1), rotated so that
    every power precedes its Q again.
    """
    rs = [-r for r, _ in sequence][::-1]
    ks = [k for _, k in sequence][::-1]
    # Tr(Q_kn U^-rn Q_kn-1 ... Q_k1 U^-r1) = Tr(U^-r1 Q_kn U^-rn Q_kn-1 ... U^-r2 Q_k1)
    rs = rs[-1:] + rs[:-1]
    return list(zip(rs, ks))


def run_verify(config, quiet=True):
    config.validate()
    with RunRecorder(config) as rec:
        suite = VerifySuite(config.suite, config.inject_fault, config.seed, quiet=quiet).run()
        rec.write_json("verify_report.json", suite.report())
        for c in suite.checks:
            if c.kind == "invariant":
                rec.invariants[c.name] = c.passed
        if rec.elapsed > VERIFY_SOFT_BUDGET_S:
            logger.warning("verify suite took %.0f s, above the %d s budget", rec.elapsed, VERIFY_SOFT_BUDGET_S)
    return suite, rec.manifest


RUNNERS = {"entropy": run_entropy, "freeness": run_freeness, "fstats": run_fstats, "verify": run_verify}

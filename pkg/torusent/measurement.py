"""
Diagonal-block projective measurements.

A partition 0 = N_0 < N_1 < ... < N_K = N of the basis defines the projectors
P_j onto the index range (N_{j-1}, N_j]. Projectors are never stored as
matrices: every product with P_j or with a centered Q_j is a row/column mask,
plus a scaled copy for the identity part of Q_j.

Block indices j are 1-based throughout the public interface.
"""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from torusent.errors import ConfigError
from torusent.torus_maps import map_period

logger = logging.getLogger(__name__)

CENTERINGS = ("printed", "traceless")


def parse_partition_spec(text):
    """
    Parse "equal:K" or "sizes:d1,d2,...,dK" into ("equal", K) or
    ("sizes", (d1, ..., dK)).
    """
    try:
        kind, _, body = text.partition(":")
        kind = kind.strip().lower()
        if kind == "equal":
            return "equal", int(body)
        if kind == "sizes":
            return "sizes", tuple(int(d) for d in body.split(","))
    except ValueError:
        pass
    raise ConfigError("Bad partition spec {!r}; expected 'equal:K' or 'sizes:d1,d2,...'".format(text))


@dataclass(frozen=True)
class Partition:
    dim: int
    boundaries: tuple

    def __post_init__(self):
        b = self.boundaries
        if len(b) < 2 or b[0] != 0 or b[-1] != self.dim:
            raise ConfigError("Partition boundaries must run from 0 to N={}, got {}".format(self.dim, b))
        if any(lo >= hi for lo, hi in zip(b[:-1], b[1:])):
            raise ConfigError("Partition boundaries must be strictly increasing, got {}".format(b))

    @property
    def K(self):
        return len(self.boundaries) - 1

    @cached_property
    def block_sizes(self):
        return np.diff(self.boundaries)

    @cached_property
    def h_meas(self):
        return measurement_entropy(self)

    @cached_property
    def labels(self):
        """Block index (0-based) of every basis index."""
        return np.repeat(np.arange(self.K), self.block_sizes)

    @cached_property
    def same_block(self):
        """N x N boolean mask, True where row and column lie in the same block."""
        return self.labels[:, None] == self.labels[None, :]

    @property
    def is_equal(self):
        return bool(np.all(self.block_sizes == self.block_sizes[0]))

    @property
    def spec(self):
        if self.is_equal:
            return "equal:{}".format(self.K)
        return "sizes:" + ",".join(str(d) for d in self.block_sizes)

    def block(self, j):
        """Index slice of block j (1-based)."""
        if not 1 <= j <= self.K:
            raise ConfigError("Block index {} outside 1..{}".format(j, self.K))
        return slice(self.boundaries[j - 1], self.boundaries[j])


def build_partition(N, spec):
    """
    spec is either a string ("equal:K" / "sizes:d1,...,dK"), an int K (equal
    blocks) or a sequence of block sizes.
    """
    N = int(N)
    if isinstance(spec, str):
        kind, value = parse_partition_spec(spec)
    elif isinstance(spec, (int, np.integer)):
        kind, value = "equal", int(spec)
    else:
        kind, value = "sizes", tuple(int(d) for d in spec)

    if kind == "equal":
        K = value
        if K < 1 or N % K != 0:
            raise ConfigError("equal:{} needs K >= 1 dividing N={}".format(K, N))
        boundaries = tuple(N * j // K for j in range(K + 1))
    else:
        sizes = value
        if len(sizes) == 0 or any(d <= 0 for d in sizes):
            raise ConfigError("Block sizes must be positive, got {}".format(sizes))
        if sum(sizes) != N:
            raise ConfigError("Block sizes {} sum to {}, expected N={}".format(sizes, sum(sizes), N))
        boundaries = tuple(int(b) for b in np.concatenate([[0], np.cumsum(sizes)]))

    return Partition(N, boundaries)


def measurement_entropy(P):
    """h(P) = -ln sum_j (Tr P_j)^2 / N^2, in nats."""
    d = np.asarray(P.block_sizes, dtype=np.int64)
    return float(-np.log(int(np.sum(d * d)) / (P.dim * P.dim)))


class ProjectorFamily:
    """
    The projectors P_1..P_K of a partition and their centered versions
    Q_j = P_j - c_j * 1. With centering="printed", c_j = 1/K for every block;
    with "traceless", c_j = d_j/N so that Tr Q_j = 0 also for unequal blocks.
    Both coincide for equal partitions.
    """

    def __init__(self, partition, centering="printed"):
        if centering not in CENTERINGS:
            raise ConfigError("centering must be one of {}, got {!r}".format(CENTERINGS, centering))
        self.partition = partition
        self.centering = centering

    @property
    def K(self):
        return self.partition.K

    @property
    def dim(self):
        return self.partition.dim

    def offset(self, j):
        if self.centering == "printed":
            return 1.0 / self.K
        return self.partition.block_sizes[j - 1] / self.dim

    def apply_projector(self, j, M, side="both"):
        """P_j M, M P_j or P_j M P_j by zeroing rows and/or columns outside block j."""
        blk = self.partition.block(j)
        out = np.zeros_like(M)
        if side == "left":
            out[blk, :] = M[blk, :]
        elif side == "right":
            out[:, blk] = M[:, blk]
        elif side == "both":
            out[blk, blk] = M[blk, blk]
        else:
            raise ConfigError("side must be 'left', 'right' or 'both', got {!r}".format(side))
        return out

    def apply_centered(self, j, M, side="right"):
        c = self.offset(j)
        if side == "both":
            return (self.apply_projector(j, M, "both")
                    - c * (self.apply_projector(j, M, "left") + self.apply_projector(j, M, "right"))
                    + c * c * M)
        return self.apply_projector(j, M, side) - c * M

    def pinch(self, M):
        return np.where(self.partition.same_block, M, 0)

    def centered_trace(self, j):
        """(1/N) Tr Q_j"""
        return self.partition.block_sizes[j - 1] / self.dim - self.offset(j)

    def centered_second_moment(self, j):
        """(1/N) Tr Q_j^2"""
        c = self.offset(j)
        return self.partition.block_sizes[j - 1] / self.dim * (1 - 2 * c) + c * c


def apply_projector(P, j, M, side="both"):
    if isinstance(P, Partition):
        P = ProjectorFamily(P)
    return P.apply_projector(j, M, side)


def pinch(P, M):
    """sum_j P_j M P_j"""
    if isinstance(P, Partition):
        P = ProjectorFamily(P)
    return P.pinch(M)


@dataclass
class SimplifyingConditionsReport:
    projector_deviation: np.ndarray   # |Tr P_j / N - 1/K|, j = 1..K
    trace_powers: np.ndarray          # |Tr U^n| / N, n = 1..n_max
    period: object = None

    @property
    def max_projector_deviation(self):
        return float(np.max(self.projector_deviation))

    @property
    def max_trace_power(self):
        return float(np.max(self.trace_powers))

    def as_dict(self):
        return {
            "projector_deviation": [float(x) for x in self.projector_deviation],
            "trace_powers": [float(x) for x in self.trace_powers],
            "period": self.period,
        }


def verify_simplifying_conditions(qmap, P, n_max, period_search=None):
    """
    Report how far (U, P) is from the simplifying conditions Tr P_j / N = 1/K
    and Tr U^n = 0. This is a diagnostic: quantized maps are periodic, so the
    trace condition cannot hold for every n.
    """
    if n_max < 1:
        raise ConfigError("n_max must be >= 1, got {}".format(n_max))
    if qmap.dim != P.dim:
        raise ConfigError("Map dimension {} does not match partition dimension {}".format(qmap.dim, P.dim))

    proj_dev = np.abs(P.block_sizes / P.dim - 1.0 / P.K)
    traces = np.abs(qmap.trace_powers(n_max)) / P.dim
    period = map_period(qmap, period_search) if period_search else None
    logger.debug("Simplifying conditions: max proj dev %.3e, max |Tr U^n|/N %.3e",
                 np.max(proj_dev), np.max(traces))
    return SimplifyingConditionsReport(proj_dev, traces, period)

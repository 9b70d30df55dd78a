"""
Linear automorphisms of the two-torus and their quantized unitaries.

The cat and elliptic matrices follow the printed Gauss-sum formulas with the
1-based index convention r, k = 1..N, so intermediate matrices are comparable
entry by entry between implementations.
"""
import logging
import threading
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import qr

from torusent.errors import ConfigError, InvariantViolation
from torusent.utils import rng_stream, unitarity_deviation

logger = logging.getLogger(__name__)

UNITARITY_TOL = 1e-10

# The matrices behind the "cat" and "elliptic" quantizations
CAT_MATRIX = ((2, 7), (1, 4))
ELLIPTIC_MATRIX = ((0, 1), (-1, 0))


class Classification(str, Enum):
    HYPERBOLIC = "hyperbolic"
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"


class MapKind(str, Enum):
    CAT = "cat"
    ELLIPTIC = "elliptic"
    SHIFT = "shift"
    HAAR = "haar"


@dataclass(frozen=True)
class TorusAutomorphism:
    t11: int
    t12: int
    t21: int
    t22: int
    classification: Classification
    ks_entropy: float


def classify_automorphism(T):
    """
    Classify the integer matrix T (det T = 1) as hyperbolic, elliptic or
    parabolic from |Tr T| and compute its Kolmogorov-Sinai entropy
    ln lambda_+, which is zero unless the map is hyperbolic.
    """
    T = np.asarray(T)
    if T.shape != (2, 2) or not np.issubdtype(T.dtype, np.integer):
        raise ConfigError("T must be a 2x2 integer matrix, got {!r}".format(T.tolist()))

    t11, t12, t21, t22 = (int(t) for t in T.ravel())
    det = t11 * t22 - t12 * t21
    if det != 1:
        raise ConfigError("Invalid torus automorphism {}: det T = {}, expected 1".format(T.tolist(), det))

    tr = abs(t11 + t22)
    if tr > 2:
        classification = Classification.HYPERBOLIC
        ks_entropy = float(np.log((tr + np.sqrt(tr * tr - 4.0)) / 2))
    elif tr < 2:
        classification = Classification.ELLIPTIC
        ks_entropy = 0.0
    else:
        classification = Classification.PARABOLIC
        ks_entropy = 0.0

    return TorusAutomorphism(t11, t12, t21, t22, classification, ks_entropy)


class QuantizedMap:
    """
    An N x N unitary together with its provenance. The matrix is read-only;
    integer powers are computed on demand by repeated multiplication and
    cached, so one map can be shared by concurrent readers.
    """

    def __init__(self, kind, matrix, seed=None):
        self.kind = MapKind(kind)
        self.matrix = np.array(matrix, dtype=np.complex128)
        self.matrix.setflags(write=False)
        self.dim = self.matrix.shape[0]
        self.seed = seed
        identity = np.eye(self.dim, dtype=np.complex128)
        identity.setflags(write=False)
        self.power_cache = {0: identity, 1: self.matrix}
        self._lock = threading.Lock()

    def __repr__(self):
        return "QuantizedMap(kind={}, dim={})".format(self.kind.value, self.dim)

    def power(self, r):
        r = int(r)
        cached = self.power_cache.get(r)
        if cached is not None:
            return cached

        if r < 0:
            M = np.ascontiguousarray(self.power(-r).conj().T)
            M.setflags(write=False)
            with self._lock:
                return self.power_cache.setdefault(r, M)

        with self._lock:
            start = max(k for k in self.power_cache if k <= r)
            M = self.power_cache[start]
            for k in range(start + 1, r + 1):
                M = self.matrix @ M
                M.setflags(write=False)
                self.power_cache[k] = M
        logger.debug("%r: power cache extended to r=%d", self, r)
        return M

    def trace_powers(self, n_max):
        """Tr U^n for n = 1..n_max."""
        return np.array([np.trace(self.power(n)) for n in range(1, n_max + 1)])


def unitary_power(qmap, r):
    """U^r; negative r is the conjugate transpose of U^|r|."""
    return qmap.power(r)


def _cat_matrix(N):
    r, k = np.meshgrid(np.arange(1, N + 1), np.arange(1, N + 1), indexing="ij")
    # exponent reduced mod N in integer arithmetic before going to floats
    phase = (r * r + 2 * k * k - k * r) % N
    return np.exp(-2j * np.pi * phase / N) / np.sqrt(N)


def _elliptic_matrix(N):
    r, k = np.meshgrid(np.arange(1, N + 1), np.arange(1, N + 1), indexing="ij")
    phase = (r * k) % N
    return np.sqrt(1j / N) * np.exp(2j * np.pi * phase / N)


def _shift_matrix(N):
    U = np.zeros((N, N), dtype=np.complex128)
    U[(np.arange(N) + 1) % N, np.arange(N)] = 1
    return U


def _haar_matrix(N, seed):
    rng = rng_stream(seed, N)
    z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
    q, r = qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def build_unitary(kind, N, seed=0, tol=UNITARITY_TOL):
    """
    Build the quantized map of the given kind on C^N:

        cat       U_rk = N^(-1/2) exp{(-2 pi i / N)(r^2 + 2k^2 - kr)}
        elliptic  U_rk = (i/N)^(1/2) exp{(2 pi i / N) rk}
        shift     U|r> = |r+1>, |r+N> = |r>
        haar      seeded Haar-random unitary (control baseline)

    The result is checked for unitarity; an InvariantViolation carrying the
    maximal deviation of U^dagger U from the identity is raised if it fails.
    """
    kind = MapKind(kind)
    N = int(N)
    if N < 2:
        raise ConfigError("Hilbert space dimension must be at least 2, got {}".format(N))

    if kind == MapKind.CAT:
        U = _cat_matrix(N)
    elif kind == MapKind.ELLIPTIC:
        U = _elliptic_matrix(N)
    elif kind == MapKind.SHIFT:
        U = _shift_matrix(N)
    else:
        U = _haar_matrix(N, seed)

    dev = unitarity_deviation(U)
    if dev > tol:
        raise InvariantViolation("unitarity",
                                 "{} map with N={} is not unitary (max |U^+U - 1| = {:.3e})".format(kind.value, N, dev),
                                 value=dev)
    logger.debug("Built %s map, N=%d, unitarity deviation %.2e", kind.value, N, dev)

    return QuantizedMap(kind, U, seed=seed if kind == MapKind.HAAR else None)


def map_period(qmap, max_power=None, tol=1e-9):
    """
    Smallest r >= 1 with U^r = exp(i phi) * 1, or None if there is none up to
    max_power (default 4N).
    """
    if max_power is None:
        max_power = 4 * qmap.dim
    # powers visited here stay out of the cache
    M = np.eye(qmap.dim, dtype=np.complex128)
    for r in range(1, max_power + 1):
        M = qmap.matrix @ M
        diags = np.diag(M)
        if np.allclose(M, np.diag(diags), atol=tol) and np.allclose(diags, diags[0], atol=tol):
            return r
    return None

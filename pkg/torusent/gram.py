"""
Brute-force reference for the Choi evolution.

Every measurement history p = (p_1, ..., p_n) has a Kraus path operator
K_p = P_{p_n} U ... P_{p_1} U. The correlation matrix

    D[p; q] = (1/N) Tr(K_q^+ K_p)

is the Gram matrix of the path operators; its nonzero spectrum coincides with
that of Omega[n], so Tr D^2 = Tr Omega[n]^2. The number of paths is K^n,
which keeps this module at oracle scale.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh

from torusent.errors import ConfigError, ResourceCeilingError
from torusent.utils import check_square

logger = logging.getLogger(__name__)

MAX_PATHS = 4096


def _check_cap(K, n):
    if K ** n > MAX_PATHS:
        raise ResourceCeilingError("K^n = {}^{} = {} paths exceeds the oracle cap of {}".format(K, n, K ** n, MAX_PATHS))


def path_index(index, K, n):
    """Multi-index (p_1, ..., p_n), 1-based, of a path; p_1 varies fastest."""
    return tuple((index // K ** t) % K + 1 for t in range(n))


def path_operators(qmap, P, n):
    """
    Array of shape (K^n, N, N) holding K_p for every path, built breadth first
    with K_{p.k} = P_k U K_p. Path ordering is lexicographic with p_1 fastest.
    """
    if qmap.dim != P.dim:
        raise ConfigError("Map dimension {} does not match partition dimension {}".format(qmap.dim, P.dim))
    _check_cap(P.K, n)

    ops = np.eye(P.dim, dtype=np.complex128)[None]
    for _ in range(n):
        UK = np.matmul(qmap.matrix, ops)
        children = []
        for k in range(1, P.K + 1):
            child = np.zeros_like(UK)
            blk = P.block(k)
            child[:, blk, :] = UK[:, blk, :]
            children.append(child)
        ops = np.concatenate(children, axis=0)
    return ops


@dataclass
class GramMatrix:
    n: int
    K: int
    entries: np.ndarray

    @property
    def trace(self):
        return float(np.trace(self.entries).real)

    def eigenvalues(self):
        return eigvalsh(self.entries)


def gram_matrix(qmap, P, n):
    ops = path_operators(qmap, P, n)
    F = ops.reshape(ops.shape[0], -1)
    D = F @ F.conj().T / qmap.dim
    logger.debug("Gram matrix for %s N=%d %s n=%d: %d paths, Tr D = %.12f",
                 qmap.kind.value, qmap.dim, P.spec, n, D.shape[0], np.trace(D).real)
    return GramMatrix(n, P.K, D)


def purity_from_gram(D):
    """Tr D^2 as the squared Frobenius norm of the Hermitian D."""
    return float(np.sum(np.abs(D.entries) ** 2))


@dataclass
class MaxEnprReport:
    max_deviation: float
    location: tuple                   # (p, q) multi-indices of the largest deviation
    tol: float

    @property
    def passed(self):
        return self.max_deviation <= self.tol


def check_max_enpr(D, tol=1e-2):
    """
    Distance of D from the maximal entropy-production form delta_pq / K^n,
    i.e. from what free independence of U and the measurement predicts.
    """
    target = np.eye(D.entries.shape[0]) / D.K ** D.n
    dev = np.abs(D.entries - target)
    i, j = np.unravel_index(np.argmax(dev), dev.shape)
    location = (path_index(i, D.K, D.n), path_index(j, D.K, D.n))
    return MaxEnprReport(float(dev[i, j]), location, tol)


def brute_force_state(qmap, P, n, rho0, tol=1e-10, psd_tol=1e-8):
    """rho(n) = sum_p K_p rho0 K_p^+ by explicit summation over all K^n paths."""
    rho0 = check_square(rho0, qmap.dim, "rho0")
    if abs(np.trace(rho0) - 1) > tol:
        raise ConfigError("rho0 must have unit trace, got {}".format(np.trace(rho0)))
    if np.max(np.abs(rho0 - rho0.conj().T)) > tol or eigvalsh(rho0).min() < -psd_tol:
        raise ConfigError("rho0 is not a positive semidefinite Hermitian matrix")

    ops = path_operators(qmap, P, n)
    return np.sum(np.matmul(np.matmul(ops, rho0), ops.conj().transpose(0, 2, 1)), axis=0)


def spectral_mismatch(state, D):
    """
    Largest difference between the sorted spectra of Omega[n] and D after
    padding the shorter one with zeros; only the nonzero parts can differ.
    """
    a = np.sort(state.eigenvalues())[::-1]
    b = np.sort(D.eigenvalues())[::-1]
    L = max(len(a), len(b))
    a = np.pad(a, (0, L - len(a)))
    b = np.pad(b, (0, L - len(b)))
    return float(np.max(np.abs(a - b)))

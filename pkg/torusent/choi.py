"""
Evolution of the system+ancilla state

    Omega[n] = [P U (x) 1]^n |Psi><Psi|,   |Psi> = N^(-1/2) sum_l |l>|l>

and its linear entropy I[n] = -ln Tr Omega[n]^2.

Omega is held as a 4-index torch tensor T[a, alpha, b, beta] (system row,
ancilla row, system column, ancilla column). The unitary step contracts the
system indices only (two O(N^5) tensordots), the measurement step is a mask
on the system indices (O(N^4)), and the purity is a squared Frobenius norm.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import torch
from scipy.stats import linregress

from torusent.errors import ConfigError, InvariantViolation, ResourceCeilingError
from torusent.utils import windowed_slopes

logger = logging.getLogger(__name__)

# Dense N^2 x N^2 complex128 tensors; N = 64 is already 268 MB per copy
MAX_CHOI_DIM = 64
SYMMETRIZE_EVERY = 4
TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-12
PSD_TOL = 1e-8
PSD_CHECK_MAX_DIM = 16


class ChoiState:
    """
    Density matrix of system+ancilla after `step_count` measured steps.
    """

    def __init__(self, tensor, step_count=0):
        if tensor.ndim != 4 or len(set(tensor.shape)) != 1:
            raise ConfigError("Choi tensor must have shape (N, N, N, N), got {}".format(tuple(tensor.shape)))
        self.tensor = tensor
        self.step_count = step_count

    @property
    def dim(self):
        return self.tensor.shape[0]

    def as_matrix(self):
        N = self.dim
        return self.tensor.reshape(N * N, N * N)

    def trace(self):
        return self.as_matrix().diagonal().sum().real.item()

    def purity(self):
        return torch.sum(self.tensor.real ** 2 + self.tensor.imag ** 2).item()

    def dagger(self):
        return self.tensor.permute(2, 3, 0, 1).conj()

    def hermiticity_deviation(self):
        return torch.max(torch.abs(self.tensor - self.dagger())).item()

    def symmetrized(self):
        return ChoiState((self.tensor + self.dagger()) / 2, self.step_count)

    def eigenvalues(self):
        return torch.linalg.eigvalsh(self.as_matrix()).numpy()

    def min_eigenvalue(self):
        if self.dim > PSD_CHECK_MAX_DIM:
            return None
        return float(self.eigenvalues().min())


def _as_torch(M):
    return torch.from_numpy(np.array(M, dtype=np.complex128))


def init_choi(N, ancilla_basis=None):
    """
    Maximally entangled state of system and ancilla, optionally written in
    the ancilla basis V, i.e. (1 (x) V)|Psi>.
    """
    N = int(N)
    if N < 2:
        raise ConfigError("Hilbert space dimension must be at least 2, got {}".format(N))

    if ancilla_basis is None:
        psi = torch.eye(N, dtype=torch.complex128)
    else:
        V = _as_torch(ancilla_basis)
        if V.shape != (N, N):
            raise ConfigError("Ancilla basis has shape {}, expected ({}, {})".format(tuple(V.shape), N, N))
        psi = V.T
    psi = psi / np.sqrt(N)
    return ChoiState(torch.einsum("ax,by->axby", psi, psi.conj()), 0)


def reduced_states(state):
    """(system, ancilla) marginals of Omega as numpy arrays."""
    T = state.tensor
    rho_sys = torch.einsum("axbx->ab", T)
    rho_anc = torch.einsum("axay->xy", T)
    return rho_sys.numpy(), rho_anc.numpy()


def apply_unitary_step(state, qmap):
    """Omega <- (U (x) 1) Omega (U^+ (x) 1)"""
    if qmap.dim != state.dim:
        raise ConfigError("Map dimension {} does not match state dimension {}".format(qmap.dim, state.dim))
    U = _as_torch(qmap.matrix)
    # (a, alpha, d, beta) then (a, alpha, beta, b)
    X = torch.tensordot(U, state.tensor, dims=([1], [0]))
    X = torch.tensordot(X, U.conj(), dims=([2], [1]))
    return ChoiState(X.permute(0, 1, 3, 2).contiguous(), state.step_count)


def apply_measurement_step(state, P):
    """
    Omega <- sum_k (P_k (x) 1) Omega (P_k (x) 1): zero every entry whose system
    row and column indices lie in different blocks. Completes a step, so the
    returned state has step_count + 1.
    """
    if P.dim != state.dim:
        raise ConfigError("Partition dimension {} does not match state dimension {}".format(P.dim, state.dim))
    mask = torch.as_tensor(P.same_block).to(state.tensor.dtype)
    return ChoiState(state.tensor * mask[:, None, :, None], state.step_count + 1)


def linear_entropy(state):
    return -float(np.log(state.purity()))


def _check_state(state, qmap, P):
    """Trace, Hermiticity and (for N <= 16) positivity of Omega[n], before any re-symmetrization."""
    where = "Omega[{}] ({}, N={}, {})".format(state.step_count, qmap.kind.value, state.dim, P.spec)

    drift = abs(state.trace() - 1)
    if drift > TRACE_TOL:
        raise InvariantViolation("trace_preservation",
                                 "|Tr {} - 1| = {:.3e} exceeds {:.0e}".format(where, drift, TRACE_TOL), value=drift)

    dev = state.hermiticity_deviation()
    if dev > HERMITICITY_TOL:
        raise InvariantViolation("hermiticity",
                                 "max |Omega - Omega^+| of {} = {:.3e} exceeds {:.0e}".format(where, dev, HERMITICITY_TOL),
                                 value=dev)

    lowest = state.min_eigenvalue()
    if lowest is not None and lowest < -PSD_TOL:
        raise InvariantViolation("positivity",
                                 "smallest eigenvalue of {} is {:.3e}".format(where, lowest), value=lowest)


def evolve_choi(qmap, P, n_max, measure=True, ancilla_basis=None):
    """
    Yield Omega[1], ..., Omega[n_max]. measure=False replaces the measurement
    with the identity channel; it is only used to inject a known fault into
    the verify suite.
    """
    N = qmap.dim
    if N > MAX_CHOI_DIM:
        raise ResourceCeilingError("Choi evolution is limited to N <= {}, got N={}".format(MAX_CHOI_DIM, N))
    if P.dim != N:
        raise ConfigError("Partition dimension {} does not match map dimension {}".format(P.dim, N))

    state = init_choi(N, ancilla_basis)
    for n in range(1, n_max + 1):
        state = apply_unitary_step(state, qmap)
        if measure:
            state = apply_measurement_step(state, P)
        else:
            state = ChoiState(state.tensor, state.step_count + 1)
        _check_state(state, qmap, P)
        if n % SYMMETRIZE_EVERY == 0:
            state = state.symmetrized()
        yield state


@dataclass
class EntropySeries:
    dim: int
    K: int
    map_kind: str
    partition_spec: str
    h_meas: float
    values: np.ndarray                 # I[0], ..., I[n_max]
    window: int = 2
    violations: list = field(default_factory=list)

    @property
    def steps(self):
        return np.arange(len(self.values))

    @property
    def bound_lin(self):
        return self.steps * np.log(self.K)

    @property
    def bound_sat(self):
        return 2 * np.log(self.dim)

    @property
    def bounds(self):
        return np.minimum(self.bound_lin, self.bound_sat)

    @property
    def slopes(self):
        return windowed_slopes(self.values, self.window)

    def rows(self):
        for n, I, b, s in zip(self.steps, self.values, self.bound_lin, self.slopes):
            yield int(n), float(I), float(b), float(self.bound_sat), float(s)


def entropy_series(qmap, P, n_max, window=2, measure=True, ancilla_basis=None, quiet=True):
    """
    Alternate unitary and measurement steps from the maximally entangled state
    and record I[n] after each measurement. Breaks of the bound
    I[n] <= min(n ln K, 2 ln N) or of monotonicity are logged and collected in
    `violations`; a trace drift aborts the run.
    """
    if n_max < 1:
        raise ConfigError("n_max must be >= 1, got {}".format(n_max))

    log = logger.debug if quiet else logger.info
    values = [0.0]
    violations = []
    bound_sat = 2 * np.log(qmap.dim)
    for state in evolve_choi(qmap, P, n_max, measure=measure, ancilla_basis=ancilla_basis):
        n = state.step_count
        I = linear_entropy(state)
        log("%s N=%d %s: I[%d] = %.6f", qmap.kind.value, qmap.dim, P.spec, n, I)

        bound = min(n * np.log(P.K), bound_sat)
        if I > bound + 1e-9:
            violations.append(("entropy_bound", n, I - bound))
            logger.warning("I[%d] = %.12f exceeds bound %.12f", n, I, bound)
        if I < values[-1] - 1e-9:
            violations.append(("entropy_monotonic", n, values[-1] - I))
            logger.warning("I[%d] = %.12f decreased from %.12f", n, I, values[-1])
        values.append(I)

    return EntropySeries(qmap.dim, P.K, qmap.kind.value, P.spec, P.h_meas,
                         np.array(values), window=window, violations=violations)


@dataclass
class RegimeReport:
    initial_rate: float
    ks_window_step: object            # first n whose windowed slope matches h_KS, or None
    ks_window_slope: object
    saturation_step: object
    limiting_value: float
    label: str

    def as_dict(self):
        return dict(self.__dict__)


def classify_regimes(series, h_ks, rel_tol=0.15, initial_steps=2, saturation_fraction=0.9):
    """
    Read the entropy-production regimes off a series: the initial rate, the
    first window (before saturation) whose slope is within rel_tol of h_KS,
    the step where I[n] first exceeds saturation_fraction * 2 ln N, and the
    limiting value. The label is one of

        non-ergodic           saturates near ln N instead of 2 ln N
        slow-approach         h_KS = 0 but ergodic
        two-regime            rate h(P) first, then a window at h_KS
        measurement-limited   rate h(P) up to saturation
    """
    values = series.values
    steps = series.steps
    k = min(initial_steps, len(values) - 1)
    initial_rate = float(linregress(steps[:k + 1], values[:k + 1]).slope)

    above = np.nonzero(values > saturation_fraction * series.bound_sat)[0]
    saturation_step = int(above[0]) if len(above) else None
    limiting = float(np.mean(values[-3:]))

    ks_step, ks_slope = None, None
    if h_ks > 0:
        slopes = series.slopes
        last = saturation_step if saturation_step is not None else len(values) - 1
        for n in range(k + 1, last + 1):
            if abs(slopes[n] - h_ks) <= rel_tol * h_ks:
                ks_step, ks_slope = n, float(slopes[n])
                break

    ln_N = np.log(series.dim)
    if abs(limiting - ln_N) <= 0.1 * ln_N and limiting < 0.75 * series.bound_sat:
        label = "non-ergodic"
    elif h_ks == 0:
        label = "slow-approach"
    elif series.h_meas > h_ks and ks_step is not None:
        label = "two-regime"
    else:
        label = "measurement-limited"

    return RegimeReport(initial_rate, ks_step, ks_slope, saturation_step, limiting, label)

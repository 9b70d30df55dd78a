import numpy as np
from scipy.stats import linregress

from torusent.errors import ConfigError

# |C| values below this are treated as numerical zeros before taking logs
LOG_FLOOR = 1e-15


def check_square(M, dim=None, name="matrix"):
    """Return M as a complex ndarray, checking that it is dim x dim."""
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError("{} must be square, got shape {}".format(name, M.shape))
    if dim is not None and M.shape[0] != dim:
        raise ConfigError("{} has dimension {}, expected {}".format(name, M.shape[0], dim))
    return M


def identity_deviation(M):
    """max |M - 1| over all entries."""
    return np.max(np.abs(M - np.eye(M.shape[0])))


def unitarity_deviation(U):
    return identity_deviation(U.conj().T @ U)


def rng_stream(seed, *keys):
    """
    Independent generator for the stream labelled by (seed, *keys). Streams
    for different keys do not depend on the order in which they are created,
    so parallel scheduling cannot change what each one draws.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [int(k) for k in keys]))


def floor_log(values, floor=LOG_FLOOR):
    """Natural log of values floored at `floor`; also returns the mask of floored entries."""
    values = np.asarray(values, dtype=float)
    floored = values < floor
    return np.log(np.maximum(values, floor)), floored


def windowed_slopes(values, window):
    """
    Least-squares slope of values[n] vs n over the trailing window
    [n - window, n]. slopes[0] is nan.
    """
    values = np.asarray(values, dtype=float)
    slopes = np.full(len(values), np.nan)
    for n in range(1, len(values)):
        lo = max(0, n - window)
        x = np.arange(lo, n + 1)
        slopes[n] = linregress(x, values[lo:n + 1]).slope
    return slopes

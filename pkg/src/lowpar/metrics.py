"""Signal-quality metrics.

Peak-to-average power ratio (PAR), power increase over the minimum-power
solution (PINC), precoding error and out-of-band residuals, and empirical
CCDF statistics. Ratios are linear; to_db/from_db convert to and from the
10*log10 power-ratio scale.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import as_complex_vector


def to_db(ratio):
    """Convert a positive power ratio (scalar or array) to decibels."""
    arr = np.asarray(ratio, dtype=np.float64)
    if np.any(arr <= 0):
        raise ValueError("power ratio must be positive")
    out = 10.0 * np.log10(arr)
    return float(out) if out.ndim == 0 else out


def from_db(db):
    """Convert decibels (scalar or array) to a linear power ratio."""
    arr = np.asarray(db, dtype=np.float64)
    out = np.power(10.0, arr / 10.0)
    return float(out) if out.ndim == 0 else out


def par(x):
    """Peak-to-average power ratio n * max|x_i|^2 / ||x||_2^2, in [1, n]."""
    x = as_complex_vector(x)
    power = float(np.sum(np.abs(x) ** 2))
    if power == 0.0:
        raise ValueError("PAR is undefined for the zero vector")
    peak = float(np.max(np.abs(x)) ** 2)
    return x.size * peak / power


def par_columns(t):
    """PAR of each column of a 2-D array, as a float vector."""
    t = np.asarray(t, dtype=np.complex128)
    if t.ndim != 2:
        raise ValueError(f"expected 2-D array, got shape {t.shape}")
    mags_sq = np.abs(t) ** 2
    power = np.sum(mags_sq, axis=0)
    if np.any(power == 0.0):
        raise ValueError("PAR is undefined for a zero column")
    return t.shape[0] * np.max(mags_sq, axis=0) / power


def pinc(x, x_ref):
    """Power increase ||x||_2^2 / ||x_ref||_2^2 over a reference solution."""
    x = as_complex_vector(x)
    x_ref = as_complex_vector(x_ref, "x_ref")
    ref_power = float(np.sum(np.abs(x_ref) ** 2))
    if ref_power == 0.0:
        raise ValueError("PINC is undefined for a zero reference")
    return float(np.sum(np.abs(x) ** 2)) / ref_power


def pinc_frobenius(t, t_ref):
    """Frame-level power increase ||T||_F^2 / ||T_ref||_F^2."""
    t = np.asarray(t, dtype=np.complex128)
    t_ref = np.asarray(t_ref, dtype=np.complex128)
    ref_power = float(np.sum(np.abs(t_ref) ** 2))
    if ref_power == 0.0:
        raise ValueError("PINC is undefined for a zero reference frame")
    return float(np.sum(np.abs(t) ** 2)) / ref_power


def evm_residual(x_freq, channel_freq, symbols, used_mask):
    """Worst relative symbol error max_w ||s_w - H_w x_w|| / ||s_w||.

    Args:
        x_freq: (antennas, subcarriers) frequency-domain transmit frame.
        channel_freq: (subcarriers, users, antennas) per-tone channel.
        symbols: (subcarriers, users) intended symbols, zero off the mask.
        used_mask: boolean (subcarriers,) mask of data-bearing tones.

    Returns:
        Maximum over used tones, or 0.0 if the mask is empty.
    """
    x_freq = np.asarray(x_freq, dtype=np.complex128)
    mask = np.asarray(used_mask, dtype=bool)
    used = np.flatnonzero(mask)
    if used.size == 0:
        return 0.0
    h = np.asarray(channel_freq, dtype=np.complex128)[used]
    s = np.asarray(symbols, dtype=np.complex128)[used]
    xu = x_freq[:, used].T
    recv = np.einsum("kub,kb->ku", h, xu)
    num = np.linalg.norm(recv - s, axis=1)
    den = np.linalg.norm(s, axis=1)
    return float(np.max(num / den))


def oob_residual(x_freq, used_mask):
    """Largest magnitude transmitted on a tone outside the used mask."""
    x_freq = np.asarray(x_freq, dtype=np.complex128)
    mask = np.asarray(used_mask, dtype=bool)
    unused = ~mask
    if not np.any(unused):
        return 0.0
    return float(np.max(np.abs(x_freq[:, unused])))


def ccdf_percentile(samples, target):
    """Nearest-rank percentile: ceil(target * n)-th smallest sample.

    Boundary products are snapped to the mathematical rank before the
    ceiling so e.g. target 0.5 on 4 samples selects rank 2. Warns when
    fewer than ceil(1 / (1 - target)) samples are available.
    """
    arr = np.asarray(samples, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("percentile of an empty sample set")
    if not 0.0 < target < 1.0:
        raise ValueError(f"target must lie in (0, 1), got {target}")
    needed = math.ceil(1.0 / (1.0 - target))
    if arr.size < needed:
        warnings.warn(
            f"{arr.size} samples cannot resolve the {target:.4g} percentile "
            f"(need at least {needed})",
            stacklevel=2,
        )
    rank = math.ceil(target * arr.size - 1e-9)
    rank = max(rank, 1)
    return float(np.sort(arr)[rank - 1])


@dataclass(frozen=True)
class CcdfCurve:
    """Empirical CCDF of a scalar sample set (values stored sorted ascending)."""

    values: np.ndarray
    count: int

    @classmethod
    def from_samples(cls, samples):
        arr = np.sort(np.asarray(samples, dtype=np.float64).ravel())
        if arr.size == 0:
            raise ValueError("cannot build a CCDF from zero samples")
        return cls(values=arr, count=int(arr.size))

    def percentile(self, target):
        """Nearest-rank percentile of the stored samples."""
        return ccdf_percentile(self.values, target)

    def prob_above(self, threshold):
        """Empirical probability that a sample exceeds the threshold."""
        idx = int(np.searchsorted(self.values, threshold, side="right"))
        return (self.count - idx) / self.count


@dataclass(frozen=True)
class TradeoffPoint:
    """One recorded iterate of an alternating-projections run.

    peak_power is max|x_i|^2 and residual the relative equality-constraint
    error at the iterate; together with the dB metrics they let consumers
    audit par * pinc = n * peak_power / ls_power without the vector.
    """

    iteration: int
    par_db: float
    pinc_db: float
    peak_power: float
    residual: float

"""Multi-user MIMO-OFDM downlink precoding with joint peak reduction.

Models a base station with B antennas serving U single-antenna users
over W subcarriers through a frequency-selective Rayleigh channel. The
minimum-power precoder solves H_w x_w = s_w per used tone; the joint
precoding iteration alternates per-antenna time-domain peak projections
and a global power cap with per-tone re-projection onto the solution
sets, keeping unused tones exactly zero at every iterate.

Conventions: the per-tone channel is the unnormalized DFT of the taps,
H_w = sum_l H_l exp(-2j pi w l / W); time/frequency frames are related
by the unitary DFT, so Frobenius norms agree between domains.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import PIVOT_RTOL, RankDeficiencyError, dft_unitary, idft_unitary
from .metrics import (
    evm_residual,
    oob_residual,
    par,
    par_columns,
    pinc_frobenius,
    to_db,
)
from .projections import proj_par_only


def qam16():
    """16-QAM constellation normalized to unit average symbol energy."""
    levels = np.array([-3.0, -1.0, 1.0, 3.0])
    re, im = np.meshgrid(levels, levels)
    return ((re + 1j * im) / math.sqrt(10.0)).ravel()


def default_used_mask(subcarriers=2048, used=1200):
    """Boolean tone mask: used tones split symmetrically around a null DC.

    Half the used tones sit just above DC, half just below the top of the
    band (the negative frequencies); the DC bin and the remaining middle
    bins are guards.
    """
    if used <= 0 or used >= subcarriers:
        raise ValueError("used tone count must lie in (0, subcarriers)")
    if used % 2 != 0:
        raise ValueError("used tone count must be even for a symmetric split")
    half = used // 2
    if half + 1 > subcarriers - half:
        raise ValueError("not enough guard room for a symmetric split")
    mask = np.zeros(subcarriers, dtype=bool)
    mask[1 : half + 1] = True
    mask[subcarriers - half :] = True
    return mask


@dataclass(frozen=True)
class OfdmScenario:
    """Downlink simulation parameters.

    used_mask defaults to the symmetric 1200-of-2048 tone layout scaled
    to the configured subcarrier count; constellation defaults to unit
    energy 16-QAM.
    """

    bs_antennas: int = 128
    users: int = 16
    subcarriers: int = 2048
    taps: int = 4
    trials: int = 100
    seed: int = 1
    k_max: int = 5
    rho_db: float = 3.0
    xi_db: float = 0.3
    used_mask: np.ndarray | None = None
    constellation: np.ndarray | None = None

    def __post_init__(self):
        if self.users >= self.bs_antennas:
            raise ValueError("users must be fewer than antennas")
        if self.users < 1 or self.subcarriers < 2:
            raise ValueError("need at least one user and two subcarriers")
        if not 1 <= self.taps <= self.subcarriers:
            raise ValueError("tap count must lie in [1, subcarriers]")
        if self.trials < 1 or self.k_max < 1:
            raise ValueError("trials and k_max must be at least 1")
        if self.rho_db < 0.0 or self.xi_db < 0.0:
            raise ValueError("rho_db and xi_db must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.used_mask is None:
            used = min(1200, 2 * ((self.subcarriers - 2) // 2))
            object.__setattr__(self, "used_mask",
                               default_used_mask(self.subcarriers, used))
        else:
            mask = np.asarray(self.used_mask, dtype=bool)
            if mask.shape != (self.subcarriers,):
                raise ValueError("used_mask length must equal subcarriers")
            if not mask.any():
                raise ValueError("used_mask selects no tones")
            object.__setattr__(self, "used_mask", mask)
        if self.constellation is None:
            object.__setattr__(self, "constellation", qam16())
        else:
            const = np.asarray(self.constellation, dtype=np.complex128)
            if const.ndim != 1 or const.size < 2:
                raise ValueError("constellation must be a 1-D set of points")
            energy = float(np.mean(np.abs(const) ** 2))
            if abs(energy - 1.0) > 1e-12:
                raise ValueError("constellation must have unit average energy")
            object.__setattr__(self, "constellation", const)

    @property
    def used_indices(self):
        return np.flatnonzero(self.used_mask)


@dataclass(frozen=True)
class ChannelRealization:
    """One channel draw: time-domain taps and their per-tone transform.

    taps has shape (taps, users, antennas); freq has shape
    (subcarriers, users, antennas) with freq[w] = sum_l taps[l] e^{-2j pi w l / W}.
    """

    taps: np.ndarray
    freq: np.ndarray


def generate_channel(scenario, rng):
    """Draw i.i.d. unit-variance circular complex Gaussian taps.

    Per-entry tap variance is exactly 1 regardless of the tap count; the
    per-tone channel is the unnormalized DFT of the taps.
    """
    shape = (scenario.taps, scenario.users, scenario.bs_antennas)
    draws = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    taps = draws * math.sqrt(0.5)
    freq = np.fft.fft(taps, n=scenario.subcarriers, axis=0)
    return ChannelRealization(taps=taps, freq=freq)


def draw_symbols(scenario, rng):
    """Uniform i.i.d. constellation draws on used tones, zeros elsewhere."""
    used = scenario.used_indices
    idx = rng.integers(0, scenario.constellation.size,
                       size=(used.size, scenario.users))
    symbols = np.zeros((scenario.subcarriers, scenario.users),
                       dtype=np.complex128)
    symbols[used] = scenario.constellation[idx]
    return symbols


@dataclass(frozen=True)
class PrecodeFrame:
    """Paired frequency- and time-domain transmit frames.

    x_freq has shape (antennas, subcarriers); t_time has shape
    (subcarriers, antennas) and is the per-antenna unitary inverse DFT,
    so the Frobenius norms of the two domains are equal.
    """

    x_freq: np.ndarray
    t_time: np.ndarray

    def __post_init__(self):
        if self.x_freq.shape != self.t_time.shape[::-1]:
            raise ValueError("frequency and time frames have mismatched shapes")

    @classmethod
    def from_freq(cls, x_freq):
        x_freq = np.asarray(x_freq, dtype=np.complex128)
        return cls(x_freq=x_freq, t_time=idft_unitary(x_freq.T, axis=0))

    @classmethod
    def from_time(cls, t_time):
        t_time = np.asarray(t_time, dtype=np.complex128)
        return cls(x_freq=dft_unitary(t_time, axis=0).T, t_time=t_time)


class _UsedToneSystems:
    """Per-used-tone Gram factors, computed once per channel realization.

    Holds the used-tone channel stack, the inverse Cholesky factors of
    H_w H_w^H, and the symbol stack; solves and projections are batched
    over tones.
    """

    def __init__(self, channel_freq, used_indices, symbols):
        h = np.ascontiguousarray(channel_freq[used_indices])
        gram = h @ h.conj().transpose(0, 2, 1)
        diag = np.real(np.einsum("kuu->ku", gram))
        ref = np.max(np.abs(diag), axis=1)
        try:
            factor = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError(
                "per-tone Gram matrix is not positive definite"
            ) from exc
        pivots = np.real(np.einsum("kuu->ku", factor)) ** 2
        if np.any(np.min(pivots, axis=1) < PIVOT_RTOL * ref):
            raise RankDeficiencyError(
                f"per-tone Cholesky pivot below {PIVOT_RTOL:g} of the Gram diagonal"
            )
        self.h = h
        self.h_herm = np.ascontiguousarray(h.conj().transpose(0, 2, 1))
        self.factor_inv = np.linalg.inv(factor)
        self.factor_inv_herm = np.ascontiguousarray(
            self.factor_inv.conj().transpose(0, 2, 1)
        )
        self.symbols = np.ascontiguousarray(symbols[used_indices])

    def gram_apply_inverse(self, r):
        """Batched solve of (H_w H_w^H) w = r_w over used tones."""
        y = (self.factor_inv @ r[:, :, None])[:, :, 0]
        return (self.factor_inv_herm @ y[:, :, None])[:, :, 0]

    def ls_columns(self):
        """Minimum-power per-tone solutions, stacked (tones, antennas)."""
        w = self.gram_apply_inverse(self.symbols)
        return (self.h_herm @ w[:, :, None])[:, :, 0]

    def project_columns(self, xu):
        """Project stacked per-tone vectors onto their solution sets."""
        recv = (self.h @ xu[:, :, None])[:, :, 0]
        w = self.gram_apply_inverse(recv - self.symbols)
        return xu - (self.h_herm @ w[:, :, None])[:, :, 0]


@dataclass(frozen=True)
class JppIterationStats:
    """Metrics of one recorded precoding iterate.

    par_db is per antenna; frame_par_db treats the whole time-domain
    frame as a single vector, so frame PAR times frame PINC equals
    (subcarriers * antennas) * peak_power / ls_power, which the tests
    audit against the independently recorded fields.
    """

    iteration: int
    par_db: np.ndarray
    frame_par_db: float
    pinc_db: float
    evm_residual: float
    oob_residual: float
    peak_power: float


@dataclass
class JppTrace:
    """Recorded trajectory of one joint-precoding run."""

    ls_power: float
    iterations: list[JppIterationStats] = field(default_factory=list)


def ls_precode(channel, symbols, used_mask):
    """Minimum-power precoder: x_w = H_w^H (H_w H_w^H)^{-1} s_w on used
    tones and exactly zero elsewhere."""
    used = np.flatnonzero(np.asarray(used_mask, dtype=bool))
    systems = _UsedToneSystems(channel.freq, used, symbols)
    antennas = channel.freq.shape[2]
    x = np.zeros((antennas, channel.freq.shape[0]), dtype=np.complex128)
    x[:, used] = systems.ls_columns().T
    return PrecodeFrame.from_freq(x)


def jpp_apm_precode(channel, symbols, scenario):
    """Joint precoding and peak reduction by alternating projections.

    Iterate 1 is the minimum-power frame. Each later iteration applies,
    in order: per-antenna time-domain peak projection with
    alpha = rho / subcarriers, a global scaling onto the power cap
    xi * ||T_ls||_F^2, and per-used-tone re-projection onto the solution
    sets with unused tones reassigned to zero. With k_max = 1 the output
    equals ls_precode.

    Returns:
        (PrecodeFrame, JppTrace) for the final recorded iterate.
    """
    used = scenario.used_indices
    systems = _UsedToneSystems(channel.freq, used, symbols)
    b = scenario.bs_antennas
    w = scenario.subcarriers

    x = np.zeros((b, w), dtype=np.complex128)
    x[:, used] = systems.ls_columns().T
    frame = PrecodeFrame.from_freq(x)
    t_ls = frame.t_time
    ls_power = float(np.sum(np.abs(t_ls) ** 2))
    if ls_power == 0.0:
        raise ValueError("minimum-power frame is zero; bounds are undefined")

    rho = min(10.0 ** (scenario.rho_db / 10.0), float(w))
    alpha = rho / w
    cap = 10.0 ** (scenario.xi_db / 10.0) * ls_power

    trace = JppTrace(ls_power=ls_power)

    def record(k, frame):
        trace.iterations.append(JppIterationStats(
            iteration=k,
            par_db=to_db(par_columns(frame.t_time)),
            frame_par_db=to_db(par(frame.t_time.ravel())),
            pinc_db=to_db(pinc_frobenius(frame.t_time, t_ls)),
            evm_residual=evm_residual(frame.x_freq, channel.freq, symbols,
                                      scenario.used_mask),
            oob_residual=oob_residual(frame.x_freq, scenario.used_mask),
            peak_power=float(np.max(np.abs(frame.t_time)) ** 2),
        ))

    record(1, frame)
    for k in range(2, scenario.k_max + 1):
        t = frame.t_time.copy()
        for antenna in range(b):
            t[:, antenna] = proj_par_only(alpha, t[:, antenna])
        t_power = float(np.sum(np.abs(t) ** 2))
        if t_power > cap:
            t *= math.sqrt(cap / t_power)
        spectrum = dft_unitary(t, axis=0)
        x = np.zeros((b, w), dtype=np.complex128)
        x[:, used] = systems.project_columns(spectrum[used]).T
        frame = PrecodeFrame.from_freq(x)
        record(k, frame)

    return frame, trace


def normalize_unit_power(frame):
    """Scale a frame to unit Frobenius norm (idempotent up to rounding)."""
    norm = float(np.linalg.norm(frame.x_freq))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero frame")
    return PrecodeFrame(x_freq=frame.x_freq / norm, t_time=frame.t_time / norm)

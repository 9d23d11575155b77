"""Projections used by the alternating-projections solver.

Two feasible sets are involved. The first is the affine solution set
{x : A x = y} of an underdetermined system, with Euclidean projection
through a cached Gram factorization. The second is the nonconvex set of
vectors whose peak-to-average power ratio is at most rho and whose power
is at most a cap P; its Euclidean projection has a closed form found by
sorting magnitudes once and searching for the set of entries that must
be clipped to a common peak.

The clipped-set search walks candidate sizes L = 1, 2, ... and accepts
the smallest L whose index set is unambiguous and satisfies

    max_{i not in I} |z_i|  <=  sqrt(alpha / (1 - alpha L)) ||z_{I^c}||_2
                            <   min_{i in I} |z_i|,

with alpha = rho / n. Entries in I are clipped to a common magnitude
sqrt(alpha P'), entries outside are scaled (or, when they are all zero,
filled with a constant magnitude), and a final global scaling enforces
the power cap. Every output keeps the input phases. The projection also
produces Lagrange multipliers for the clip and power constraints, so a
first-order optimality certificate can be checked at the output.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .linalg import (
    GramFactorization,
    as_complex_matrix,
    as_complex_vector,
    gram_factorize,
    gram_solve,
)
from .metrics import from_db

# Candidate set sizes with 1 - alpha L below this are rejected as
# numerically degenerate.
DEGENERATE_ATOL = 1e-12

# Relative slack on the clipped-set acceptance comparisons. At a fixed
# point of alternating projections every candidate size lies exactly on
# the acceptance boundary, so strict comparisons would reject all of
# them under rounding; the projection formula is continuous across those
# boundaries, making any slack-admitted size correct to within the slack.
SEARCH_RTOL = 1e-12


@dataclass(frozen=True)
class AffineSystem:
    """Underdetermined system A x = y with cached Gram factorization.

    x_ls is the minimum-power solution A^H (A A^H)^{-1} y.
    """

    a: np.ndarray
    y: np.ndarray
    gram: GramFactorization
    x_ls: np.ndarray

    @classmethod
    def from_matrix(cls, a, y):
        a = as_complex_matrix(a)
        y = as_complex_vector(y, "y")
        if y.shape[0] != a.shape[0]:
            raise ValueError(
                f"rhs length {y.shape[0]} does not match {a.shape[0]} rows"
            )
        gram = gram_factorize(a)
        x_ls = a.conj().T @ gram_solve(gram, y)
        return cls(a=a, y=y, gram=gram, x_ls=x_ls)

    @property
    def rows(self):
        return self.a.shape[0]

    @property
    def cols(self):
        return self.a.shape[1]


def proj_affine(system, z):
    """Euclidean projection of z onto the solution set of A x = y."""
    z = as_complex_vector(z, "z")
    if z.shape[0] != system.cols:
        raise ValueError(
            f"vector length {z.shape[0]} does not match {system.cols} columns"
        )
    resid = system.a @ z - system.y
    return z - system.a.conj().T @ gram_solve(system.gram, resid)


@dataclass(frozen=True)
class ParPincBounds:
    """Joint peak-to-average and power-cap constraint parameters.

    rho is the PAR bound in [1, dim], alpha = rho / dim the per-entry
    peak fraction, and power_cap the absolute power bound (may be inf).
    xi records the cap as a multiple of the reference power when the cap
    was derived that way (inf for a pure PAR constraint).
    """

    rho: float
    xi: float
    alpha: float
    power_cap: float
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be at least 1")
        if not 1.0 <= self.rho <= self.dim * (1.0 + 1e-12):
            raise ValueError(f"rho must lie in [1, {self.dim}], got {self.rho}")
        if not 0.0 < self.alpha <= 1.0 + 1e-12:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.xi >= 1.0:
            raise ValueError(f"xi must be at least 1, got {self.xi}")
        if not self.power_cap > 0.0:
            raise ValueError(f"power cap must be positive, got {self.power_cap}")

    @classmethod
    def from_linear(cls, rho, xi, dim, ref_power=1.0):
        """Bounds from linear ratios; power cap is xi times ref_power."""
        cap = xi * ref_power if math.isfinite(xi) else math.inf
        return cls(rho=float(rho), xi=float(xi), alpha=float(rho) / dim,
                   power_cap=cap, dim=int(dim))

    @classmethod
    def from_db(cls, rho_db, xi_db, dim, ref_power=1.0):
        """Bounds from dB ratios; power cap is 10^(xi_db/10) times ref_power."""
        return cls.from_linear(from_db(rho_db), from_db(xi_db), dim, ref_power)

    @classmethod
    def par_only(cls, rho, dim):
        """Pure PAR constraint with no power cap."""
        return cls(rho=float(rho), xi=math.inf, alpha=float(rho) / dim,
                   power_cap=math.inf, dim=int(dim))

    def without_power_cap(self):
        return replace(self, xi=math.inf, power_cap=math.inf)


@dataclass(frozen=True)
class KktWorkspace:
    """First-order optimality data produced by proj_par_power.

    u are the per-entry clip multipliers (positive exactly on the clipped
    set), v the power-cap multiplier, t = 1 - alpha * sum(u) the scaling
    term entering stationarity, and out_power the squared norm of the
    output. beta/gamma are the magnitude ratios used by the scaled-tail
    case and epsilon the constant fill magnitude of the zero-tail case.
    """

    indices: np.ndarray
    size: int
    u: np.ndarray
    v: float
    t: float
    out_power: float
    case: str
    beta: np.ndarray | None = None
    gamma: np.ndarray | None = None
    epsilon: float | None = None


@dataclass(frozen=True)
class KktResiduals:
    """Residuals of the optimality conditions at a projection output."""

    stationarity: float
    clip_slackness: float
    power_slackness: float
    par_violation: float
    power_violation: float
    min_clip_multiplier: float
    power_multiplier: float


def proj_power_ball(power_cap, x):
    """Euclidean projection onto {x : ||x||_2^2 <= power_cap}."""
    x = as_complex_vector(x)
    if not power_cap > 0.0:
        raise ValueError(f"power cap must be positive, got {power_cap}")
    power = float(np.sum(np.abs(x) ** 2))
    if power <= power_cap:
        return x.copy()
    return x * math.sqrt(power_cap / power)


def determine_index_set(z, alpha):
    """Find the clipped index set for the peak-constrained projection.

    Returns (indices, L) where indices are the positions of the L
    largest-magnitude entries, sorted ascending. Returns an empty set and
    L = 0 when z already satisfies the peak constraint. Tied magnitudes
    need no special casing: a size that splits a tied run fails the
    acceptance check, while the size closing the run passes it. The
    comparisons carry SEARCH_RTOL relative slack so boundary cases
    (iterates of an alternating-projections loop near its fixed point)
    resolve instead of exhausting. A candidate is skipped only when
    1 - alpha L is below DEGENERATE_ATOL, where the clip level is
    numerically undefined.

    Raises:
        ValueError: when no candidate size is admissible.
    """
    z = as_complex_vector(z, "z")
    mags = np.abs(z)
    found = _search_clip_set(mags, float(alpha))
    if found is None:
        return np.array([], dtype=np.intp), 0
    order, length, _, _ = found
    return np.sort(order[:length]), length


def _search_clip_set(mags, alpha):
    """Shared clipped-set search on a magnitude vector.

    Returns None when the peak constraint already holds, otherwise a
    tuple (descending_order, L, head_l1, tail_norm).
    """
    n = mags.shape[0]
    power = float(np.sum(mags**2))
    if power == 0.0:
        return None
    peak_sq = float(np.max(mags)) ** 2
    if peak_sq <= alpha * power * (1.0 + SEARCH_RTOL):
        return None
    order = np.argsort(-mags, kind="stable")
    sm = mags[order]
    head_l1 = np.cumsum(sm)
    # Reversed cumulative sum avoids cancellation in small tail powers.
    tail_sq = np.concatenate((np.cumsum((sm**2)[::-1])[::-1][1:], [0.0]))
    l_max = min(n, int(math.floor(1.0 / alpha + 1e-9)))
    for length in range(1, l_max + 1):
        room = 1.0 - alpha * length
        if room < DEGENERATE_ATOL:
            continue
        tail_norm = math.sqrt(max(tail_sq[length - 1], 0.0))
        bound = math.sqrt(alpha / room) * tail_norm
        tail_max = sm[length] if length < n else 0.0
        if (tail_max <= bound * (1.0 + SEARCH_RTOL)
                and bound < sm[length - 1] * (1.0 + SEARCH_RTOL)):
            return order, length, float(head_l1[length - 1]), tail_norm
    raise ValueError(
        "no admissible clipped set size; magnitudes are too degenerate"
    )


def proj_par_power(bounds, z, return_workspace=False):
    """Euclidean projection onto the joint PAR / power-cap set.

    Projects z onto {x : max_i |x_i|^2 <= alpha ||x||_2^2,
    ||x||_2^2 <= power_cap} with alpha = rho / n. Output phases match the
    input phases wherever z_i is nonzero. Cost is one magnitude sort,
    O(n log n).

    Args:
        bounds: ParPincBounds with dim equal to len(z).
        z: complex vector to project.
        return_workspace: also return the KktWorkspace of the output.

    Returns:
        The projected vector, or (vector, KktWorkspace).
    """
    z = as_complex_vector(z, "z")
    n = z.shape[0]
    if n != bounds.dim:
        raise ValueError(f"vector length {n} does not match bounds.dim {bounds.dim}")
    alpha = bounds.alpha
    cap = bounds.power_cap

    mags = np.abs(z)
    power = float(np.sum(mags**2))
    zero_u = np.zeros(n, dtype=np.float64)

    if power == 0.0:
        ws = KktWorkspace(indices=np.array([], dtype=np.intp), size=0,
                          u=zero_u, v=0.0, t=1.0, out_power=0.0, case="zero")
        return (z.copy(), ws) if return_workspace else z.copy()

    # A PAR bound of n constrains nothing; only the power cap acts.
    if alpha >= 1.0 - 1e-15:
        x, v, out_power = _apply_power_cap(z, power, cap)
        ws = KktWorkspace(indices=np.array([], dtype=np.intp), size=0,
                          u=zero_u, v=v, t=1.0, out_power=out_power,
                          case="power-only")
        return (x, ws) if return_workspace else x

    found = _search_clip_set(mags, alpha)
    if found is None:
        # Peak constraint already satisfied: keep the magnitude profile.
        x, v, out_power = _apply_power_cap(z, power, cap)
        ws = KktWorkspace(indices=np.array([], dtype=np.intp), size=0,
                          u=zero_u, v=v, t=1.0, out_power=out_power,
                          case="feasible")
        return (x, ws) if return_workspace else x

    order, length, head_l1, tail_norm = found
    head = order[:length]
    tail = order[length:]
    room = 1.0 - alpha * length
    x = np.empty(n, dtype=np.complex128)
    u = zero_u

    if tail_norm == 0.0:
        # All unclipped entries of z vanish: fill them with a constant
        # magnitude so the clip constraint is tight with zero slack.
        p_unscaled = alpha * head_l1**2
        out_power = min(p_unscaled, cap)
        clip_mag = math.sqrt(alpha * out_power)
        x[head] = clip_mag * (z[head] / mags[head])
        epsilon = 0.0
        if length < n:
            epsilon = math.sqrt(room * out_power / (n - length))
            x[tail] = epsilon
        v = max(math.sqrt(alpha / cap) * head_l1 - 1.0, 0.0) if math.isfinite(cap) else 0.0
        u[head] = (v + 1.0) * mags[head] / (alpha * head_l1)
        ws = KktWorkspace(indices=np.sort(head), size=length, u=u, v=v,
                          t=-v, out_power=out_power, case="zero-tail",
                          epsilon=epsilon)
    else:
        p_unscaled = (math.sqrt(room) * tail_norm + math.sqrt(alpha) * head_l1) ** 2
        out_power = min(p_unscaled, cap)
        clip_mag = math.sqrt(alpha * out_power)
        x[head] = clip_mag * (z[head] / mags[head])
        x[tail] = (math.sqrt(room * out_power) / tail_norm) * z[tail]
        v = max(math.sqrt(p_unscaled / cap) - 1.0, 0.0) if math.isfinite(cap) else 0.0
        vt = tail_norm / math.sqrt(room * out_power)
        u[head] = mags[head] / clip_mag - vt
        beta = math.sqrt(room) * mags[head] / (math.sqrt(alpha) * tail_norm)
        gamma = head_l1 / mags[head]
        ws = KktWorkspace(indices=np.sort(head), size=length, u=u, v=v,
                          t=vt - v, out_power=out_power, case="scaled-tail",
                          beta=beta, gamma=gamma)

    return (x, ws) if return_workspace else x


def _apply_power_cap(z, power, cap):
    """Scale z onto the power ball, returning (x, v multiplier, out power)."""
    if not math.isfinite(cap) or power <= cap:
        return z.copy(), 0.0, power
    scale = math.sqrt(cap / power)
    return z * scale, math.sqrt(power / cap) - 1.0, cap


def proj_par_only(alpha, z):
    """Projection onto the pure PAR constraint set (no power cap).

    Positively homogeneous: proj(c z) = c proj(z) for c > 0.
    """
    z = as_complex_vector(z, "z")
    bounds = ParPincBounds(rho=alpha * z.shape[0], xi=math.inf, alpha=float(alpha),
                           power_cap=math.inf, dim=z.shape[0])
    return proj_par_power(bounds, z)


def kkt_certificate(bounds, z, x, workspace):
    """Residuals of the first-order optimality conditions at x.

    Checks stationarity (u_i + v + t) x_i = z_i with the definitional
    t = 1 - alpha * sum(u), complementary slackness of the clip and power
    multipliers, primal feasibility, and dual feasibility.
    """
    z = as_complex_vector(z, "z")
    x = as_complex_vector(x, "x")
    alpha = bounds.alpha
    cap = bounds.power_cap
    u = workspace.u
    v = workspace.v

    t_def = 1.0 - alpha * float(np.sum(u))
    stationarity = float(np.max(np.abs((u + v + t_def) * x - z)))

    out_sq = np.abs(x) ** 2
    out_power = float(np.sum(out_sq))
    clip_slack = float(np.max(np.abs(u * (out_sq - alpha * out_power))))
    if math.isfinite(cap):
        power_slack = abs(v * (out_power - cap))
        power_violation = max(out_power - cap, 0.0)
    else:
        power_slack = 0.0 if v == 0.0 else math.inf
        power_violation = 0.0
    par_violation = max(float(np.max(out_sq)) - alpha * out_power, 0.0)

    return KktResiduals(
        stationarity=stationarity,
        clip_slackness=clip_slack,
        power_slackness=power_slack,
        par_violation=par_violation,
        power_violation=power_violation,
        min_clip_multiplier=float(np.min(u)) if u.size else 0.0,
        power_multiplier=v,
    )

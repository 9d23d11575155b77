"""Alternating projections between an affine solution set and the
peak/power-bounded set.

Starting from the minimum-power solution, each iteration projects the
current iterate onto the peak/power-bounded set and then back onto the
solution set of A x = y, so every recorded iterate solves the system
exactly (up to numerical residue) while its peak-to-average ratio is
driven toward the bound. The iteration count is fixed; there is no
convergence test.
"""

from dataclasses import dataclass, field

import numpy as np

from .metrics import TradeoffPoint, par, pinc, to_db
from .projections import ParPincBounds, proj_affine, proj_par_power


@dataclass(frozen=True)
class ApmConfig:
    """Run parameters: dB bounds, iteration budget, trace switch."""

    rho_db: float
    xi_db: float
    k_max: int
    record_trace: bool = True

    def __post_init__(self):
        if self.rho_db < 0.0:
            raise ValueError("rho_db must be nonnegative")
        if self.xi_db < 0.0:
            raise ValueError("xi_db must be nonnegative")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")


@dataclass
class ApmTrace:
    """Recorded trajectory of one solver run."""

    ls_power: float
    points: list[TradeoffPoint] = field(default_factory=list)
    final_par_db: float = 0.0
    final_pinc_db: float = 0.0
    final_residual: float = 0.0


def apm_solve(system, config):
    """Run the alternating-projections solver on an AffineSystem.

    Iterate 1 is the minimum-power solution itself; iterates k >= 2 are
    proj_affine(proj_par_power(previous)). A PAR bound above the vector
    length is equivalent to the vector length (the constraint is vacuous
    there).

    Returns:
        (x, ApmTrace) where x is the final iterate.
    """
    x_ls = system.x_ls
    n = x_ls.shape[0]
    ls_power = float(np.sum(np.abs(x_ls) ** 2))
    if ls_power == 0.0:
        raise ValueError("minimum-power solution is zero; bounds are undefined")
    rho = min(10.0 ** (config.rho_db / 10.0), float(n))
    xi = 10.0 ** (config.xi_db / 10.0)
    bounds = ParPincBounds.from_linear(rho, xi, n, ls_power)

    y_norm = float(np.linalg.norm(system.y))
    trace = ApmTrace(ls_power=ls_power)

    def record(k, x):
        par_lin = par(x)
        pinc_lin = pinc(x, x_ls)
        resid = float(np.linalg.norm(system.a @ x - system.y)) / y_norm
        point = TradeoffPoint(
            iteration=k,
            par_db=to_db(par_lin),
            pinc_db=to_db(pinc_lin),
            peak_power=float(np.max(np.abs(x)) ** 2),
            residual=resid,
        )
        if config.record_trace:
            trace.points.append(point)
        return point

    x = x_ls
    point = record(1, x)
    for k in range(2, config.k_max + 1):
        x = proj_affine(system, proj_par_power(bounds, x))
        point = record(k, x)

    trace.final_par_db = point.par_db
    trace.final_pinc_db = point.pinc_db
    trace.final_residual = point.residual
    return x, trace

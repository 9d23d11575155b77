"""Low peak-to-average-power solutions of underdetermined systems by
alternating projections, with a multi-user MIMO-OFDM precoding harness."""

__version__ = "0.1.0"

from .apm import ApmConfig, ApmTrace, apm_solve
from .linalg import (
    GramFactorization,
    RankDeficiencyError,
    dft_unitary,
    gram_factorize,
    gram_solve,
    idft_unitary,
)
from .metrics import (
    CcdfCurve,
    TradeoffPoint,
    ccdf_percentile,
    evm_residual,
    from_db,
    oob_residual,
    par,
    par_columns,
    pinc,
    pinc_frobenius,
    to_db,
)
from .ofdm import (
    ChannelRealization,
    JppIterationStats,
    JppTrace,
    OfdmScenario,
    PrecodeFrame,
    default_used_mask,
    draw_symbols,
    generate_channel,
    jpp_apm_precode,
    ls_precode,
    normalize_unit_power,
    qam16,
)
from .projections import (
    AffineSystem,
    KktResiduals,
    KktWorkspace,
    ParPincBounds,
    determine_index_set,
    kkt_certificate,
    proj_affine,
    proj_par_only,
    proj_par_power,
    proj_power_ball,
)

__all__ = [
    "__version__",
    "ApmConfig", "ApmTrace", "apm_solve",
    "GramFactorization", "RankDeficiencyError",
    "dft_unitary", "gram_factorize", "gram_solve", "idft_unitary",
    "CcdfCurve", "TradeoffPoint", "ccdf_percentile", "evm_residual",
    "from_db", "oob_residual", "par", "par_columns", "pinc",
    "pinc_frobenius", "to_db",
    "ChannelRealization", "JppIterationStats", "JppTrace", "OfdmScenario",
    "PrecodeFrame", "default_used_mask", "draw_symbols", "generate_channel",
    "jpp_apm_precode", "ls_precode", "normalize_unit_power", "qam16",
    "AffineSystem", "KktResiduals", "KktWorkspace", "ParPincBounds",
    "determine_index_set", "kkt_certificate", "proj_affine", "proj_par_only",
    "proj_par_power", "proj_power_ball",
]

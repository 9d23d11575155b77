"""Command-line entry points.

Subcommands: gaussian-demo (dense random-system trade-off run), ofdm-sim
(downlink precoding experiment), and project (single-vector projection
debug tool with an optimality certificate). Flags override values from
an optional flat key=value config file.
"""

import argparse
import math
import os
import sys

import numpy as np

from .harness import (
    GaussianDemoConfig,
    emit_ccdf_csv,
    emit_csv,
    emit_percentiles_csv,
    run_gaussian_demo,
    run_ofdm_experiment,
    write_manifest,
)
from .metrics import par, to_db
from .ofdm import OfdmScenario
from .projections import ParPincBounds, kkt_certificate, proj_par_power


def _read_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _resolve(args, file_cfg, name, default, convert):
    """Flag value if given, else config-file value, else default."""
    flag = getattr(args, name)
    if flag is not None:
        return flag
    if name in file_cfg:
        return convert(file_cfg[name])
    return default


def _read_mask_file(path, subcarriers):
    """Used-tone indices, one per line; '#' starts a comment."""
    mask = np.zeros(subcarriers, dtype=bool)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            idx = int(line)
            if not 0 <= idx < subcarriers:
                raise ValueError(
                    f"{path}:{line_no}: tone index {idx} outside [0, {subcarriers})"
                )
            mask[idx] = True
    if not mask.any():
        raise ValueError(f"{path}: mask selects no tones")
    return mask


def _read_vector_file(path):
    """Complex vector, one entry per line: 'a+bj' or 're im'."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if len(parts) == 2:
                    entries.append(complex(float(parts[0]), float(parts[1])))
                else:
                    entries.append(complex(line.replace(" ", "")))
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: cannot parse {line!r}") from exc
    if not entries:
        raise ValueError(f"{path}: no vector entries found")
    return np.array(entries, dtype=np.complex128)


def _add_common_flags(sub):
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--seed", type=int, default=None, help="master seed")
    sub.add_argument("--rho-db", dest="rho_db", type=float, default=None,
                     help="PAR bound in dB")
    sub.add_argument("--xi-db", dest="xi_db", type=float, default=None,
                     help="power-increase bound in dB")
    sub.add_argument("--iters", type=int, default=None,
                     help="iteration budget")
    sub.add_argument("--trials", type=int, default=None,
                     help="independent trials")
    sub.add_argument("--out", default=None, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lowpar",
        description="Low peak-to-average-power precoding experiments",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    demo = subs.add_parser("gaussian-demo",
                           help="dense random-system trade-off run")
    _add_common_flags(demo)
    demo.add_argument("--rows", type=int, default=None,
                      help="number of equations")
    demo.add_argument("--cols", type=int, default=None,
                      help="number of unknowns")

    ofdm = subs.add_parser("ofdm-sim", help="downlink precoding experiment")
    _add_common_flags(ofdm)
    ofdm.add_argument("--bs-antennas", dest="bs_antennas", type=int,
                      default=None, help="base-station antennas")
    ofdm.add_argument("--users", type=int, default=None,
                      help="single-antenna users")
    ofdm.add_argument("--subcarriers", type=int, default=None,
                      help="OFDM tones")
    ofdm.add_argument("--taps", type=int, default=None, help="channel taps")
    ofdm.add_argument("--mask-file", dest="mask_file", default=None,
                      help="file of used tone indices, one per line")
    ofdm.add_argument("--ccdf-iter", dest="ccdf_iter", type=int, default=None,
                      help="iteration whose CCDF samples are emitted")
    ofdm.add_argument("--workers", type=int, default=None,
                      help="process-pool size")

    proj = subs.add_parser("project",
                           help="project one vector and print a certificate")
    proj.add_argument("vector_file", help="file with one complex entry per line")
    proj.add_argument("--rho-db", dest="rho_db", type=float, required=True,
                      help="PAR bound in dB")
    proj.add_argument("--xi-db", dest="xi_db", type=float, default=None,
                      help="power cap in dB over the reference power")
    proj.add_argument("--ref-power", dest="ref_power", type=float, default=None,
                      help="reference power (default: input power)")
    return parser


def _cmd_gaussian_demo(args):
    file_cfg = _read_config_file(args.config) if args.config else {}
    config = GaussianDemoConfig(
        rows=_resolve(args, file_cfg, "rows", 100, int),
        cols=_resolve(args, file_cfg, "cols", 200, int),
        rho_db=_resolve(args, file_cfg, "rho_db", 0.4, float),
        xi_db=_resolve(args, file_cfg, "xi_db", 1.6, float),
        iters=_resolve(args, file_cfg, "iters", 500, int),
        trials=_resolve(args, file_cfg, "trials", 1, int),
        seed=_resolve(args, file_cfg, "seed", 1, int),
    )
    out_dir = _resolve(args, file_cfg, "out", "out", str)
    os.makedirs(out_dir, exist_ok=True)

    rows, manifest, traces = run_gaussian_demo(config)
    emit_csv(rows, os.path.join(out_dir, "trajectory.csv"))
    write_manifest(os.path.join(out_dir, "manifest.txt"), manifest)
    final = traces[-1]
    print(f"gaussian-demo: {config.trials} trial(s), {config.iters} iterations")
    print(f"final PAR {final.final_par_db:.4f} dB, "
          f"PINC {final.final_pinc_db:.4f} dB, "
          f"residual {final.final_residual:.3e}")
    print(f"wrote {out_dir}/trajectory.csv and {out_dir}/manifest.txt")
    return 0


def _cmd_ofdm_sim(args):
    file_cfg = _read_config_file(args.config) if args.config else {}
    subcarriers = _resolve(args, file_cfg, "subcarriers", 2048, int)
    mask_file = _resolve(args, file_cfg, "mask_file", None, str)
    mask = _read_mask_file(mask_file, subcarriers) if mask_file else None
    scenario = OfdmScenario(
        bs_antennas=_resolve(args, file_cfg, "bs_antennas", 128, int),
        users=_resolve(args, file_cfg, "users", 16, int),
        subcarriers=subcarriers,
        taps=_resolve(args, file_cfg, "taps", 4, int),
        trials=_resolve(args, file_cfg, "trials", 100, int),
        seed=_resolve(args, file_cfg, "seed", 1, int),
        k_max=_resolve(args, file_cfg, "iters", 5, int),
        rho_db=_resolve(args, file_cfg, "rho_db", 3.0, float),
        xi_db=_resolve(args, file_cfg, "xi_db", 0.3, float),
        used_mask=mask,
    )
    workers = _resolve(args, file_cfg, "workers", 1, int)
    ccdf_iter = _resolve(args, file_cfg, "ccdf_iter", None, int)
    out_dir = _resolve(args, file_cfg, "out", "out", str)
    os.makedirs(out_dir, exist_ok=True)

    result = run_ofdm_experiment(scenario, workers=workers,
                                 ccdf_iteration=ccdf_iter)
    result.manifest["mask_file"] = mask_file or "default-symmetric"
    result.manifest["workers"] = workers
    emit_csv(result.rows, os.path.join(out_dir, "trajectory.csv"))
    emit_ccdf_csv(result.ccdf_rows, os.path.join(out_dir, "ccdf.csv"))
    emit_percentiles_csv(result.percentile_rows,
                         os.path.join(out_dir, "percentiles.csv"))
    write_manifest(os.path.join(out_dir, "manifest.txt"), result.manifest)

    print(f"ofdm-sim: {scenario.trials} trial(s), k_max {scenario.k_max}, "
          f"{workers} worker(s)")
    for iteration, metric, target, value in result.percentile_rows:
        print(f"iter {iteration}: {metric} p{100 * target:g} = {value:.4f} dB")
    print(f"wrote trajectory.csv, ccdf.csv, percentiles.csv, manifest.txt "
          f"in {out_dir}/")
    return 0


def _cmd_project(args):
    z = _read_vector_file(args.vector_file)
    n = z.shape[0]
    rho = min(10.0 ** (args.rho_db / 10.0), float(n))
    if args.xi_db is None:
        bounds = ParPincBounds.par_only(rho, n)
    else:
        power = float(np.sum(np.abs(z) ** 2))
        ref = args.ref_power if args.ref_power is not None else power
        xi = 10.0 ** (args.xi_db / 10.0)
        bounds = ParPincBounds.from_linear(rho, xi, n, ref)
    out, ws = proj_par_power(bounds, z, return_workspace=True)
    cert = kkt_certificate(bounds, z, out, ws)

    print(f"length {n}, rho {bounds.rho:.6g} (alpha {bounds.alpha:.6g}), "
          f"power cap {bounds.power_cap:.6g}")
    print(f"input PAR {to_db(par(z)):.4f} dB -> output PAR "
          f"{to_db(par(out)):.4f} dB")
    print(f"case {ws.case}, clipped entries {ws.size}, "
          f"output power {ws.out_power:.6g}")
    if ws.size:
        print(f"clipped indices {ws.indices.tolist()}")
    print(f"multipliers: v {ws.v + 0.0:.6g}, t {ws.t + 0.0:.6g}, "
          f"max u {float(np.max(ws.u)):.6g}")
    print("certificate residuals:")
    print(f"  stationarity     {cert.stationarity:.3e}")
    print(f"  clip slackness   {cert.clip_slackness:.3e}")
    print(f"  power slackness  {cert.power_slackness:.3e}")
    print(f"  PAR violation    {cert.par_violation:.3e}")
    print(f"  power violation  {cert.power_violation:.3e}")
    print(f"  min clip mult.   {cert.min_clip_multiplier:.3e}")
    print("projection:")
    for value in out:
        print(f"  {value.real:+.12e} {value.imag:+.12e}j")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {
        "gaussian-demo": _cmd_gaussian_demo,
        "ofdm-sim": _cmd_ofdm_sim,
        "project": _cmd_project,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

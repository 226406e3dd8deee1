""" Command line runner of rate-versus-threshold sweeps ::

    underlay-sweep --mt 2 --mr 2 --samples 100000 --out results/2x2.csv
    underlay-sweep --mt 5 --mr 5 --q-scale lin --policies EBPP,FIXED --reporter tqdm

Exit codes: 0 on success, 1 on usage errors, 2 on I/O errors, 3 if any calibration failed.
"""

import argparse
import sys
from typing import List, Optional

from underlay.liblog import get_logger, set_verb_level
from .channel import SystemConfig
from .policies import PolicyKind
from .reporters import get_reporter
from .sweep import SweepSpec, default_q_range, q_values, run_sweep, write_csv
from .utils._vocabulary import DEFAULT_REL_TOL, EXIT_CALIBRATION, EXIT_IO, EXIT_OK, EXIT_USAGE

__all__ = ["main", "build_parser", "spec_from_args"]

logger = get_logger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _policies(value: str) -> List[PolicyKind]:
    try:
        return [PolicyKind.parse(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def build_parser() -> argparse.ArgumentParser:
    p = _ArgumentParser(prog="underlay-sweep",
                        description="Ergodic rate of limited feedback power policies of an underlay cognitive MIMO "
                                    "link against the average interference threshold")
    p.add_argument("--mt", type=int, default=2, help="transmit antennas")
    p.add_argument("--mr", type=int, default=2, help="receive antennas")
    p.add_argument("--n0", type=float, default=1.0, help="noise power")
    p.add_argument("--pmax", type=float, default=10.0, help="peak per-antenna power")
    p.add_argument("--sigma-h-sq", type=float, default=1.0, help="per-entry variance of the secondary channel")
    p.add_argument("--sigma-sp-sq", type=float, default=1.0, help="per-entry variance of the interference channel")
    p.add_argument("--q-min", type=float, default=None, help="smallest threshold, 0.05 * eta_bar * pmax by default")
    p.add_argument("--q-max", type=float, default=None, help="largest threshold, 1.5 * eta_bar * pmax by default")
    p.add_argument("--q-steps", type=int, default=25)
    p.add_argument("--q-scale", choices=("lin", "log"), default="log")
    p.add_argument("--policies", type=_policies, default=list(PolicyKind),
                   help="comma separated subset of " + ",".join(k.value for k in PolicyKind))
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--eval-holdout", type=int, default=None, metavar="SEED",
                   help="evaluate on a second sample set drawn from SEED")
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--reporter", choices=("logger", "tqdm", "tensorboard", "none"), default="logger")
    p.add_argument("--log-dir", default="runs", help="tensorboard event directory")
    p.add_argument("--verbosity", choices=("debug", "info", "warning", "error"), default="info")
    return p


def spec_from_args(args: argparse.Namespace) -> SweepSpec:
    config = SystemConfig(m_t=args.mt, m_r=args.mr, n0=args.n0, p_max=args.pmax,
                          sigma_h_sq=args.sigma_h_sq, sigma_sp_sq=args.sigma_sp_sq)
    q_min, q_max = default_q_range(config)
    q_min = q_min if args.q_min is None else args.q_min
    q_max = q_max if args.q_max is None else args.q_max
    return SweepSpec(config=config,
                     q_values=q_values(q_min, q_max, args.q_steps, args.q_scale),
                     policies=tuple(args.policies),
                     n=args.samples,
                     seed=args.seed,
                     output_path=args.out,
                     rel_tol=args.rel_tol,
                     holdout_seed=args.eval_holdout,
                     workers=args.workers)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    set_verb_level(args.verbosity)
    try:
        spec = spec_from_args(args)
    except ValueError as e:
        parser.error(str(e))

    names = [] if args.reporter == "none" else [args.reporter]
    try:
        reporter = get_reporter(names, spec.num_cells, args.log_dir)
    except OSError as e:
        logger.error(f"cannot open reporter {args.reporter} at {args.log_dir}: {e}")
        return EXIT_IO
    with reporter:
        rows = run_sweep(spec, reporter)

    try:
        write_csv(rows, spec.output_path)
    except OSError as e:
        logger.error(f"cannot write {spec.output_path}: {e}")
        return EXIT_IO

    failed = [r for r in rows if r.error is not None]
    if len(failed) > 0:
        logger.error(f"{len(failed)} of {len(rows)} cells failed to calibrate")
        return EXIT_CALIBRATION
    return EXIT_OK

""" Choice of the Lagrange multiplier so that the empirical average interference over a SampleSet equals `q`.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import torch

from underlay.liblog import get_logger
from .channel import SampleSet, SystemConfig
from .policies import CalibratedPolicy, PolicyKind, policy_powers, saturation_check
from .utils._vocabulary import DEFAULT_REL_TOL, MAX_BISECTIONS, MAX_BRACKET_STEPS
from .utils.reproducibility import deterministic_sum

__all__ = ["CalibrationError", "CalibrationReport",
           "interference_terms", "average_interference", "calibrate_lambda", "calibrate_policy"]

logger = get_logger(__name__)


class CalibrationError(RuntimeError):
    """ No multiplier brackets the interference threshold, e.g. every `eta` of the set is 0.
    """


@dataclass(frozen=True)
class CalibrationReport(object):
    """ Outcome of `calibrate_lambda`.

    :param lambda_star: calibrated multiplier
    :param achieved_interference: empirical average interference at `lambda_star`
    :param iterations: number of interference evaluations, bracketing included
    :param bracket: final `(lambda_lo, lambda_hi)`
    :param tolerance_met: whether `|achieved_interference - q| <= rel_tol * q`
    """

    lambda_star: float
    achieved_interference: float
    iterations: int
    bracket: Tuple[float, float]
    tolerance_met: bool


def check_compatible(samples: SampleSet, config: SystemConfig) -> None:
    if not config.same_link(samples.config):
        raise ValueError(f"SampleSet was drawn for a {samples.config.m_r}x{samples.config.m_t} link, "
                         f"but the config describes {config.m_r}x{config.m_t}")


def interference_terms(kind: PolicyKind, powers: torch.Tensor, samples: SampleSet,
                       config: SystemConfig) -> torch.Tensor:
    """ Per-sample interference `eta_j P_j` for the policies that know `eta`, `eta_bar P_j` for the others.
    """

    if PolicyKind.parse(kind).uses_instantaneous_eta:
        return samples.eta * powers
    return config.eta_bar * powers


def average_interference(kind: PolicyKind,
                         lam: float,
                         samples: SampleSet,
                         config: SystemConfig) -> float:
    """ Empirical average interference of policy `kind` with multiplier `lam`: `mean(eta_j P_j)` for EBPP and MEBPP,
    `eta_bar * mean(P_j)` for IEBPP and IMEBPP. Non-increasing in `lam`.
    """

    kind = PolicyKind.parse(kind)
    check_compatible(samples, config)
    powers = policy_powers(kind, samples.eigs, samples.eta, lam, config)
    if kind.uses_instantaneous_eta:
        return deterministic_sum(samples.eta * powers) / samples.n
    return config.eta_bar * (deterministic_sum(powers) / samples.n)


class _Evaluator(object):
    # counts evaluations of the interference curve

    def __init__(self, kind: PolicyKind, samples: SampleSet, config: SystemConfig):
        self.kind = kind
        self.samples = samples
        self.config = config
        self.count = 0

    def __call__(self, lam: float) -> float:
        self.count += 1
        return average_interference(self.kind, lam, self.samples, self.config)


def calibrate_lambda(kind: PolicyKind,
                     samples: SampleSet,
                     config: SystemConfig,
                     rel_tol: float = DEFAULT_REL_TOL) -> CalibrationReport:
    """ Find the multiplier meeting the interference threshold within `rel_tol`. The bracket starts at
    `lambda_hi = 1`, doubled until the interference drops below `q`, and `lambda_lo = lambda_hi / 2`, halved until the
    interference exceeds `q`; then the bracket is bisected ::

        >>> report = calibrate_lambda(PolicyKind.EBPP, samples, config)
        >>> policy = CalibratedPolicy(PolicyKind.EBPP, report.lambda_star, False, config)

    If bisection cannot meet the tolerance, e.g. across a jump of the empirical curve, the multiplier on the
    feasible side is returned with `tolerance_met=False`.
    """

    kind = PolicyKind.parse(kind)
    if not kind.is_optimized:
        raise ValueError(f"{kind} has no multiplier to calibrate")
    if saturation_check(config):
        raise ValueError(f"eta_bar * p_max = {config.eta_bar * config.p_max} <= q = {config.q}: "
                         f"the policy is saturated and needs no calibration")
    if not rel_tol > 0:
        raise ValueError(f"rel_tol should be positive, but got {rel_tol}")
    check_compatible(samples, config)

    q = config.threshold
    tolerance = rel_tol * q
    interference = _Evaluator(kind, samples, config)

    def report(lam: float, achieved: float, bracket: Tuple[float, float], met: bool) -> CalibrationReport:
        logger.debug(f"{kind}: lambda={lam:.6g}, interference={achieved:.6g} (q={q:.6g}) "
                     f"after {interference.count} evaluations")
        return CalibrationReport(lam, achieved, interference.count, bracket, met)

    lam_hi = 1.0
    u_hi = interference(lam_hi)
    for _ in range(MAX_BRACKET_STEPS):
        if u_hi < q:
            break
        if u_hi - q <= tolerance:
            return report(lam_hi, u_hi, (lam_hi, lam_hi), True)
        lam_hi *= 2
        u_hi = interference(lam_hi)
    else:
        raise CalibrationError(f"{kind}: interference stays above q={q} up to lambda={lam_hi}")
    if q - u_hi <= tolerance:
        return report(lam_hi, u_hi, (lam_hi, lam_hi), True)

    lam_lo = lam_hi / 2
    u_lo = interference(lam_lo)
    for _ in range(MAX_BRACKET_STEPS):
        if u_lo > q:
            break
        if q - u_lo <= tolerance:
            return report(lam_lo, u_lo, (lam_lo, lam_lo), True)
        lam_hi, u_hi = lam_lo, u_lo
        lam_lo /= 2
        u_lo = interference(lam_lo)
    else:
        raise CalibrationError(f"{kind}: interference stays below q={q} down to lambda={lam_lo}, "
                               f"the sample set may be degenerate")
    logger.debug(f"{kind}: bracket [{lam_lo:.6g}, {lam_hi:.6g}]")

    for _ in range(MAX_BISECTIONS):
        lam_mid = (lam_lo + lam_hi) / 2
        if not lam_lo < lam_mid < lam_hi:
            break
        u_mid = interference(lam_mid)
        if abs(u_mid - q) <= tolerance:
            return report(lam_mid, u_mid, (lam_lo, lam_hi), True)
        if u_mid > q:
            lam_lo = lam_mid
        else:
            lam_hi, u_hi = lam_mid, u_mid

    logger.warning(f"{kind}: interference {u_hi:.6g} misses q={q:.6g} by more than rel_tol={rel_tol}, "
                   f"keeping the feasible multiplier {lam_hi:.6g}")
    return report(lam_hi, u_hi, (lam_lo, lam_hi), False)


def calibrate_policy(kind: PolicyKind,
                     samples: SampleSet,
                     config: SystemConfig,
                     rel_tol: float = DEFAULT_REL_TOL) -> Tuple[CalibratedPolicy, Optional[CalibrationReport]]:
    """ Calibrated policy for `kind`: saturated and FIXED policies come without multiplier and report.
    """

    kind = PolicyKind.parse(kind)
    if not kind.is_optimized or saturation_check(config):
        logger.debug(f"{kind}: no calibration needed (saturated={saturation_check(config)})")
        return CalibratedPolicy.uncalibrated(kind, config), None
    report = calibrate_lambda(kind, samples, config, rel_tol)
    return CalibratedPolicy(kind, report.lambda_star, False, config), report

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Union

import torch

from underlay.liblog import get_logger
from .calibration import interference_terms
from .channel import SampleSet, SystemConfig
from .policies import CalibratedPolicy, PolicyKind
from .utils.reproducibility import mean_and_stderr

__all__ = ["EvaluationResult", "instantaneous_rate", "instantaneous_rate_nats", "evaluate_policy",
           "rate_ordering_check"]

logger = get_logger(__name__)

_LN2 = math.log(2)

# (higher, lower) pairs implied by nested feasible sets
_ORDERINGS = ((PolicyKind.EBPP, PolicyKind.MEBPP),
              (PolicyKind.EBPP, PolicyKind.IEBPP),
              (PolicyKind.MEBPP, PolicyKind.IMEBPP),
              (PolicyKind.IEBPP, PolicyKind.FIXED))


@dataclass(frozen=True)
class EvaluationResult(object):
    """ Monte Carlo estimates of a calibrated policy on a SampleSet. Rates are in bits/s/Hz, interference in watts,
    standard errors are sample standard deviations over sqrt(n).
    """

    kind: PolicyKind
    lam: float
    q: float
    n: int
    seed: int
    saturated: bool
    rate_bits: float
    rate_stderr: float
    rate_nats: float
    interference: float
    interference_stderr: float
    config: SystemConfig


def instantaneous_rate_nats(p: Union[float, torch.Tensor],
                            eigs: Union[Sequence[float], torch.Tensor],
                            n0: float) -> Union[float, torch.Tensor]:
    """ `sum_i ln(1 + p l_i / n0)`, float for a single state and tensor of `n` for `n x m_r` eigenvalues.
    """

    eigs = torch.as_tensor(eigs, dtype=torch.float64)
    single = eigs.dim() == 1
    eigs = eigs.view(1, -1) if single else eigs
    p = torch.as_tensor(p, dtype=torch.float64).expand(eigs.size(0))
    rate = torch.log1p(p.unsqueeze(-1) * eigs / n0).sum(dim=-1)
    return rate.item() if single else rate


def instantaneous_rate(p: Union[float, torch.Tensor],
                       eigs: Union[Sequence[float], torch.Tensor],
                       n0: float) -> Union[float, torch.Tensor]:
    """ Capacity `sum_i log2(1 + p l_i / n0)` of one channel state in bits/s/Hz ::

        >>> instantaneous_rate(1.0, [1.0, 1.0], 1.0)
        2.0
    """

    return instantaneous_rate_nats(p, eigs, n0) / _LN2


def evaluate_policy(policy: CalibratedPolicy, samples: SampleSet) -> EvaluationResult:
    """ Ergodic rate and average interference of `policy` over `samples`. The rate always counts every eigenvalue,
    also for the policies that only optimized the largest one.
    """

    config = policy.config
    if not config.same_link(samples.config):
        raise ValueError(f"Policy is for a {config.m_r}x{config.m_t} link, but the samples are "
                         f"{samples.config.m_r}x{samples.config.m_t}")

    powers = policy.powers(samples)
    rate_nats, rate_nats_stderr = mean_and_stderr(instantaneous_rate_nats(powers, samples.eigs, config.n0))

    if policy.saturated or not policy.kind.uses_instantaneous_eta:
        mean_power, power_stderr = mean_and_stderr(powers)
        interference, interference_stderr = config.eta_bar * mean_power, config.eta_bar * power_stderr
    else:
        interference, interference_stderr = mean_and_stderr(interference_terms(policy.kind, powers, samples, config))

    result = EvaluationResult(kind=policy.kind,
                              lam=policy.lam,
                              q=config.threshold,
                              n=samples.n,
                              seed=samples.seed,
                              saturated=policy.saturated,
                              rate_bits=rate_nats / _LN2,
                              rate_stderr=rate_nats_stderr / _LN2,
                              rate_nats=rate_nats,
                              interference=interference,
                              interference_stderr=interference_stderr,
                              config=config)
    logger.debug(f"{policy.kind}: rate={result.rate_bits:.6g} bits/s/Hz, interference={interference:.6g}")
    return result


def rate_ordering_check(results: Sequence[EvaluationResult]) -> List[str]:
    """ Check the rate orderings EBPP >= MEBPP, EBPP >= IEBPP, MEBPP >= IMEBPP and, while `q / eta_bar <= p_max`,
    IEBPP >= FIXED, each with a slack of two combined standard errors. Pairs with a missing policy are skipped.

    :return: descriptions of the violated orderings, empty if all hold
    """

    if len(results) == 0:
        return []
    first = results[0]
    for r in results[1:]:
        if (r.seed, r.n, r.q) != (first.seed, first.n, first.q) or not r.config.same_link(first.config):
            raise ValueError(f"Results come from different sample sets or thresholds: "
                             f"(seed={first.seed}, n={first.n}, q={first.q}) vs (seed={r.seed}, n={r.n}, q={r.q})")

    by_kind: Dict[PolicyKind, EvaluationResult] = {r.kind: r for r in results}
    config = first.config
    violations = []
    for higher, lower in _ORDERINGS:
        if higher not in by_kind or lower not in by_kind:
            continue
        if lower is PolicyKind.FIXED and first.q / config.eta_bar > config.p_max:
            continue
        hi, lo = by_kind[higher], by_kind[lower]
        slack = 2 * (hi.rate_stderr + lo.rate_stderr)
        if hi.rate_bits + slack < lo.rate_bits:
            violations.append(f"rate({higher})={hi.rate_bits:.6g} < rate({lower})={lo.rate_bits:.6g} "
                              f"beyond slack {slack:.3g}")
    for v in violations:
        logger.warning(f"ordering violated at q={first.q}: {v}")
    return violations

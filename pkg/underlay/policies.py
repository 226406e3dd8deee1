""" Per-channel-state transmit power of the limited feedback policies.

All math is in nats. The optimized policies maximize `sum_i ln(1 + P l_i / N0) - lambda * eta_eff * P` over
`0 <= P <= P_max` for every channel state, where `eta_eff` is the instantaneous interference gain (EBPP, MEBPP) or
its mean (IEBPP, IMEBPP). The M-variants only see the largest eigenvalue.
"""

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import torch

from underlay.liblog import get_logger
from .channel import ChannelSample, SampleSet, SystemConfig
from .utils._vocabulary import MAX_POWER_ITERATIONS, RESIDUAL_REL_TOL

__all__ = ["PolicyKind", "CalibratedPolicy",
           "stationarity_residual", "solve_stationarity", "policy_power", "policy_powers", "saturation_check", "fixed_power"]

logger = get_logger(__name__)

ArrayLike = Union[Sequence[float], torch.Tensor]


class PolicyKind(enum.Enum):
    EBPP = "EBPP"
    MEBPP = "MEBPP"
    IEBPP = "IEBPP"
    IMEBPP = "IMEBPP"
    FIXED = "FIXED"

    @property
    def uses_instantaneous_eta(self) -> bool:
        return self in (PolicyKind.EBPP, PolicyKind.MEBPP)

    @property
    def uses_all_eigenvalues(self) -> bool:
        return self in (PolicyKind.EBPP, PolicyKind.IEBPP)

    @property
    def is_optimized(self) -> bool:
        return self is not PolicyKind.FIXED

    @property
    def order(self) -> int:
        return list(PolicyKind).index(self)

    @classmethod
    def parse(cls, name: Union[str, "PolicyKind"]) -> "PolicyKind":
        if isinstance(name, PolicyKind):
            return name
        try:
            return cls(name.strip().upper())
        except ValueError:
            raise ValueError(f"Unknown policy {name!r}, expected one of {[k.value for k in cls]}") from None

    def __str__(self):
        return self.value


def _as_float64(x) -> torch.Tensor:
    return torch.as_tensor(x, dtype=torch.float64)


def _residual(p: torch.Tensor, eigs: torch.Tensor, target: torch.Tensor, n0: float) -> torch.Tensor:
    # eigs: n x m_r, p and target: n
    return (eigs / (n0 + p.unsqueeze(-1) * eigs)).sum(dim=-1) - target


def stationarity_residual(p: Union[float, torch.Tensor],
                          eigs: ArrayLike,
                          lam: float,
                          eta_eff: Union[float, torch.Tensor],
                          n0: float) -> Union[float, torch.Tensor]:
    """ Derivative of the per-state Lagrangian, `sum_i l_i / (n0 + p l_i) - lam * eta_eff`. Strictly decreasing in
    `p` as soon as one eigenvalue is positive.

    :param eigs: `m_r` eigenvalues, or `n x m_r` with `p` and `eta_eff` broadcastable to `n`
    :return: float for a single state, tensor of `n` otherwise
    """

    eigs = _as_float64(eigs)
    single = eigs.dim() == 1
    eigs = eigs.view(1, -1) if single else eigs
    n = eigs.size(0)
    p = _as_float64(p).expand(n)
    target = lam * _as_float64(eta_eff).expand(n)
    residual = _residual(p, eigs, target, n0)
    return residual.item() if single else residual


def _water_level_power(l_max: torch.Tensor, lam: float, eta_eff: torch.Tensor, n0: float,
                       p_max: float) -> torch.Tensor:
    # min{[1/(lam eta) - n0/l]^+, p_max}; a zero channel gets 0 even if the level overflows
    level = 1 / (lam * eta_eff)
    power = torch.where(l_max > 0, level - n0 / l_max, torch.zeros_like(l_max))
    return power.clamp(min=0).clamp(max=p_max)


def _bisect_power(eigs: torch.Tensor, target: torch.Tensor, n0: float, p_max: float) -> torch.Tensor:
    n = eigs.size(0)
    zeros = torch.zeros(n, dtype=torch.float64)
    full = torch.full((n,), p_max, dtype=torch.float64)

    # ties go to the clipped branches
    at_zero = _residual(zeros, eigs, target, n0) <= 0
    at_peak = ~at_zero & (_residual(full, eigs, target, n0) >= 0)
    interior = ~(at_zero | at_peak)

    power = torch.where(at_peak, full, zeros)
    if not interior.any():
        return power

    lo, hi = zeros.clone(), full.clone()
    done = ~interior
    for _ in range(MAX_POWER_ITERATIONS):
        mid = (lo + hi) / 2
        residual = _residual(mid, eigs, target, n0)
        active = ~done
        power = torch.where(active, mid, power)
        # stop on the residual, or once the bracket is down to adjacent floats
        converged = (residual.abs() <= RESIDUAL_REL_TOL * target) | (mid <= lo) | (mid >= hi)
        done = done | (active & converged)
        lo = torch.where(active & (residual > 0), mid, lo)
        hi = torch.where(active & (residual < 0), mid, hi)
        if done.all():
            break
    else:
        logger.warning(f"Root finding stopped after {MAX_POWER_ITERATIONS} iterations "
                       f"on {int((~done).sum())} states")
    return power


def _solve(eigs: torch.Tensor, lam: float, eta_eff: torch.Tensor, n0: float, p_max: float) -> torch.Tensor:
    if eigs.size(-1) == 1:
        # a single eigenvalue has the closed-form water level
        return _water_level_power(eigs[:, 0], lam, eta_eff, n0, p_max)
    return _bisect_power(eigs, lam * eta_eff, n0, p_max)


def solve_stationarity(eigs: ArrayLike,
                       lam: float,
                       eta_eff: Union[float, torch.Tensor],
                       config: SystemConfig) -> Union[float, torch.Tensor]:
    """ Per-state power of the all-eigenvalue policies: 0 if the Lagrangian already decreases at 0, `p_max` if it
    still increases at `p_max`, otherwise the root of `stationarity_residual` found by bisection.

    >>> solve_stationarity([1.0, 1.0], 1.0, 1.0, SystemConfig(m_t=2, m_r=2, n0=1, p_max=10))  # root of 2/(1+P) = 1

    :param eigs: `m_r` eigenvalues, or `n x m_r`
    :param eta_eff: positive interference gain, scalar or of `n`
    :return: power in `[0, p_max]`, float for a single state
    """

    if not lam > 0:
        raise ValueError(f"lam should be positive, but got {lam}")
    eigs = _as_float64(eigs)
    single = eigs.dim() == 1
    eigs = eigs.view(1, -1) if single else eigs
    eta_eff = _as_float64(eta_eff).expand(eigs.size(0))
    if not (eta_eff > 0).all():
        raise ValueError("eta_eff should be positive")
    power = _solve(eigs, lam, eta_eff, config.n0, config.p_max)
    return power.item() if single else power


def saturation_check(config: SystemConfig) -> bool:
    """ True if transmitting at `p_max` all the time already meets the average interference threshold.
    """

    return config.eta_bar * config.p_max <= config.threshold


def fixed_power(config: SystemConfig) -> float:
    return min(config.threshold / config.eta_bar, config.p_max)


def policy_powers(kind: PolicyKind,
                  eigs: torch.Tensor,
                  eta: torch.Tensor,
                  lam: float,
                  config: SystemConfig) -> torch.Tensor:
    """ Batched `policy_power` over `n` states.

    :param eigs: `n x m_r` eigenvalues in descending order
    :param eta: `n` instantaneous interference gains, ignored by the statistics-only policies
    :param lam: Lagrange multiplier, positive for the optimized policies and ignored by FIXED
    """

    kind = PolicyKind.parse(kind)
    eigs = _as_float64(eigs)
    n = eigs.size(0)
    if kind is PolicyKind.FIXED:
        return torch.full((n,), fixed_power(config), dtype=torch.float64)
    if not lam > 0:
        raise ValueError(f"{kind} needs a positive multiplier, but got {lam}")

    if kind.uses_instantaneous_eta:
        eta_eff = _as_float64(eta).expand(n)
    else:
        eta_eff = torch.full((n,), config.eta_bar, dtype=torch.float64)
    # eta = 0 lifts the water level to infinity
    no_interference = eta_eff == 0
    eta_eff = torch.where(no_interference, torch.ones_like(eta_eff), eta_eff)

    if kind.uses_all_eigenvalues:
        power = _solve(eigs, lam, eta_eff, config.n0, config.p_max)
    else:
        power = _water_level_power(eigs[:, 0], lam, eta_eff, config.n0, config.p_max)
    return torch.where(no_interference, torch.full_like(power, config.p_max), power)


def policy_power(kind: PolicyKind,
                 sample: ChannelSample,
                 lam: float,
                 config: SystemConfig) -> float:
    """ Transmit power of policy `kind` on one channel state.

    >>> config = SystemConfig(m_t=2, m_r=1, n0=1, p_max=10)
    >>> policy_power(PolicyKind.MEBPP, ChannelSample(eigs=(4.0,), eta=2.0), 1.0, config)
    0.25
    """

    eigs = torch.tensor([sample.eigs], dtype=torch.float64)
    eta = torch.tensor([sample.eta], dtype=torch.float64)
    return policy_powers(kind, eigs, eta, lam, config).item()


@dataclass(frozen=True)
class CalibratedPolicy(object):
    """ A policy with its multiplier fixed. Saturated policies transmit at `p_max` on every state.

    :param kind: policy kind
    :param lam: Lagrange multiplier, 0 for saturated and FIXED policies
    :param saturated: whether `eta_bar * p_max <= q`
    :param config: config the multiplier was calibrated for
    """

    kind: PolicyKind
    lam: float
    saturated: bool
    config: SystemConfig

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind.parse(self.kind))
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lam should be finite and non-negative, but got {self.lam}")
        if self.saturated != saturation_check(self.config):
            raise ValueError(f"saturated={self.saturated} contradicts eta_bar * p_max = "
                             f"{self.config.eta_bar * self.config.p_max} against q = {self.config.q}")
        if not self.saturated and self.kind.is_optimized and self.lam == 0:
            raise ValueError(f"{self.kind} below saturation needs a positive multiplier")

    @classmethod
    def uncalibrated(cls, kind: PolicyKind, config: SystemConfig) -> "CalibratedPolicy":
        """ Policies that need no multiplier: anything saturated, and FIXED.
        """
        kind = PolicyKind.parse(kind)
        saturated = saturation_check(config)
        if kind.is_optimized and not saturated:
            raise ValueError(f"{kind} below saturation needs a calibrated multiplier")
        return cls(kind, 0.0, saturated, config)

    def powers(self, samples: SampleSet) -> torch.Tensor:
        if self.saturated:
            return torch.full((samples.n,), self.config.p_max, dtype=torch.float64)
        return policy_powers(self.kind, samples.eigs, samples.eta, self.lam, self.config)

    def power(self, sample: ChannelSample) -> float:
        if self.saturated:
            return self.config.p_max
        return policy_power(self.kind, sample, self.lam, self.config)

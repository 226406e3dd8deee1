""" Brute-force reference for the policies: the per-state Lagrangian is maximized over a power grid and the
multiplier is picked from a grid. Nothing here uses the case analysis or the closed forms, so agreement with
`underlay.policies` and `underlay.calibration` is an independent check. Meant for tests and small sets only.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import torch

from underlay.liblog import get_logger
from .calibration import check_compatible, interference_terms
from .channel import SampleSet, SystemConfig
from .policies import PolicyKind, saturation_check
from .utils.reproducibility import deterministic_sum

__all__ = ["GridSpec", "OracleRangeError", "lagrangian_value", "oracle_state_power", "oracle_calibrate"]

logger = get_logger(__name__)

# upper bound on grid x states x eigenvalues held in memory at once
_CHUNK_ELEMENTS = 1 << 22


class OracleRangeError(RuntimeError):
    """ The multiplier grid does not bracket the interference threshold.
    """


@dataclass(frozen=True)
class GridSpec(object):
    """ Resolution of the brute-force search.

    :param p_points: number of powers on `[0, p_max]`, endpoints included
    :param lambda_points: number of log-spaced multipliers on `lambda_range`, endpoints included
    :param lambda_range: `(lo, hi)` of the multiplier grid
    """

    p_points: int = 100_000
    lambda_points: int = 10_000
    lambda_range: Tuple[float, float] = (1e-6, 1e6)

    def __post_init__(self):
        if self.p_points < 1000 or self.lambda_points < 1000:
            raise ValueError(f"Grids need at least 1000 points, but got p_points={self.p_points} and "
                             f"lambda_points={self.lambda_points}")
        lo, hi = self.lambda_range
        if not 0 < lo < hi < math.inf:
            raise ValueError(f"lambda_range should satisfy 0 < lo < hi, but got {self.lambda_range}")

    def power_grid(self, p_max: float) -> torch.Tensor:
        grid = torch.linspace(0, p_max, self.p_points, dtype=torch.float64)
        grid[-1] = p_max
        return grid

    def lambda_grid(self) -> torch.Tensor:
        lo, hi = self.lambda_range
        grid = torch.logspace(math.log10(lo), math.log10(hi), self.lambda_points, dtype=torch.float64)
        grid[0], grid[-1] = lo, hi
        return grid


def lagrangian_value(p: Union[float, torch.Tensor],
                     eigs: Union[Sequence[float], torch.Tensor],
                     eta_eff: float,
                     lam: float,
                     n0: float) -> Union[float, torch.Tensor]:
    """ Per-state Lagrangian `sum_i ln(1 + p l_i / n0) - lam * eta_eff * p` for a scalar or a vector of powers.
    """

    eigs = torch.as_tensor(eigs, dtype=torch.float64)
    p = torch.as_tensor(p, dtype=torch.float64)
    value = torch.log1p(p.unsqueeze(-1) * eigs / n0).sum(dim=-1) - lam * eta_eff * p
    return value.item() if value.dim() == 0 else value


def _grid_argmax(eigs: torch.Tensor, eta_eff: torch.Tensor, lam: float, n0: float,
                 grid: torch.Tensor) -> torch.Tensor:
    # eigs: n x m, eta_eff: n; returns grid powers of n states
    n, m = eigs.shape
    chunk = max(1, _CHUNK_ELEMENTS // (grid.numel() * m))
    powers = []
    for start in range(0, n, chunk):
        e = eigs[start:start + chunk]
        values = torch.log1p(grid.view(1, -1, 1) * e.unsqueeze(1) / n0).sum(dim=-1)
        values = values - lam * eta_eff[start:start + chunk].unsqueeze(1) * grid.view(1, -1)
        # argmax returns the first maximum, i.e. ties go to the smaller power
        powers.append(grid[values.argmax(dim=1)])
    return torch.cat(powers)


def oracle_state_power(eigs: Union[Sequence[float], torch.Tensor],
                       eta_eff: float,
                       lam: float,
                       config: SystemConfig,
                       grid: GridSpec = GridSpec()) -> float:
    """ Grid maximizer of the per-state Lagrangian on `[0, p_max]`.
    """

    eigs = torch.as_tensor(eigs, dtype=torch.float64).view(1, -1)
    eta_eff = torch.tensor([eta_eff], dtype=torch.float64)
    return _grid_argmax(eigs, eta_eff, lam, config.n0, grid.power_grid(config.p_max)).item()


def _oracle_interference(kind: PolicyKind, lam: float, samples: SampleSet, config: SystemConfig,
                         power_grid: torch.Tensor) -> float:
    eigs = samples.eigs if kind.uses_all_eigenvalues else samples.eigs[:, :1]
    if kind.uses_instantaneous_eta:
        eta_eff = samples.eta
    else:
        eta_eff = torch.full((samples.n,), config.eta_bar, dtype=torch.float64)
    powers = _grid_argmax(eigs, eta_eff, lam, config.n0, power_grid)
    return deterministic_sum(interference_terms(kind, powers, samples, config)) / samples.n


def oracle_calibrate(kind: PolicyKind,
                     samples: SampleSet,
                     config: SystemConfig,
                     grid: GridSpec = GridSpec()) -> Tuple[float, float]:
    """ Smallest grid multiplier whose empirical interference is at most `q`. As the interference is monotone in the
    multiplier, the grid is searched by halving the index range instead of a full scan.

    :return: `(lambda, achieved_interference)`
    """

    kind = PolicyKind.parse(kind)
    if not kind.is_optimized:
        raise ValueError(f"{kind} has no multiplier to calibrate")
    if saturation_check(config):
        raise ValueError("Saturated config needs no calibration")
    check_compatible(samples, config)

    q = config.threshold
    lambdas = grid.lambda_grid()
    power_grid = grid.power_grid(config.p_max)

    def interference(i: int) -> float:
        return _oracle_interference(kind, lambdas[i].item(), samples, config, power_grid)

    lo, hi = 0, lambdas.numel() - 1
    u_lo, u_hi = interference(lo), interference(hi)
    if not (u_lo > q >= u_hi):
        raise OracleRangeError(f"lambda grid {grid.lambda_range} gives interference in [{u_hi}, {u_lo}], "
                               f"which does not bracket q={q}")
    # invariant: U(lo) > q >= U(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        u_mid = interference(mid)
        if u_mid > q:
            lo = mid
        else:
            hi, u_hi = mid, u_mid
    logger.debug(f"oracle {kind}: lambda={lambdas[hi].item():.6g}, interference={u_hi:.6g}")
    return lambdas[hi].item(), u_hi

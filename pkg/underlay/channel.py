""" Rayleigh fading model of the secondary MIMO link and of the interference link towards the primary receiver.

The policies never look at the channel matrix itself: a channel state is reduced to the eigenvalues of `H H^H`
and the interference gain `eta = ||h_sp||^2`.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from numbers import Integral, Real
from typing import Iterator, Optional, Sequence, Tuple

import torch

from underlay.liblog import get_logger
from .utils._vocabulary import BLOCK_SIZE, EIGEN_NEGATIVE_TOLERANCE
from .utils.reproducibility import stream_generator

__all__ = ["SystemConfig", "ChannelSample", "SampleSet",
           "sample_channel_matrix", "gram_eigenvalues", "sample_interference_gain", "build_sample_set"]

logger = get_logger(__name__)


def _check_positive(name: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, Real) or not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} should be a finite positive number, but got {value!r}")


def _check_count(name: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, Integral) or value < 1:
        raise ValueError(f"{name} should be a positive integer, but got {value!r}")


@dataclass(frozen=True)
class SystemConfig(object):
    """ Fixed parameters of an experiment. Powers are linear watts.

    :param m_t: number of secondary transmit antennas
    :param m_r: number of secondary receive antennas
    :param n0: noise power
    :param p_max: peak per-antenna transmit power
    :param q: average interference threshold at the primary receiver. May be left unset for a link description
        that is later specialized with `with_q`.
    :param sigma_h_sq: per-entry variance of `H`
    :param sigma_sp_sq: per-entry variance of `h_sp`
    """

    m_t: int
    m_r: int
    n0: float
    p_max: float
    q: Optional[float] = None
    sigma_h_sq: float = 1.0
    sigma_sp_sq: float = 1.0

    def __post_init__(self):
        _check_count("m_t", self.m_t)
        _check_count("m_r", self.m_r)
        for name in ("n0", "p_max", "sigma_h_sq", "sigma_sp_sq"):
            _check_positive(name, getattr(self, name))
        if self.q is not None:
            _check_positive("q", self.q)

    @property
    def eta_bar(self) -> float:
        """ mean interference gain E{eta} = m_t * sigma_sp_sq
        """
        return self.m_t * self.sigma_sp_sq

    @property
    def threshold(self) -> float:
        if self.q is None:
            raise ValueError("Interference threshold q is not set in this config")
        return self.q

    def with_q(self, q: float) -> "SystemConfig":
        return replace(self, q=q)

    def same_link(self, other: "SystemConfig") -> bool:
        """ True if both configs describe the same fading distribution, regardless of powers and threshold.
        """
        return (self.m_t, self.m_r, self.sigma_h_sq, self.sigma_sp_sq) == \
               (other.m_t, other.m_r, other.sigma_h_sq, other.sigma_sp_sq)


@dataclass(frozen=True)
class ChannelSample(object):
    """ One joint fading realization: eigenvalues of `H H^H` in descending order and the interference gain.
    """

    eigs: Tuple[float, ...]
    eta: float

    def __post_init__(self):
        eigs = tuple(float(l) for l in self.eigs)
        object.__setattr__(self, "eigs", eigs)
        object.__setattr__(self, "eta", float(self.eta))
        if len(eigs) == 0:
            raise ValueError("ChannelSample needs at least one eigenvalue")
        if any(not math.isfinite(l) or l < 0 for l in eigs):
            raise ValueError(f"Eigenvalues should be finite and non-negative, but got {eigs}")
        if any(a < b for a, b in zip(eigs, eigs[1:])):
            raise ValueError(f"Eigenvalues should be sorted in descending order, but got {eigs}")
        if not math.isfinite(self.eta) or self.eta < 0:
            raise ValueError(f"eta should be finite and non-negative, but got {self.eta}")

    @property
    def l_max(self) -> float:
        return self.eigs[0]


@dataclass(frozen=True, eq=False)
class SampleSet(object):
    """ Empirical fading distribution shared by every policy of an experiment.

    :param seed: seed the set was generated from
    :param eigs: float64 tensor of `n x m_r` eigenvalues, each row in descending order
    :param eta: float64 tensor of `n` interference gains
    :param config: config whose link dimensions and variances generated the set
    """

    seed: int
    eigs: torch.Tensor
    eta: torch.Tensor
    config: SystemConfig

    def __post_init__(self):
        if self.eigs.dim() != 2 or self.eta.dim() != 1 or self.eigs.size(0) != self.eta.size(0):
            raise ValueError(f"Expected eigs of n x m_r and eta of n, but got {tuple(self.eigs.shape)} "
                             f"and {tuple(self.eta.shape)}")
        if self.eigs.size(0) == 0:
            raise ValueError("SampleSet should not be empty")
        if self.eigs.size(1) != self.config.m_r:
            raise ValueError(f"Expected {self.config.m_r} eigenvalues per sample, but got {self.eigs.size(1)}")
        if not (torch.isfinite(self.eigs).all() and torch.isfinite(self.eta).all()):
            raise ValueError("Eigenvalues and eta should be finite")
        if (self.eigs < 0).any() or (self.eta < 0).any():
            raise ValueError("Eigenvalues and eta should be non-negative")
        if (self.eigs[:, :-1] < self.eigs[:, 1:]).any():
            raise ValueError("Eigenvalues of each sample should be sorted in descending order")

    @classmethod
    def from_samples(cls, samples: Sequence[ChannelSample], config: SystemConfig, seed: int = 0) -> "SampleSet":
        """ Build a set from explicit channel states, e.g. a single analytic state ::

            >>> SampleSet.from_samples([ChannelSample(eigs=(1.0,), eta=1.0)], config)
        """
        if len(samples) == 0:
            raise ValueError("SampleSet should not be empty")
        eigs = torch.tensor([s.eigs for s in samples], dtype=torch.float64)
        eta = torch.tensor([s.eta for s in samples], dtype=torch.float64)
        return cls(seed, eigs, eta, config)

    @property
    def n(self) -> int:
        return self.eigs.size(0)

    @property
    def l_max(self) -> torch.Tensor:
        return self.eigs[:, 0]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, item: int) -> ChannelSample:
        return ChannelSample(eigs=tuple(self.eigs[item].tolist()), eta=self.eta[item].item())

    def __iter__(self) -> Iterator[ChannelSample]:
        for i in range(self.n):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return self.seed == other.seed and self.config.same_link(other.config) \
               and torch.equal(self.eigs, other.eigs) and torch.equal(self.eta, other.eta)

    def __hash__(self):
        return hash((self.seed, self.n, self.config.m_t, self.config.m_r))


def sample_channel_matrix(generator: torch.Generator,
                          config: SystemConfig,
                          batch: Optional[int] = None) -> torch.Tensor:
    """ Draw `H` with i.i.d. circularly-symmetric complex Gaussian entries of variance `sigma_h_sq`.

    :param generator: advanced in place
    :param batch: if given, draw `batch` matrices at once
    :return: complex128 tensor of `m_r x m_t`, or `batch x m_r x m_t`
    """

    size = (config.m_r, config.m_t) if batch is None else (batch, config.m_r, config.m_t)
    # complex randn has unit total variance, i.e. 1/2 per real dimension
    h = torch.randn(size, generator=generator, dtype=torch.complex128)
    return h * math.sqrt(config.sigma_h_sq)


def gram_eigenvalues(h: torch.Tensor) -> torch.Tensor:
    """ Eigenvalues of `H H^H` in descending order. Round-off negatives above `-1e-10 * max(1, ||H||_F^2)` are
    clamped to 0.

    :param h: `m_r x m_t` matrix or a batch of them
    :return: float64 tensor of `m_r` (or `batch x m_r`) eigenvalues
    """

    h = torch.as_tensor(h)
    if h.dim() < 2:
        raise ValueError(f"Expected a matrix, but got a tensor of shape {tuple(h.shape)}")
    if not torch.isfinite(h).all():
        raise ValueError("Channel matrix has non-finite entries")
    h = h.to(torch.complex128)
    gram = h @ h.conj().transpose(-2, -1)
    eigs = torch.linalg.eigvalsh(gram).flip(-1)
    scale = (h.abs() ** 2).sum(dim=(-2, -1)).clamp(min=1.0).unsqueeze(-1)
    if (eigs < -EIGEN_NEGATIVE_TOLERANCE * scale).any():
        raise ValueError(f"Gram matrix has negative eigenvalues beyond round-off: {eigs.min().item()}")
    return eigs.clamp(min=0)


def sample_interference_gain(generator: torch.Generator,
                             config: SystemConfig,
                             batch: Optional[int] = None) -> torch.Tensor:
    """ Draw `eta = ||h_sp||^2` from an explicit `1 x m_t` channel row, which makes `eta` Gamma distributed with
    shape `m_t` and scale `sigma_sp_sq`.

    :return: float64 tensor, 0-dim or of `batch`
    """

    size = (config.m_t,) if batch is None else (batch, config.m_t)
    h_sp = torch.randn(size, generator=generator, dtype=torch.complex128) * math.sqrt(config.sigma_sp_sq)
    return (h_sp.abs() ** 2).sum(dim=-1)


def _build_block(seed: int, block: int, config: SystemConfig, block_size: int) -> Tuple[torch.Tensor, torch.Tensor]:
    generator = stream_generator(seed, block)
    h = sample_channel_matrix(generator, config, batch=block_size)
    eta = sample_interference_gain(generator, config, batch=block_size)
    return gram_eigenvalues(h), eta


def build_sample_set(seed: int,
                     n: int,
                     config: SystemConfig,
                     block_size: int = BLOCK_SIZE,
                     workers: int = 1) -> SampleSet:
    """ Draw `n` independent channel states. Samples are produced in full blocks of `block_size`, each from its own
    stream of `seed`, so sample `i` depends on `(seed, i, config)` only ::

        >>> samples = build_sample_set(7, 100_000, SystemConfig(m_t=2, m_r=2, n0=1, p_max=10))

    :param workers: number of threads generating blocks
    """

    if isinstance(n, bool) or not isinstance(n, Integral) or n < 1:
        raise ValueError(f"n should be a positive integer, but got {n!r}")
    _check_count("block_size", block_size)
    num_blocks = -(-n // block_size)

    def build(block: int):
        return _build_block(seed, block, config, block_size)

    if workers > 1 and num_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(build, range(num_blocks)))
    else:
        blocks = [build(b) for b in range(num_blocks)]

    eigs = torch.cat([b[0] for b in blocks])[:n].contiguous()
    eta = torch.cat([b[1] for b in blocks])[:n].contiguous()
    logger.debug(f"built {n} samples of a {config.m_r}x{config.m_t} link from seed {seed}")
    return SampleSet(seed, eigs, eta, config)

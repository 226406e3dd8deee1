from typing import Tuple

import numpy
import torch

from underlay.liblog import get_logger

__all__ = ["stream_generator", "deterministic_sum", "mean_and_stderr"]

logger = get_logger(__name__)

_UINT64_MASK = (1 << 64) - 1


def stream_generator(seed: int, stream: int) -> torch.Generator:
    """ A `torch.Generator` addressed by `(seed, stream)`. Different streams of the same seed are statistically
    independent, and the state of one stream never depends on how many others were drawn before ::

        >>> g = stream_generator(7, 0)
        >>> torch.randn(3, generator=g, dtype=torch.float64)

    :param seed: 64-bit unsigned root seed
    :param stream: non-negative stream index, e.g. the block number of a sample set
    """

    if not 0 <= seed <= _UINT64_MASK:
        raise ValueError(f"seed should be a 64-bit unsigned integer, but got {seed}")
    if stream < 0:
        raise ValueError(f"stream should be non-negative, but got {stream}")
    state = numpy.random.SeedSequence(seed, spawn_key=(stream,)).generate_state(1, dtype=numpy.uint64)[0]
    generator = torch.Generator(device="cpu")
    # torch seeds are signed 64-bit on some platforms
    generator.manual_seed(int(state) & ((1 << 63) - 1))
    return generator


def _as_float64(x) -> numpy.ndarray:
    if torch.is_tensor(x):
        x = x.detach().to("cpu", torch.float64).numpy()
    return numpy.ascontiguousarray(x, dtype=numpy.float64).reshape(-1)


def deterministic_sum(x) -> float:
    """ Sum through numpy's pairwise summation. The order of additions is fixed by the array length only, so the
    result does not change with the number of torch threads.
    """

    return float(numpy.sum(_as_float64(x)))


def mean_and_stderr(x) -> Tuple[float, float]:
    """ Sample mean and its standard error (sample standard deviation / sqrt(n)). One sample has zero error.
    """

    x = _as_float64(x)
    n = x.size
    if n == 0:
        raise ValueError("Cannot average an empty array")
    mean = float(numpy.sum(x)) / n
    if n == 1:
        return mean, 0.0
    variance = float(numpy.sum((x - mean) ** 2)) / (n - 1)
    return mean, (variance / n) ** 0.5

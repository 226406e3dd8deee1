from abc import ABCMeta, abstractmethod
from logging import Logger
from pathlib import Path
from typing import Iterable, Optional, Union

from underlay.liblog import _remove_handler, _set_tqdm_handler, get_logger
from .utils._vocabulary import INTERFERENCE, RATE

__all__ = ["Reporter", "ReporterList", "LoggerReporter", "TQDMReporter", "TensorboardReporter", "get_reporter"]


class Reporter(metaclass=ABCMeta):
    """ Receives every finished cell of a sweep. `step` is the position of the cell's `q` in the sweep. Use as ::

        with LoggerReporter() as reporter:
            rows = run_sweep(spec, reporter)
    """

    @abstractmethod
    def report(self, row, step: int) -> None:
        pass

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


class ReporterList(Reporter):
    """ Combine some reporters

    :param reporters: reporters
    """

    def __init__(self, *reporters: Reporter):
        reporters = [r for r in reporters if r is not None]
        for r in reporters:
            if not isinstance(r, Reporter):
                raise TypeError(f"{r} is not reporter!")
        self._reporters = reporters

    def report(self, row, step: int) -> None:
        for r in self._reporters:
            r.report(row, step)

    def close(self):
        for r in self._reporters:
            r.close()


class LoggerReporter(Reporter):
    """ Reports like this ::

        [underlay.reporter|2026-10-19 10:31:20|INFO] [   3]   EBPP q=2.0000 lambda=0.31416 rate=3.1416(0.0031) interference=2.0000
    """

    def __init__(self, logger: Optional[Logger] = None):
        self.logger = get_logger("underlay.reporter") if logger is None else logger

    def report(self, row, step: int) -> None:
        if row.error is not None:
            self.logger.error(f"[{step:>4}] {str(row.policy):>6} q={row.q:.4f} failed: {row.error}")
            return
        self.logger.info(f"[{step:>4}] {str(row.policy):>6} q={row.q:.4f} lambda={row.lam:.5g} "
                         f"rate={row.rate_bits:.4f}({row.rate_stderr:.4f}) interference={row.interference:.4f}"
                         + (" saturated" if row.saturated else ""))


class TQDMReporter(Reporter):
    """ Progress bar over the cells of a sweep, with the latest rate per policy as postfix ::

        100%|█████████| 125/125 [00:41<00:00,  3.01it/s, EBPP=5.81, FIXED=4.97]

    :param total: number of cells
    """

    def __init__(self, total: int):
        from tqdm import tqdm

        self.tqdm = tqdm(total=total, ncols=80)
        self._postfix = {}
        self._handler = _set_tqdm_handler()

    def report(self, row, step: int) -> None:
        if row.error is None:
            self._postfix[str(row.policy)] = f"{row.rate_bits:.3f}"
            self.tqdm.set_postfix(self._postfix, refresh=False)
        self.tqdm.update(1)

    def close(self):
        self.tqdm.close()
        _remove_handler(self._handler)


class TensorboardReporter(Reporter):
    """ Writes `rate_bits/<policy>` and `interference/<policy>` scalars indexed by the q position, so the curves of
    all policies can be compared in Tensorboard.

    :param log_dir: directory of the event files
    """

    def __init__(self, log_dir: Union[str, Path]):
        from torch.utils.tensorboard import SummaryWriter

        self._writer = SummaryWriter(log_dir=str(log_dir))

    def report(self, row, step: int) -> None:
        if row.error is not None:
            return
        self._writer.add_scalar(f"{RATE}/{row.policy}", row.rate_bits, step)
        self._writer.add_scalar(f"{INTERFERENCE}/{row.policy}", row.interference, step)

    def close(self):
        self._writer.close()


def get_reporter(names: Iterable[str], total: int, log_dir: Optional[Union[str, Path]] = None) -> ReporterList:
    """ Reporter from names: `logger`, `tqdm` and `tensorboard`.
    """

    reporters = []
    for name in names:
        if name == "logger":
            reporters.append(LoggerReporter())
        elif name == "tqdm":
            reporters.append(TQDMReporter(total))
        elif name == "tensorboard":
            if log_dir is None:
                raise ValueError("tensorboard reporter needs log_dir")
            reporters.append(TensorboardReporter(log_dir))
        else:
            raise ValueError(f"Unknown reporter {name}")
    return ReporterList(*reporters)

""" Rate-versus-threshold experiments: calibrate and evaluate every policy at every `q` on one shared SampleSet.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy
import pandas as pd

from underlay.liblog import get_logger
from .calibration import CalibrationError, calibrate_policy
from .channel import SampleSet, SystemConfig, build_sample_set
from .evaluation import EvaluationResult, evaluate_policy
from .policies import PolicyKind
from .reporters import Reporter
from .utils._vocabulary import CSV_HEADER, DEFAULT_REL_TOL, FLOAT_FORMAT
from .utils.environment import get_args, get_git_hash
from .utils.miscs import prepare_output_path

__all__ = ["SweepSpec", "SweepRow", "q_values", "default_q_range", "run_sweep", "write_csv"]

logger = get_logger(__name__)


def default_q_range(config: SystemConfig) -> Tuple[float, float]:
    """ `[0.05, 1.5] * eta_bar * p_max`, wide enough to show the constrained and the saturated regimes.
    """

    saturation = config.eta_bar * config.p_max
    return 0.05 * saturation, 1.5 * saturation


def q_values(q_min: float, q_max: float, steps: int, scale: str = "log") -> Tuple[float, ...]:
    """ `steps` thresholds from `q_min` to `q_max`, both included, spaced linearly (`lin`) or geometrically (`log`).
    """

    if not 0 < q_min <= q_max:
        raise ValueError(f"Thresholds should satisfy 0 < q_min <= q_max, but got {q_min} and {q_max}")
    if steps < 1 or (steps == 1 and q_min != q_max) or (steps > 1 and q_min == q_max):
        raise ValueError(f"Cannot place {steps} distinct thresholds in [{q_min}, {q_max}]")
    if steps == 1:
        return (float(q_min),)
    if scale == "lin":
        values = numpy.linspace(q_min, q_max, steps)
    elif scale == "log":
        values = numpy.geomspace(q_min, q_max, steps)
    else:
        raise ValueError(f"scale should be 'lin' or 'log', but got {scale}")
    values[0], values[-1] = q_min, q_max
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class SweepSpec(object):
    """ Description of one experiment.

    :param config: link and power parameters; its `q` is ignored and replaced by each of `q_values`
    :param q_values: strictly increasing thresholds
    :param policies: policies to run, each at every threshold
    :param n: number of channel samples
    :param seed: seed of the shared SampleSet
    :param output_path: CSV destination
    :param rel_tol: relative tolerance of the calibrated interference
    :param holdout_seed: if given, evaluate on a second SampleSet drawn from this seed
    :param workers: threads running (q, policy) cells
    """

    config: SystemConfig
    q_values: Tuple[float, ...]
    policies: Tuple[PolicyKind, ...] = tuple(PolicyKind)
    n: int = 100_000
    seed: int = 0
    output_path: Union[str, Path] = "sweep.csv"
    rel_tol: float = DEFAULT_REL_TOL
    holdout_seed: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "q_values", tuple(float(q) for q in self.q_values))
        object.__setattr__(self, "policies", tuple(PolicyKind.parse(p) for p in self.policies))
        if len(self.q_values) == 0:
            raise ValueError("q_values should not be empty")
        if any(not (math.isfinite(q) and q > 0) for q in self.q_values):
            raise ValueError(f"q_values should be finite and positive, but got {self.q_values}")
        if any(a >= b for a, b in zip(self.q_values, self.q_values[1:])):
            raise ValueError(f"q_values should be strictly increasing, but got {self.q_values}")
        if len(self.policies) == 0:
            raise ValueError("policies should not be empty")
        if len(set(self.policies)) != len(self.policies):
            raise ValueError(f"policies should not repeat, but got {[str(p) for p in self.policies]}")
        if self.n < 1:
            raise ValueError(f"n should be positive, but got {self.n}")
        for name in ("seed", "holdout_seed"):
            seed = getattr(self, name)
            if seed is not None and not 0 <= seed < 2 ** 64:
                raise ValueError(f"{name} should be a 64-bit unsigned integer, but got {seed}")
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol should be positive, but got {self.rel_tol}")
        if self.workers < 1:
            raise ValueError(f"workers should be positive, but got {self.workers}")

    @property
    def num_cells(self) -> int:
        return len(self.q_values) * len(self.policies)


@dataclass(frozen=True)
class SweepRow(object):
    """ Result of one (policy, q) cell. A failed calibration keeps NaN measurements and the reason in `error`.
    """

    policy: PolicyKind
    q: float
    m_t: int
    m_r: int
    n0: float
    p_max: float
    n: int
    seed: int
    lam: float
    rate_bits: float
    rate_stderr: float
    interference: float
    interference_stderr: float
    saturated: bool
    error: Optional[str] = field(default=None, compare=False)

    @classmethod
    def from_result(cls, result: EvaluationResult, spec: SweepSpec) -> "SweepRow":
        config = result.config
        return cls(result.kind, result.q, config.m_t, config.m_r, config.n0, config.p_max, spec.n, spec.seed,
                   result.lam, result.rate_bits, result.rate_stderr, result.interference,
                   result.interference_stderr, result.saturated)

    @classmethod
    def failed(cls, kind: PolicyKind, config: SystemConfig, spec: SweepSpec, error: str) -> "SweepRow":
        nan = math.nan
        return cls(kind, config.threshold, config.m_t, config.m_r, config.n0, config.p_max, spec.n, spec.seed,
                   nan, nan, nan, nan, nan, False, error)

    @property
    def sort_key(self) -> Tuple[float, int]:
        return self.q, self.policy.order

    def to_record(self) -> Dict[str, Union[str, int, float]]:
        """ CSV record keyed by `CSV_HEADER`.
        """

        values = (str(self.policy), self.q, self.m_t, self.m_r, self.n0, self.p_max, self.n, self.seed, self.lam,
                  self.rate_bits, self.rate_stderr, self.interference, self.interference_stderr,
                  "true" if self.saturated else "false")
        return dict(zip(CSV_HEADER, values))


def _run_cell(spec: SweepSpec, q: float, kind: PolicyKind, samples: SampleSet, eval_samples: SampleSet) -> SweepRow:
    config = spec.config.with_q(q)
    try:
        policy, report = calibrate_policy(kind, samples, config, spec.rel_tol)
    except CalibrationError as e:
        logger.error(f"{kind} at q={q}: {e}")
        return SweepRow.failed(kind, config, spec, str(e))
    if report is not None and not report.tolerance_met:
        logger.warning(f"{kind} at q={q}: interference {report.achieved_interference:.6g} is outside rel_tol")
    result = evaluate_policy(policy, eval_samples)
    if eval_samples is not samples:
        logger.info(f"{kind} at q={q}: calibrated on seed {samples.seed}, measured on held-out seed {result.seed}")
    return SweepRow.from_result(result, spec)


def run_sweep(spec: SweepSpec, reporter: Optional[Reporter] = None) -> List[SweepRow]:
    """ Run every (q, policy) cell of `spec` on one shared SampleSet (common random numbers). Cells below saturation
    are calibrated, saturated ones transmit at `p_max`. The rows are ordered by `(q, policy)` and do not depend on
    `spec.workers`.
    """

    git_hash = get_git_hash()
    logger.info(f"sweep of {spec.num_cells} cells on a {spec.config.m_r}x{spec.config.m_t} link, n={spec.n}, "
                f"seed={spec.seed}" + (f", git={git_hash}" if git_hash else ""))
    logger.debug(f"args: {' '.join(get_args())}")

    samples = build_sample_set(spec.seed, spec.n, spec.config, workers=spec.workers)
    eval_samples = samples
    if spec.holdout_seed is not None:
        eval_samples = build_sample_set(spec.holdout_seed, spec.n, spec.config, workers=spec.workers)
        logger.info(f"evaluating on held-out samples of seed {spec.holdout_seed}")

    cells = [(step, q, kind) for step, q in enumerate(spec.q_values) for kind in spec.policies]

    def run(cell) -> Tuple[int, SweepRow]:
        step, q, kind = cell
        return step, _run_cell(spec, q, kind, samples, eval_samples)

    rows = []
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        for step, row in pool.map(run, cells):
            rows.append(row)
            if reporter is not None:
                reporter.report(row, step)
    return sorted(rows, key=lambda r: r.sort_key)


def write_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    """ Write rows as UTF-8 CSV with LF line endings and floats to 9 significant digits. Failed cells keep `nan`.
    """

    path = prepare_output_path(path)
    df = pd.DataFrame([row.to_record() for row in rows], columns=list(CSV_HEADER))
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n", encoding="utf-8")
    logger.info(f"wrote {len(rows)} rows to {path}")
    return path

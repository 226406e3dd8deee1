import math

import pytest
import torch
from scipy import special

from underlay.calibration import calibrate_policy
from underlay.channel import ChannelSample, SampleSet, SystemConfig, build_sample_set
from underlay.evaluation import evaluate_policy, instantaneous_rate, instantaneous_rate_nats, rate_ordering_check
from underlay.policies import CalibratedPolicy, PolicyKind

config_2x2 = SystemConfig(m_t=2, m_r=2, n0=1, p_max=10)


@pytest.fixture(scope="module")
def samples_2x2():
    return build_sample_set(0, 100_000, config_2x2)


def _evaluate_all(samples, config):
    return {kind: evaluate_policy(calibrate_policy(kind, samples, config)[0], samples) for kind in PolicyKind}


def test_instantaneous_rate():
    assert instantaneous_rate(1.0, [1.0, 1.0], 1.0) == pytest.approx(2.0)
    assert instantaneous_rate(0.0, [3.0, 1.0], 1.0) == 0
    assert instantaneous_rate_nats(1.0, [math.e - 1], 1.0) == pytest.approx(1.0)
    batch = instantaneous_rate(torch.tensor([1.0, 3.0]), torch.tensor([[1.0, 0.0], [1.0, 1.0]]), 1.0)
    assert batch.tolist() == pytest.approx([1.0, 4.0])


def test_evaluate_policy(samples_2x2):
    config = config_2x2.with_q(4)
    policy, report = calibrate_policy(PolicyKind.EBPP, samples_2x2, config)
    result = evaluate_policy(policy, samples_2x2)
    assert result.kind is PolicyKind.EBPP
    assert (result.n, result.seed, result.q) == (samples_2x2.n, 0, 4)
    assert result.lam == report.lambda_star
    assert result.interference == pytest.approx(report.achieved_interference, rel=1e-12)
    assert result.rate_nats == pytest.approx(result.rate_bits * math.log(2))
    assert 0 < result.rate_stderr < 0.05 * result.rate_bits
    assert result.interference_stderr > 0

    with pytest.raises(ValueError):
        evaluate_policy(policy, build_sample_set(0, 10, SystemConfig(m_t=3, m_r=2, n0=1, p_max=10)))


def test_rate_ordering(samples_2x2):
    saturation = config_2x2.eta_bar * config_2x2.p_max
    for fraction in [0.1, 0.25, 0.5, 0.9]:
        results = _evaluate_all(samples_2x2, config_2x2.with_q(fraction * saturation))
        assert rate_ordering_check(list(results.values())) == []
        ebpp, mebpp = results[PolicyKind.EBPP].rate_bits, results[PolicyKind.MEBPP].rate_bits
        iebpp, imebpp = results[PolicyKind.IEBPP].rate_bits, results[PolicyKind.IMEBPP].rate_bits
        assert abs(ebpp - mebpp) <= 0.03 * ebpp
        assert abs(iebpp - imebpp) <= 0.03 * iebpp


def test_rate_ordering_check_reports_violations(samples_2x2):
    config = config_2x2.with_q(4)
    fixed = evaluate_policy(CalibratedPolicy.uncalibrated(PolicyKind.FIXED, config), samples_2x2)
    # a nearly silent IEBPP falls far below FIXED
    weak = evaluate_policy(CalibratedPolicy(PolicyKind.IEBPP, 100.0, False, config), samples_2x2)
    violations = rate_ordering_check([weak, fixed])
    assert len(violations) == 1 and "IEBPP" in violations[0]

    other = evaluate_policy(CalibratedPolicy.uncalibrated(PolicyKind.FIXED, config_2x2.with_q(2)), samples_2x2)
    with pytest.raises(ValueError):
        rate_ordering_check([weak, other])
    assert rate_ordering_check([]) == []


def test_saturation_collapse(samples_2x2):
    config = config_2x2.with_q(config_2x2.eta_bar * config_2x2.p_max)
    results = _evaluate_all(samples_2x2, config)
    for kind in PolicyKind:
        policy = calibrate_policy(kind, samples_2x2, config)[0]
        assert (policy.powers(samples_2x2) == config.p_max).all()
    reference = results[PolicyKind.EBPP]
    for result in results.values():
        assert result.rate_bits == reference.rate_bits
        assert result.rate_stderr == reference.rate_stderr
        assert result.interference == reference.interference


def test_antenna_scaling():
    gaps, rates = {}, {}
    for m in [2, 5]:
        config = SystemConfig(m_t=m, m_r=m, n0=1, p_max=10)
        samples = build_sample_set(0, 20_000, config)
        config = config.with_q(0.25 * config.eta_bar * config.p_max)
        ebpp = evaluate_policy(calibrate_policy(PolicyKind.EBPP, samples, config)[0], samples).rate_bits
        fixed = evaluate_policy(calibrate_policy(PolicyKind.FIXED, samples, config)[0], samples).rate_bits
        gaps[m] = (ebpp - fixed) / fixed
        rates[m] = ebpp
    assert gaps[5] < gaps[2]
    assert rates[5] > rates[2]


def test_fixed_rate_matches_integral():
    # l ~ Exp(1) on a 1x1 link; FIXED transmits q / eta_bar
    config = SystemConfig(m_t=1, m_r=1, n0=1, p_max=10, q=2)
    samples = build_sample_set(4, 1_000_000, config)
    result = evaluate_policy(CalibratedPolicy.uncalibrated(PolicyKind.FIXED, config), samples)
    power = config.q / config.eta_bar
    # E{ln(1 + P l)} = exp(1 / P) E1(1 / P)
    expected = math.exp(1 / power) * special.exp1(1 / power) / math.log(2)
    assert abs(result.rate_bits - expected) <= 3 * result.rate_stderr


def test_single_sample_evaluation():
    config = SystemConfig(m_t=2, m_r=2, n0=1, p_max=10, q=3)
    samples = SampleSet.from_samples([ChannelSample((3.0, 0.5), 1.2)], config)
    policy = CalibratedPolicy(PolicyKind.EBPP, 0.4, False, config)
    result = evaluate_policy(policy, samples)
    assert result.rate_bits == instantaneous_rate(policy.power(samples[0]), samples[0].eigs, config.n0)
    assert result.rate_stderr == 0
    assert result.interference == pytest.approx(1.2 * policy.power(samples[0]))


@pytest.mark.parametrize("kind", list(PolicyKind))
def test_rate_below_peak_power(kind, samples_2x2):
    bound = instantaneous_rate(config_2x2.p_max, samples_2x2.eigs, config_2x2.n0).mean().item()
    for fraction in [0.25, 0.75, 1.0]:
        config = config_2x2.with_q(fraction * config_2x2.eta_bar * config_2x2.p_max)
        result = evaluate_policy(calibrate_policy(kind, samples_2x2, config)[0], samples_2x2)
        assert result.rate_bits <= bound * (1 + 1e-12)

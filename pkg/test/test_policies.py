import math

import pytest
import torch

from underlay.channel import ChannelSample, SystemConfig, build_sample_set
from underlay.policies import (CalibratedPolicy, PolicyKind, policy_power, policy_powers, saturation_check,
                               solve_stationarity, stationarity_residual)
from underlay.utils import stream_generator

config_2x2 = SystemConfig(m_t=2, m_r=2, n0=1, p_max=10)
optimized = [PolicyKind.EBPP, PolicyKind.MEBPP, PolicyKind.IEBPP, PolicyKind.IMEBPP]


def _random_lambdas(n: int, seed: int) -> torch.Tensor:
    # log-uniform on [1e-3, 1e3]
    u = torch.rand(n, generator=stream_generator(seed, 0), dtype=torch.float64)
    return 10 ** (6 * u - 3)


def test_policy_kind():
    assert PolicyKind.parse("ebpp") is PolicyKind.EBPP
    assert PolicyKind.parse(PolicyKind.FIXED) is PolicyKind.FIXED
    assert [k.order for k in PolicyKind] == [0, 1, 2, 3, 4]
    assert PolicyKind.MEBPP.uses_instantaneous_eta and not PolicyKind.MEBPP.uses_all_eigenvalues
    assert PolicyKind.IEBPP.uses_all_eigenvalues and not PolicyKind.IEBPP.uses_instantaneous_eta
    assert not PolicyKind.FIXED.is_optimized
    with pytest.raises(ValueError):
        PolicyKind.parse("waterfilling")


def test_stationarity_residual():
    assert stationarity_residual(1, [1, 1], 1, 1, 1) == pytest.approx(0)
    assert stationarity_residual(3, [0, 0], 2, 1.5, 1) == pytest.approx(-3)
    assert stationarity_residual(10, [4, 1], 0.01, 1, 1) == pytest.approx(4 / 41 + 1 / 11 - 0.01)

    batch = stationarity_residual(torch.tensor([0.0, 1.0]), torch.tensor([[1.0, 1.0], [1.0, 1.0]]), 1, 1, 1)
    assert batch.tolist() == pytest.approx([1, 0])


def test_solve_stationarity():
    assert solve_stationarity([1, 1], 1, 1, config_2x2) == pytest.approx(1.0, abs=1e-9)
    assert solve_stationarity([1], 2, 1, config_2x2) == 0
    assert solve_stationarity([4, 1], 0.01, 1, config_2x2) == 10
    assert solve_stationarity([0, 0], 1, 1, config_2x2) == 0

    with pytest.raises(ValueError):
        solve_stationarity([1, 1], 0, 1, config_2x2)
    with pytest.raises(ValueError):
        solve_stationarity([1, 1], 1, 0, config_2x2)


def test_solve_stationarity_case_boundaries():
    eigs = [2.0, 1.0]
    # residual at 0 vanishes: sum l / n0 = lam * eta
    assert solve_stationarity(eigs, 1.0, 3.0, config_2x2) == 0
    # residual at p_max vanishes
    at_peak = 2 / 21 + 1 / 11
    assert solve_stationarity(eigs, 1.0, at_peak, config_2x2) == 10
    # just inside both boundaries the root approaches the clipped values
    assert solve_stationarity(eigs, 1.0, 3.0 * (1 - 1e-9), config_2x2) == pytest.approx(0, abs=1e-6)
    assert solve_stationarity(eigs, 1.0, at_peak * (1 + 1e-9), config_2x2) == pytest.approx(10, abs=1e-5)


@pytest.mark.parametrize("m", [2, 5])
def test_kkt_residual(m):
    config = SystemConfig(m_t=m, m_r=m, n0=1, p_max=10)
    samples = build_sample_set(3, 2000, config)
    for lam in [0.1, 0.3, 1.0]:
        power = solve_stationarity(samples.eigs, lam, samples.eta, config)
        interior = (power > 0) & (power < config.p_max)
        assert interior.any()
        residual = stationarity_residual(power, samples.eigs, lam, samples.eta, config.n0)
        assert (residual[interior].abs() <= 1e-9 * lam * samples.eta[interior]).all()


def test_policy_power():
    config = SystemConfig(m_t=2, m_r=1, n0=1, p_max=10, q=2)
    assert policy_power(PolicyKind.MEBPP, ChannelSample((4.0,), 2.0), 1, config) == pytest.approx(0.25)
    assert policy_power(PolicyKind.MEBPP, ChannelSample((1.0,), 10.0), 1, config) == 0
    assert policy_power(PolicyKind.FIXED, ChannelSample((1.0,), 10.0), 0, config) == 1
    # eta_bar = 2
    assert policy_power(PolicyKind.IMEBPP, ChannelSample((4.0,), 100.0), 1, config) == pytest.approx(0.25)

    for kind in [PolicyKind.EBPP, PolicyKind.MEBPP]:
        assert policy_power(kind, ChannelSample((4.0,), 0.0), 1, config) == 10
        assert policy_power(kind, ChannelSample((0.0,), 0.0), 1, config) == 10

    with pytest.raises(ValueError):
        policy_power(PolicyKind.EBPP, ChannelSample((4.0,), 1.0), 0, config)


@pytest.mark.parametrize("kind", [PolicyKind.EBPP, PolicyKind.MEBPP])
def test_zero_channel_with_vanishing_price(kind):
    # lam * eta underflows to 0, the water level is infinite
    config = SystemConfig(m_t=2, m_r=1, n0=1, p_max=10)
    assert policy_power(kind, ChannelSample((0.0,), 1e-300), 1e-30, config) == 0
    assert policy_power(kind, ChannelSample((2.0,), 1e-300), 1e-30, config) == 10

    eigs = torch.tensor([[0.0], [3.0], [0.0]], dtype=torch.float64)
    eta = torch.tensor([1e-300, 1e-300, 1.0], dtype=torch.float64)
    power = policy_powers(kind, eigs, eta, 1e-30, config)
    assert not power.isnan().any()
    assert power.tolist() == [0.0, 10.0, 0.0]


def test_fixed_power_is_clipped():
    config = SystemConfig(m_t=2, m_r=1, n0=1, p_max=10, q=100)
    assert policy_power(PolicyKind.FIXED, ChannelSample((1.0,), 1.0), 0, config) == 10


def test_reduction_to_largest_eigenvalue():
    config = SystemConfig(m_t=2, m_r=1, n0=1, p_max=10)
    samples = build_sample_set(5, 1000, config)
    for lam in _random_lambdas(20, 1).tolist():
        ebpp = policy_powers(PolicyKind.EBPP, samples.eigs, samples.eta, lam, config)
        mebpp = policy_powers(PolicyKind.MEBPP, samples.eigs, samples.eta, lam, config)
        assert torch.equal(ebpp, mebpp)
        iebpp = policy_powers(PolicyKind.IEBPP, samples.eigs, samples.eta, lam, config)
        imebpp = policy_powers(PolicyKind.IMEBPP, samples.eigs, samples.eta, lam, config)
        assert torch.equal(iebpp, imebpp)


@pytest.mark.parametrize("kind", optimized)
def test_feasibility_and_monotonicity_in_lambda(kind):
    samples = build_sample_set(0, 2000, config_2x2)
    previous = None
    for lam in [1e-3, 1e-2, 0.1, 0.3, 1.0, 10.0, 1e3]:
        power = policy_powers(kind, samples.eigs, samples.eta, lam, config_2x2)
        assert ((power >= 0) & (power <= config_2x2.p_max)).all()
        if previous is not None:
            assert (power <= previous + 1e-9).all()
        previous = power


@pytest.mark.parametrize("kind", [PolicyKind.EBPP, PolicyKind.MEBPP])
def test_monotonicity_in_eta(kind):
    samples = build_sample_set(1, 2000, config_2x2)
    low = policy_powers(kind, samples.eigs, samples.eta, 0.2, config_2x2)
    high = policy_powers(kind, samples.eigs, samples.eta * 1.5, 0.2, config_2x2)
    assert (high <= low + 1e-9).all()


@pytest.mark.parametrize("kind", [PolicyKind.EBPP, PolicyKind.MEBPP])
def test_monotonicity_in_channel(kind):
    samples = build_sample_set(2, 2000, config_2x2)
    weak = policy_powers(kind, samples.eigs, samples.eta, 0.2, config_2x2)
    strong = policy_powers(kind, samples.eigs * 1.5, samples.eta, 0.2, config_2x2)
    assert (strong >= weak - 1e-9).all()

    # raising only the second eigenvalue never lowers the power of EBPP and leaves MEBPP untouched
    eigs = samples.eigs.clone()
    eigs[:, 1] = eigs[:, 0]
    raised = policy_powers(kind, eigs, samples.eta, 0.2, config_2x2)
    if kind is PolicyKind.EBPP:
        assert (raised >= weak - 1e-9).all()
    else:
        assert torch.equal(raised, weak)


def test_saturation_check():
    assert saturation_check(SystemConfig(m_t=2, m_r=2, n0=1, p_max=1, q=3))
    assert not saturation_check(SystemConfig(m_t=2, m_r=2, n0=1, p_max=10, q=3))
    assert saturation_check(SystemConfig(m_t=2, m_r=2, n0=1, p_max=1.5, q=3))


def test_calibrated_policy():
    samples = build_sample_set(0, 100, config_2x2)
    saturated = CalibratedPolicy.uncalibrated(PolicyKind.EBPP, config_2x2.with_q(20))
    assert saturated.saturated
    assert torch.equal(saturated.powers(samples), torch.full((100,), 10.0, dtype=torch.float64))
    assert saturated.power(samples[0]) == 10

    fixed = CalibratedPolicy.uncalibrated(PolicyKind.FIXED, config_2x2.with_q(2))
    assert not fixed.saturated
    assert fixed.power(samples[0]) == 1

    policy = CalibratedPolicy(PolicyKind.IEBPP, 0.5, False, config_2x2.with_q(2))
    assert policy.power(samples[3]) == pytest.approx(policy.powers(samples)[3].item())

    with pytest.raises(ValueError):
        CalibratedPolicy.uncalibrated(PolicyKind.EBPP, config_2x2.with_q(2))
    with pytest.raises(ValueError):
        CalibratedPolicy(PolicyKind.EBPP, 0.0, False, config_2x2.with_q(2))
    with pytest.raises(ValueError):
        CalibratedPolicy(PolicyKind.EBPP, 1.0, True, config_2x2.with_q(2))
    with pytest.raises(ValueError):
        CalibratedPolicy(PolicyKind.EBPP, math.nan, False, config_2x2.with_q(2))

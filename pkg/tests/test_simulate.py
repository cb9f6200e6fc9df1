import numpy as np
import pytest
from hypothesis import given, strategies as st

from lbifault.model import EventList, ModelError, SparseEstimate, residual, synthesize
from lbifault.simulate import (NoiseConfig, TestbenchConfig, draw_positions, generate_profile,
                               generate_testbench, profile_rng, two_fault_scenario)

SILENT = NoiseConfig.silent()


def test_pure_ramp():
    cfg = TestbenchConfig(n_profiles=1, n=3, n_events=0, slope=-0.1, noise=SILENT)
    y, truth = generate_profile(cfg, 0)
    np.testing.assert_allclose(y.samples, [-0.1, -0.2, -0.3])
    assert len(truth) == 0


@given(st.integers(0, 2**32), st.integers(0, 50), st.integers(2, 300), st.integers(0, 6))
def test_noiseless_profile_is_model_consistent(seed, idx, n, k):
    k = min(k, n)
    cfg = TestbenchConfig(n=n, n_events=k, noise=SILENT, seed=seed)
    y, truth = generate_profile(cfg, idx)
    beta = SparseEstimate.from_events(n, truth, cfg.slope)
    assert np.all(residual(y, beta) == 0)
    assert np.all((truth.magnitudes <= -cfg.mag_min) & (truth.magnitudes >= -cfg.mag_max))
    assert np.all((truth.positions >= 1) & (truth.positions <= n))


def test_determinism_and_order_independence():
    cfg = TestbenchConfig(n_profiles=4, n=500, seed=42)
    a = generate_testbench(cfg)
    b = generate_profile(cfg, 3)
    assert np.array_equal(a[3][0].samples, b[0].samples)
    assert a[3][1] == b[1]
    assert generate_testbench(TestbenchConfig(n_profiles=1, n=500, seed=42))[0][1] == a[0][1]


def test_default_testbench_shape():
    cfg = TestbenchConfig(n_profiles=100, n=15000, n_events=5)
    tb = generate_testbench(cfg)
    assert len(tb) == 100
    assert all(y.n == 15000 and len(t) == 5 for y, t in tb)


def test_disjoint_seeds_differ():
    same = 0
    for i in range(100):
        a = generate_profile(TestbenchConfig(n=15000, seed=1), i)[1]
        b = generate_profile(TestbenchConfig(n=15000, seed=2), i)[1]
        same += np.array_equal(a.positions, b.positions)
    assert same == 0


@given(st.integers(0, 1000), st.integers(10, 400), st.integers(1, 6), st.integers(0, 40))
def test_min_separation(seed, n, count, sep):
    rng = profile_rng(seed, 0)
    if n - (count - 1) * (max(sep, 1) - 1) < count:
        with pytest.raises(ModelError):
            draw_positions(rng, n, count, sep)
        return
    pos = draw_positions(rng, n, count, sep)
    assert pos.size == count and pos[0] >= 1 and pos[-1] <= n
    assert np.all(np.diff(pos) >= max(sep, 1))


def test_too_many_events():
    with pytest.raises(ModelError):
        generate_profile(TestbenchConfig(n=4, n_events=5), 0)


def test_noise_std_matches_envelope():
    cfg = NoiseConfig(sigma0=0.1, growth=0.002)
    n, draws = 400, 10_000
    samples = np.empty((draws, n))
    base = TestbenchConfig(n=n, n_events=0, slope=0.0, noise=cfg, seed=9)
    for i in range(draws):
        samples[i] = generate_profile(base, i)[0].samples
    emp = samples.std(axis=0)
    sig = cfg.sigma(n)
    assert np.all(np.abs(emp / sig - 1) < 0.05)


def test_noise_config_validation():
    assert np.all(SILENT.sigma(5) == 0)
    with pytest.raises(ModelError):
        NoiseConfig(sigma0=-1)
    with pytest.raises(ModelError):
        NoiseConfig(kind="pink")


def test_config_round_trip():
    cfg = TestbenchConfig(n=77, noise=NoiseConfig(sigma0=0.2, growth=1e-4), seed=5)
    assert TestbenchConfig.from_dict(cfg.to_dict()) == cfg


def test_two_fault_scenario():
    y, truth = two_fault_scenario(100, 40, 5, -3.0, -1.0, slope=-0.01)
    assert truth.positions.tolist() == [40, 45]
    a = np.zeros((100, 101))
    for k in range(100):
        a[k, 0] = k + 1
        a[k, 1 : k + 2] = 1
    beta = np.zeros(101)
    beta[0], beta[40], beta[45] = -0.01, -3.0, -1.0
    np.testing.assert_allclose(y.samples, a @ beta, atol=1e-12)
    single, _ = two_fault_scenario(100, 40, 5, -3.0, 0.0, slope=-0.01)
    beta[45] = 0
    assert np.array_equal(single.samples, synthesize(beta))
    with pytest.raises(ModelError):
        two_fault_scenario(100, 98, 5, -1, -1)

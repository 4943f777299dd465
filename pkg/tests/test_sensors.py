import math

import numpy as np
import pytest

from velaid.geom3 import euler_to_rotation
from velaid.rigid_body import NOMINAL_B, TruthState, WorldConstants, truth_step_stages
from velaid.sensors import (
    RNG_ALGORITHM,
    MagneticDisturbance,
    SensorSuite,
    actual_field,
    measure,
    with_stages,
)

WORLD = WorldConstants()


def _truth():
    return TruthState(0.0, np.array([3.0, -1.0, 0.5]), euler_to_rotation((0.2, -0.1, 1.3)), WORLD)


def test_ideal_sensors_reproduce_truth():
    s = _truth()
    w, a = np.array([0.1, 0.2, 0.3]), np.array([0.0, 1.0, -9.0])
    m = measure(s, w, a, SensorSuite.ideal(), WORLD.B, SensorSuite.ideal().make_rng())
    assert np.array_equal(m.v_m, s.v)
    assert np.array_equal(m.omega_m, w)
    assert np.array_equal(m.a_m, a)
    assert np.array_equal(m.beta_m, s.beta)


def test_table1_values():
    suite = SensorSuite.table1()
    assert np.array_equal(suite.b_v, [-0.10, 0.30, -0.05])
    assert np.array_equal(suite.b_omega, [0.0250, -0.0300, -0.0175])
    assert np.array_equal(suite.b_a, [0.05, 0.04, -0.02])
    assert np.array_equal(suite.b_beta, [0.024, -0.020, -0.018])
    assert np.all(suite.var_v == 2e-5) and np.all(suite.var_omega == 2e-7)
    assert np.all(suite.var_a == 1e-5) and np.all(suite.var_beta == 1e-7)


def test_bias_only_velocity():
    suite = SensorSuite.table1().noise_free()
    s = TruthState(0.0, np.zeros(3), np.eye(3), WORLD)
    m = measure(s, np.zeros(3), np.zeros(3), suite, WORLD.B, suite.make_rng())
    assert np.allclose(m.v_m, [-0.10, 0.30, -0.05], atol=0.0)


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        SensorSuite(var_a=[-1.0, 0.0, 0.0])


def _noise_samples(n=100_000):
    suite = SensorSuite(var_v=[2e-5] * 3, var_omega=[2e-7] * 3, var_a=[1e-5] * 3, var_beta=[1e-7] * 3,
                        rng_seed=11)
    rng = suite.make_rng()
    s = TruthState(0.0, np.zeros(3), np.eye(3), WORLD)
    zero = np.zeros(3)
    out = np.empty((n, 4, 3))
    for i in range(n):
        m = measure(s, zero, zero, suite, zero, rng)
        out[i] = (m.v_m, m.omega_m, m.a_m, m.beta_m)
    return out


@pytest.fixture(scope="module")
def noise():
    return _noise_samples()


def test_noise_variance(noise):
    var = noise.var(axis=0)
    assert np.all(np.abs(var[2] / 1e-5 - 1) < 0.05)
    assert np.all(np.abs(var[0] / 2e-5 - 1) < 0.05)
    assert np.all(np.abs(var[3] / 1e-7 - 1) < 0.05)


def test_noise_channels_uncorrelated(noise):
    flat = noise.reshape(len(noise), 12)
    c = np.corrcoef(flat.T)
    off = c[~np.eye(12, dtype=bool)]
    assert np.max(np.abs(off)) < 0.02


def test_measurement_stream_reproducible():
    suite = SensorSuite.table1(rng_seed=42)
    s = _truth()
    w, a = np.ones(3), np.ones(3)
    r1, r2 = suite.make_rng(), suite.make_rng()
    for _ in range(50):
        m1 = measure(s, w, a, suite, WORLD.B, r1)
        m2 = measure(s, w, a, suite, WORLD.B, r2)
        assert np.array_equal(m1.beta_m, m2.beta_m) and np.array_equal(m1.v_m, m2.v_m)
    assert RNG_ALGORITHM == "numpy.random.PCG64"


def test_disturbance_profile():
    d = MagneticDisturbance()
    assert np.array_equal(actual_field(10.0, NOMINAL_B, d), NOMINAL_B)
    assert np.array_equal(actual_field(d.t_start, NOMINAL_B, d), NOMINAL_B)
    assert np.array_equal(actual_field(d.t_end, NOMINAL_B, d), NOMINAL_B)
    assert np.array_equal(actual_field(90.0, NOMINAL_B, None), NOMINAL_B)
    angles = [d.angle(t) for t in np.linspace(80, 100, 2001)]
    assert max(abs(x) for x in angles) > 0.5
    for t in np.linspace(79, 101, 441):
        assert abs(np.linalg.norm(actual_field(t, NOMINAL_B, d)) - 1.0) < 1e-15
    # C1 at the window edges: the slope of the envelope vanishes
    h = 1e-4
    assert abs(d.angle(d.t_start + h)) < 1e-6
    assert abs(d.angle(d.t_end - h)) < 1e-6
    with pytest.raises(ValueError):
        MagneticDisturbance(t_start=5.0, t_end=5.0)


def test_disturbed_field_reaches_magnetometer():
    d = MagneticDisturbance()
    s = _truth()
    B = actual_field(90.0, NOMINAL_B, d)
    m = measure(s, np.zeros(3), np.zeros(3), SensorSuite.ideal(), B, SensorSuite.ideal().make_rng())
    assert np.allclose(m.beta_m, s.R.T @ B, atol=1e-15)
    assert not np.allclose(m.beta_m, s.beta)


def test_stage_samples_hold_bias_and_noise():
    suite = SensorSuite.table1(rng_seed=3)
    s = _truth()
    w, a = np.array([0.4, -0.2, 0.1]), np.array([0.0, 0.0, -9.81])
    nxt, stages = truth_step_stages(s, w, a, 0.005)
    m = measure(s, w, a, suite, WORLD.B, suite.make_rng())
    m = with_stages(m, s, stages, (WORLD.B, WORLD.B, WORLD.B))
    assert np.array_equal(m.v_m_stages[0], m.v_m)
    assert np.array_equal(m.beta_m_stages[0], m.beta_m)
    dv = m.v_m - s.v
    for v, vm in zip(stages.v, m.v_m_stages):
        assert np.allclose(vm - v, dv, atol=1e-14)
    assert np.allclose(m.beta_m_stages[3] - nxt.beta, m.beta_m - s.beta, atol=1e-14)
    assert math.isfinite(float(np.sum(m.beta_m_stages)))

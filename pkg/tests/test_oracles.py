import numpy as np
import pytest

from fairpen.oracles import (
    DiscreteJoint,
    SyntheticBiasSpec,
    brute_force_ks,
    exact_geo_discriminator_oracle,
    synth_bias,
    table5_toy,
    table5_true_ratios,
)


def test_table5_true_ratios_match_published_values():
    true = table5_true_ratios()
    assert true[(1, 1)] == pytest.approx(1.1877, abs=5e-5)
    assert true[(0, 1)] == pytest.approx(0.8123, abs=5e-5)
    assert true[(1, 0)] == pytest.approx(0.6995, abs=5e-5)
    assert true[(0, 0)] == pytest.approx(1.3005, abs=5e-5)


def test_table5_toy_marginals():
    ds = table5_toy(20000, seed=0)
    a = ds.A[:, 0]
    y = ds.Y
    assert abs(a.mean() - 0.5) < 0.02
    # P(Y=1|A=0) = sigma(0) = .5, P(Y=1|A=1) = sigma(1) ~ .731
    assert abs(y[a == 0].mean() - 0.5) < 0.02
    assert abs(y[a == 1].mean() - 0.7311) < 0.02


def test_table5_toy_deterministic():
    d1 = table5_toy(100, seed=5)
    d2 = table5_toy(100, seed=5)
    assert np.array_equal(d1.A, d2.A) and np.array_equal(d1.Y, d2.Y)


def test_synth_bias_shapes_and_rho_effect():
    ds = synth_bias(SyntheticBiasSpec(n=5000, rho=2.0, seed=0))
    assert ds.n == 5000 and ds.p == 2
    a = ds.sensitive_raw("a")
    x1 = ds.destandardized_features()[:, 0]
    strong = np.corrcoef(a, x1)[0, 1]
    weak = np.corrcoef(
        synth_bias(SyntheticBiasSpec(n=5000, rho=0.0, seed=0)).sensitive_raw("a"),
        synth_bias(SyntheticBiasSpec(n=5000, rho=0.0, seed=0)).destandardized_features()[:, 0],
    )[0, 1]
    assert strong > 0.5 and abs(weak) < 0.05


def test_discrete_joint_validation():
    with pytest.raises(ValueError):
        DiscreteJoint(((0.0, 1.0),), np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        DiscreteJoint(((0.0, 1.0),), np.array([0.5, 0.5, 0.0]))
    DiscreteJoint(((0.0, 1.0),), np.array([0.4, 0.6]))


def test_brute_force_ks_hand_example():
    s = np.array([0.1, 0.2, 0.8, 0.9])
    assert brute_force_ks(s, np.array([True, True, False, False])) == pytest.approx(0.5)
    assert brute_force_ks(s, np.ones(4, dtype=bool)) == 0.0


def test_exact_geo_oracle_validation():
    good = np.full((2, 2, 2), 0.125)
    with pytest.raises(ValueError):
        exact_geo_discriminator_oracle(good * 2.0, np.ones((2, 2)))
    with pytest.raises(ValueError):
        exact_geo_discriminator_oracle(good, np.ones((3, 2)))
    with pytest.raises(ValueError):
        exact_geo_discriminator_oracle(good, np.zeros((2, 2)))


def test_exact_geo_oracle_reduces_to_conditional_prop1_form():
    # independent (A, Y) and beta = 1: D* = p(s|a,y) / (p(s|a,y) + p(s|y))
    rng = np.random.default_rng(0)
    p_s_given_ay = rng.random((2, 2, 2)) + 0.1
    p_s_given_ay /= p_s_given_ay.sum(axis=0, keepdims=True)
    p_a = np.array([0.4, 0.6])
    p_y = np.array([0.3, 0.7])
    joint = p_s_given_ay * (p_a[:, None] * p_y[None, :])[None, :, :]
    table = exact_geo_discriminator_oracle(joint, np.ones((2, 2)))
    p_s_given_y = (p_s_given_ay * p_a[None, :, None]).sum(axis=1)
    expected = p_s_given_ay / (p_s_given_ay + p_s_given_y[:, None, :])
    assert np.allclose(table, expected, atol=1e-12)

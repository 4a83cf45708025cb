import math

import numpy as np
import pytest

from bpgm import (
    EntropyDgf,
    HyperbolicDgf,
    PowerDgf,
    bregman_div,
    parse_dgf,
    sc_constant,
    step_size,
    torus_grid,
    uniform_density,
)
from bpgm.grid import Density


def test_power_p2_is_half_square():
    d = PowerDgf(2.0)
    s = np.array([-2.0, 0.0, 3.0])
    assert np.allclose(d.eta(s), s**2 / 2.0)
    assert np.allclose(d.eta_prime(s), s)
    assert np.allclose(d.eta_second(np.array([1.0, 5.0])), 1.0)


def test_power_p15_hand_values():
    d = PowerDgf(1.5)
    # |s|^p / (p (p-1)) with p = 3/2
    assert d.eta(np.array([4.0]))[0] == pytest.approx(8.0 / 0.75)
    assert d.eta_prime(np.array([4.0]))[0] == pytest.approx(4.0)
    assert d.eta_prime(np.array([-4.0]))[0] == pytest.approx(-4.0)


@pytest.mark.parametrize("p", [1.0, 0.5, 2.5, -1.0])
def test_power_rejects_bad_exponent(p):
    with pytest.raises(ValueError):
        PowerDgf(p)


@pytest.mark.parametrize("token", ["p:2", "p:1.5", "hyp", "hyp:0.5"])
def test_prime_inverse_roundtrip_signed(token):
    d = parse_dgf(token)
    rng = np.random.default_rng(3)
    s = rng.uniform(-5.0, 5.0, 200)
    assert np.allclose(d.eta_prime_inv(d.eta_prime(s)), s, atol=1e-10)


def test_entropy_prime_inverse_roundtrip():
    d = EntropyDgf()
    s = np.geomspace(1e-8, 50.0, 100)
    assert np.allclose(d.eta_prime_inv(d.eta_prime(s)), s, rtol=1e-12)


def test_entropy_values():
    d = EntropyDgf()
    assert d.eta(np.array([1.0]))[0] == 0.0
    assert d.eta(np.array([0.0]))[0] == pytest.approx(1.0)  # s log s - s + 1 at 0
    with pytest.raises(ValueError):
        d.eta(np.array([-0.1]))


def test_hyperbolic_values():
    d = HyperbolicDgf(1.0)
    assert d.eta(np.array([0.0]))[0] == 0.0
    assert d.eta_prime(np.array([0.0]))[0] == 0.0
    # eta' = asinh(s / beta), inverse beta sinh(u)
    assert d.eta_prime_inv(np.array([1.0]))[0] == pytest.approx(1.1752011936438014)


def test_eta_second_positive():
    rng = np.random.default_rng(0)
    s_signed = rng.uniform(-3.0, 3.0, 50)
    for d in (PowerDgf(2.0), PowerDgf(1.5), HyperbolicDgf()):
        assert np.all(d.eta_second(s_signed) > 0)
    assert np.all(EntropyDgf().eta_second(np.abs(s_signed) + 1e-6) > 0)


def test_bregman_entropy_constant_densities():
    g = torus_grid(1, 300)
    f = Density(g, np.full(300, 2.0))
    u = uniform_density(g)
    # integral of 2 log 2 - 2 + 1
    assert bregman_div(EntropyDgf(), f, u) == pytest.approx(2.0 * math.log(2.0) - 1.0)


def test_bregman_power2_is_half_l2():
    g = torus_grid(1, 64)
    rng = np.random.default_rng(1)
    a = Density(g, rng.standard_normal(64))
    b = Density(g, rng.standard_normal(64))
    expect = 0.5 * np.sum(g.weights * (a.values - b.values) ** 2)
    assert bregman_div(PowerDgf(2.0), a, b) == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("token", ["p:2", "p:1.5", "ent", "hyp", "hyp:0.01"])
def test_bregman_nonnegative_and_zero_at_equality(token):
    d = parse_dgf(token)
    g = torus_grid(1, 40)
    rng = np.random.default_rng(7)
    for _ in range(20):
        a, b = rng.standard_normal(40), rng.standard_normal(40)
        if d.domain == "nonnegative":
            a, b = np.abs(a), np.abs(b) + 1e-12
        da = Density(g, a)
        assert bregman_div(d, da, Density(g, b)) >= -1e-12
        assert bregman_div(d, da, da) == pytest.approx(0.0, abs=1e-12)


def test_entropy_divergence_infinite_outside_support():
    g = torus_grid(1, 4)
    f = Density(g, np.array([1.0, 1.0, 1.0, 1.0]))
    h = Density(g, np.array([0.0, 2.0, 1.0, 1.0]))
    assert bregman_div(EntropyDgf(), f, h) == math.inf


def test_bregman_rejects_grid_mismatch():
    a = uniform_density(torus_grid(1, 10))
    b = uniform_density(torus_grid(1, 20))
    with pytest.raises(ValueError):
        bregman_div(PowerDgf(2.0), a, b)


def test_sc_constant_values():
    assert sc_constant(PowerDgf(2.0), 7.0) == pytest.approx(0.5)
    assert sc_constant(HyperbolicDgf(0.1), 1.0) == pytest.approx(1.0 / 2.2)
    assert sc_constant(EntropyDgf(), 4.0) == pytest.approx(1.0 / 8.0)
    with pytest.raises(ValueError):
        sc_constant(PowerDgf(2.0), 0.0)


def test_step_size_values():
    # (K + beta)^(p-2) / (phi_sup^2 lip_grad)
    assert step_size(PowerDgf(2.0), 3.0, 2.0, 2.0) == pytest.approx(1.0 / 8.0)
    assert step_size(EntropyDgf(), 2.0, 1.0, 1.0) == pytest.approx(0.5)
    assert math.isinf(step_size(PowerDgf(2.0), 1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        step_size(PowerDgf(2.0), 1.0, -1.0, 1.0)


def test_parse_dgf_tokens():
    assert parse_dgf("p:2").p == 2.0
    assert parse_dgf("ent").name == "ent"
    assert parse_dgf("hyp").beta == pytest.approx(1e-3)
    assert parse_dgf("hyp:0.5").beta == 0.5
    for bad in ("q:2", "p:", "p:abc", "", "hyp:x"):
        with pytest.raises(ValueError):
            parse_dgf(bad)

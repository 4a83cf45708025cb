from dataclasses import replace

import numpy as np
import pytest

from bpgm import (
    EntropyDgf,
    HyperbolicDgf,
    PowerDgf,
    build_problem,
    entropy_closed_form_check,
    fd_gradient_check,
    gamma_bound_check,
    kkt_sweep,
    mirror_flow_equivalence,
    pinsker_sample,
    run_all_checks,
    torus_grid,
)
from bpgm.objective import SmoothObjective
from bpgm.verify import flow_test_problem


def test_fd_gradient_check_clean():
    problem = build_problem("deconv1d", grid_size=50, lam=0.1)
    assert fd_gradient_check(problem, seed=0) <= 1e-6


def test_fd_gradient_check_catches_wrong_gradient():
    class Crooked(SmoothObjective):
        def gradient(self, weights, f):
            return 1.01 * super().gradient(weights, f)

    problem = build_problem("deconv1d", grid_size=50)
    sm = problem.smooth
    crooked = Crooked(sm.features, sm.outer, sm.feature_weights, sm.phi_lip_class)
    bad = replace(problem, smooth=crooked)
    assert fd_gradient_check(bad, seed=0) > 1e-3


def test_entropy_closed_form_check_contract():
    check = entropy_closed_form_check(torus_grid(1, 300), k_max=1000)
    assert check.max_rel_dev <= 1e-10
    assert check.gap_slope == pytest.approx(-1.0, abs=0.05)
    assert check.checkpoints[0] == 1
    assert check.checkpoints[-1] == 1000


@pytest.mark.parametrize("dgf", [PowerDgf(2.0), PowerDgf(1.5), EntropyDgf(), HyperbolicDgf()])
def test_pinsker_margins_nonnegative(dgf):
    worst = pinsker_sample(dgf, torus_grid(1, 80), K=1.0, n_samples=300, seed=1)
    assert worst >= -1e-12


def test_pinsker_catches_deflated_divergence():
    class Deflated(PowerDgf):
        def divergence_values(self, weights, f, g):
            return 0.5 * super().divergence_values(weights, f, g)

    worst = pinsker_sample(Deflated(2.0), torus_grid(1, 80), n_samples=300, seed=1)
    assert worst < -1e-6


def test_kkt_sweep_all_combinations():
    results = kkt_sweep(steps=50, m=30)
    assert len(results) == 12
    assert {name for name, _ in results} == {"p:2", "ent", "hyp:0.001"}
    assert {kind for _, kind in results} == {"nonneg_tv", "simplex", "tv", "tv_ball"}
    assert max(results.values()) <= 1e-8


@pytest.mark.parametrize("variant", ["square", "diff"])
def test_mirror_flow_halving(variant):
    check = mirror_flow_equivalence(variant=variant, step=1e-3, horizon=0.5)
    assert check.gap_half < check.gap_step
    assert check.ratio == pytest.approx(2.0, abs=0.2)


def test_mirror_flow_unknown_variant():
    with pytest.raises(ValueError):
        mirror_flow_equivalence(variant="cube")


def test_flow_test_problem_shape():
    problem = flow_test_problem(m=50)
    assert problem.grid.size == 50
    assert problem.reg.lam == 0.0
    assert problem.smooth.features.shape == (1, 50)


def test_gamma_bound_check_short():
    assert gamma_bound_check(k_max=5000) <= 0.0


def test_run_all_checks_fast():
    results = run_all_checks(seed=0, fast=True)
    names = [r.name for r in results]
    assert len(names) == len(set(names)) == 7
    for r in results:
        assert r.passed, f"{r.name}: {r.detail}"
        assert r.detail

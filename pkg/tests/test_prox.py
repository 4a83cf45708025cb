import numpy as np
import pytest

from bpgm import (
    MirrorState,
    bregman_step,
    kkt_residual,
    nonneg_tv,
    parse_dgf,
    simplex,
    soft_threshold,
    solve_kappa,
    torus_grid,
    tv,
    tv_ball,
)

DGF_TOKENS = ("p:2", "ent", "hyp")
REGS = {
    "nonneg_tv": nonneg_tv(0.05),
    "simplex": simplex(),
    "tv": tv(0.05),
    "tv_ball": tv_ball(1.0),
}


def test_soft_threshold_hand_values():
    assert soft_threshold(np.array([0.5]), 0.2)[0] == pytest.approx(0.3)
    assert soft_threshold(np.array([-0.5]), 0.2)[0] == pytest.approx(-0.3)
    assert soft_threshold(np.array([-0.1]), 0.2)[0] == 0.0
    assert soft_threshold(np.array([0.0]), 0.0)[0] == 0.0


def test_solve_kappa_mass_hand_case():
    # p=2: primal is max(v - kappa, 0); v = (2, 0), weights 1/2 each
    # already has mass 1 at kappa = 0
    g = torus_grid(1, 2)
    d = parse_dgf("p:2")
    kappa = solve_kappa(d, g.weights, np.array([2.0, 0.0]), "mass_eq_1")
    assert kappa == pytest.approx(0.0, abs=1e-10)


def test_solve_kappa_mass_shifts():
    g = torus_grid(1, 2)
    d = parse_dgf("p:2")
    # v = (4, 2): mass at kappa is ((4-k) + (2-k))/2 = 3 - k
    kappa = solve_kappa(d, g.weights, np.array([4.0, 2.0]), "mass_eq_1")
    assert kappa == pytest.approx(2.0, abs=1e-9)


@pytest.mark.parametrize("token", DGF_TOKENS)
def test_solve_kappa_mass_property(token):
    d = parse_dgf(token)
    g = torus_grid(1, 50)
    rng = np.random.default_rng(4)
    for _ in range(20):
        v = rng.standard_normal(50) * 3.0
        kappa = solve_kappa(d, g.weights, v, "mass_eq_1")
        shifted = v - kappa
        if d.domain == "signed":
            f = d.eta_prime_inv(np.maximum(shifted, 0.0))
        else:
            f = d.eta_prime_inv(shifted)
        assert float(np.sum(g.weights * f)) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("token", DGF_TOKENS)
def test_solve_kappa_norm_bound(token):
    d = parse_dgf(token)
    g = torus_grid(1, 50)
    rng = np.random.default_rng(8)
    for _ in range(20):
        v = rng.standard_normal(50) * 5.0
        if d.domain == "nonnegative":
            v = np.abs(v)
        kappa = solve_kappa(d, g.weights, v, "l1_le_K", K=0.5)
        assert kappa >= 0.0
        thr = soft_threshold(v, kappa) if d.domain == "signed" else v - kappa
        f = d.eta_prime_inv(thr)
        assert float(np.sum(g.weights * np.abs(f))) <= 0.5 + 1e-8


def test_solve_kappa_norm_already_feasible():
    d = parse_dgf("p:2")
    g = torus_grid(1, 10)
    v = np.full(10, 0.01)
    assert solve_kappa(d, g.weights, v, "l1_le_K", K=1.0) == 0.0


def test_solve_kappa_input_validation():
    d = parse_dgf("p:2")
    g = torus_grid(1, 4)
    with pytest.raises(ValueError):
        solve_kappa(d, g.weights, np.array([np.inf, 0, 0, 0]), "mass_eq_1")
    with pytest.raises(ValueError):
        solve_kappa(d, g.weights, np.zeros(4), "l1_le_K", K=-1.0)
    with pytest.raises(ValueError):
        solve_kappa(d, g.weights, np.zeros(4), "mass_le_2")


def _random_state(dgf, grid, rng):
    f = rng.standard_normal(grid.size)
    if dgf.domain == "nonnegative":
        f = np.abs(f) + 1e-3
    return MirrorState.from_primal(dgf, grid, f)


def _prox_objective(dgf, reg, grid, state, grad, s_eff, f):
    w = grid.weights
    lin = float(np.sum(w * grad * f))
    h = reg.value(w, f)
    div = dgf.divergence_values(w, f, state.primal)
    return lin + h + div / s_eff


@pytest.mark.parametrize("token", DGF_TOKENS)
@pytest.mark.parametrize("reg_kind", sorted(REGS))
def test_prox_point_beats_feasible_perturbations(token, reg_kind):
    """The returned point must minimize the prox objective; random
    feasible competitors in its neighborhood cannot do better."""
    dgf = parse_dgf(token)
    reg = REGS[reg_kind]
    grid = torus_grid(1, 30)
    w = grid.weights
    rng = np.random.default_rng(17)
    state = _random_state(dgf, grid, rng)
    grad = rng.standard_normal(30)
    s_eff = 0.3
    nxt = bregman_step(dgf, reg, state, grad, s_eff)
    assert reg.violation(w, nxt.primal) <= 1e-8
    base = _prox_objective(dgf, reg, grid, state, grad, s_eff, nxt.primal)
    for scale in (1e-2, 1e-4):
        for _ in range(50):
            cand = nxt.primal + scale * rng.standard_normal(30)
            if dgf.domain == "nonnegative":
                cand = np.abs(cand)
            if reg_kind == "simplex":
                if dgf.domain == "signed":
                    cand = np.maximum(cand, 0.0)
                cand = cand / float(np.sum(w * cand))
            elif reg_kind == "tv_ball":
                l1 = float(np.sum(w * np.abs(cand)))
                if l1 > reg.radius:
                    cand = cand * (reg.radius / l1)
            elif reg_kind == "nonneg_tv":
                cand = np.maximum(cand, 0.0)
            trial = _prox_objective(dgf, reg, grid, state, grad, s_eff, cand)
            assert trial >= base - 1e-10


@pytest.mark.parametrize("token", DGF_TOKENS)
@pytest.mark.parametrize("reg_kind", sorted(REGS))
def test_prox_feasibility_invariants(token, reg_kind):
    dgf = parse_dgf(token)
    reg = REGS[reg_kind]
    grid = torus_grid(1, 40)
    w = grid.weights
    rng = np.random.default_rng(23)
    state = MirrorState.from_primal(dgf, grid, np.ones(40))
    for _ in range(30):
        grad = rng.standard_normal(40) * 2.0
        state = bregman_step(dgf, reg, state, grad, 0.2)
        f = state.primal
        assert np.all(np.isfinite(f))
        if reg_kind == "simplex":
            assert float(np.sum(w * f)) == pytest.approx(1.0, abs=1e-9)
            assert np.all(f >= -1e-12)
        if reg_kind == "tv_ball":
            assert float(np.sum(w * np.abs(f))) <= reg.radius + 1e-8
        if reg_kind == "nonneg_tv" or dgf.domain == "nonnegative":
            assert np.all(f >= -1e-12)


def test_bregman_step_validation():
    dgf = parse_dgf("p:2")
    grid = torus_grid(1, 8)
    state = MirrorState.from_primal(dgf, grid, np.ones(8))
    with pytest.raises(ValueError):
        bregman_step(dgf, tv(0.1), state, np.zeros(8), 0.0)
    with pytest.raises(ValueError):
        bregman_step(dgf, tv(0.1), state, np.full(8, np.nan), 0.1)


@pytest.mark.parametrize("token", DGF_TOKENS)
@pytest.mark.parametrize("reg_kind", sorted(REGS))
def test_kkt_residual_small_on_true_steps(token, reg_kind):
    dgf = parse_dgf(token)
    reg = REGS[reg_kind]
    grid = torus_grid(1, 40)
    rng = np.random.default_rng(31)
    state = MirrorState.from_primal(dgf, grid, np.ones(40))
    s = 0.15
    for _ in range(10):
        grad = rng.standard_normal(40)
        nxt = bregman_step(dgf, reg, state, grad, s)
        report = kkt_residual(dgf, reg, state, nxt, grad, s)
        assert report.worst() <= 1e-8
        state = nxt


def test_kkt_residual_detects_corrupted_step():
    """Perturbing the prox output must push the residual above the
    acceptance threshold; otherwise the check has no teeth."""
    dgf = parse_dgf("p:2")
    reg = tv(0.05)
    grid = torus_grid(1, 40)
    rng = np.random.default_rng(37)
    state = MirrorState.from_primal(dgf, grid, np.ones(40))
    grad = rng.standard_normal(40)
    nxt = bregman_step(dgf, reg, state, grad, 0.15)
    bad_u = nxt.u + 1e-3 * rng.standard_normal(40)
    bad = MirrorState(dgf, grid, bad_u, dgf.eta_prime_inv(bad_u))
    assert kkt_residual(dgf, reg, state, bad, grad, 0.15).worst() > 1e-5


def test_kkt_report_worst():
    from bpgm.prox import KktReport

    assert KktReport(1e-3, 1e-6).worst() == 1e-3
    assert KktReport(0.0, 2e-4).worst() == 2e-4

import csv

import numpy as np
import pytest

from blockrefit.linops import Identity
from blockrefit.penalties import KINDS, AnchorBlock, block_norm, prox_conj
from blockrefit.problems import add_gaussian_noise, build_scene, make_problem, psnr
from blockrefit.solvers import (
    TRACE_COLUMNS,
    DivergenceError,
    DRParams,
    PDParams,
    detect_support_dr,
    detect_support_pd,
    dr_joint_solve,
    dr_solve,
    ib_boost,
    pd_joint_solve,
    pd_solve,
    posterior_refit,
    prox_omega,
    prox_omega_conj,
    psi_direction,
)


@pytest.fixture(scope="module")
def small():
    x0 = build_scene("shapes128")[::4, ::4].copy()
    y = add_gaussian_noise(x0, 20, 7)
    return make_problem("tv_gray", y, 40.0, x_true=x0)


# --- parameters ---------------------------------------------------------------


def test_pd_params_step_condition():
    lam, norm = 1.0, 2.8
    tau, kappa, beta = PDParams().resolve(norm, lam)
    assert tau * kappa * norm**2 < 1
    assert beta == pytest.approx(1e-8 * lam)
    with pytest.raises(ValueError, match="tau\\*kappa"):
        PDParams(tau=1.0, kappa=1.0).resolve(norm, lam)
    with pytest.raises(ValueError):
        PDParams(theta=1.5)
    with pytest.raises(ValueError):
        PDParams(beta=0.0)
    with pytest.raises(ValueError):
        PDParams(iters=0)


@pytest.mark.parametrize("alpha", [0.0, 2.0, -1.0])
def test_dr_params_alpha_open_interval(alpha):
    with pytest.raises(ValueError):
        DRParams(alpha=alpha)


# --- support and anchors ---------------------------------------------------


def test_psi_direction_examples():
    lam, kappa = 2.0, 0.5
    a = psi_direction(np.array([lam + kappa, 0.0]), lam, kappa)
    np.testing.assert_allclose(a.direction, [1.0, 0.0])
    assert a.norm == pytest.approx(1.0)
    u = np.array([0.6, 0.8])
    assert psi_direction((lam + 1e-9) * u, lam, kappa).norm == pytest.approx(2e-9, rel=1e-4)
    nu = np.array([3.0, -1.0])
    np.testing.assert_allclose(psi_direction(4 * nu, 1.0, 1.0).direction,
                               psi_direction(nu, 1.0, 1.0).direction)
    with pytest.raises(ValueError):
        psi_direction(np.array([0.5, 0.0]), 1.0, 1.0)


def test_detect_support_strict_threshold():
    lam, beta = 1.0, 0.25
    nu = np.array([[0.5, 0.0], [lam + beta, 0.0], [lam + beta + 1e-12, 0.0]])
    assert detect_support_pd(nu, lam, beta).tolist() == [False, False, True]
    assert not detect_support_pd(np.full((4, 2), 0.5), lam, beta).any()
    with pytest.raises(ValueError):
        detect_support_pd(nu, lam, 0.0)
    z = np.array([[0.03, 0.0], [0.2, 0.0]])
    assert detect_support_dr(z, 0.1, 1.0, 1e-3).tolist() == [False, True]


def test_detect_support_synthetic_converged_dual():
    rng = np.random.default_rng(0)
    lam, kappa = 3.0, 0.7
    amp = np.where(rng.uniform(size=200) < 0.3, rng.uniform(0.1, 2.0, size=200), 0.0)
    dirs = rng.normal(size=(200, 2))
    dirs /= block_norm(dirs)[:, None]
    nu = (lam + kappa * amp)[:, None] * dirs
    # off-support duals sit strictly inside the ball
    nu[amp == 0] *= rng.uniform(0.1, 0.99, size=(int((amp == 0).sum()), 1))
    beta = 0.5 * kappa * amp[amp > 0].min()
    assert np.array_equal(detect_support_pd(nu, lam, beta), amp > 0)


def test_prox_omega_conj_dispatch():
    rng = np.random.default_rng(3)
    nu = rng.normal(size=(5, 6, 2))
    anchors = AnchorBlock.from_blocks(rng.normal(size=(5, 6, 2)))
    assert np.array_equal(prox_omega_conj(nu, anchors, np.zeros((5, 6), bool), "SD", 1.0, 1.0), nu)
    full = prox_omega_conj(nu, anchors, np.ones((5, 6), bool), "HO", 1.0, 1.0)
    along = np.sum(nu * anchors.direction, axis=-1)[..., None]
    np.testing.assert_allclose(full, nu - along * anchors.direction, atol=1e-14)
    mask = rng.uniform(size=(5, 6)) < 0.5
    mixed = prox_omega_conj(nu, anchors, mask, "SO", 1.0, 1.0)
    assert np.array_equal(mixed[~mask], nu[~mask])
    np.testing.assert_array_equal(
        mixed[mask], prox_conj("SO", nu[mask], AnchorBlock(anchors.direction[mask], anchors.norm[mask]), 1.0, 1.0)
    )


def test_prox_omega_conj_missing_anchor():
    nu = np.ones((2, 2))
    anchors = AnchorBlock(np.array([[1.0, 0.0], [np.nan, np.nan]]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError, match="missing anchor"):
        prox_omega_conj(nu, anchors, np.array([True, True]), "SD", 1.0, 1.0)
    # the missing anchor is fine when its block is off the mask
    prox_omega_conj(nu, anchors, np.array([True, False]), "QO", 1.0, 1.0)
    with pytest.raises(ValueError):
        prox_omega_conj(nu, anchors, np.array([False, True]), "QO", 1.0, 1.0)


def test_prox_omega_zeroes_off_mask():
    rng = np.random.default_rng(4)
    zeta = rng.normal(size=(6, 2))
    anchors = AnchorBlock.from_blocks(rng.normal(size=(6, 2)))
    mask = np.array([True, False, True, False, False, True])
    out = prox_omega(zeta, anchors, mask, "SD", 1.0, 0.5)
    assert not out[~mask].any()


# --- primal-dual ----------------------------------------------------------------


def test_pd_tiny_lambda_recovers_data(small):
    p = make_problem("tv_gray", small.y, 1e-8)
    r = pd_joint_solve(p, "SD", PDParams(iters=100), trace_every=0)
    for x in (r.x_hat, r.x_tilde):
        assert np.linalg.norm(x - p.y) <= 1e-4 * np.linalg.norm(p.y)


def test_pd_constant_image():
    p = make_problem("tv_gray", np.full((12, 12), 42.0), 5.0)
    r = pd_joint_solve(p, "QD", PDParams(iters=200), trace_every=0)
    np.testing.assert_allclose(r.x_hat, 42.0, rtol=1e-12)
    assert not r.support.any()
    assert np.array_equal(r.x_tilde, r.x_hat)


def test_biased_chain_bit_identical_to_plain_pd(small):
    plain, joint = [], []
    params = PDParams(iters=120)
    pd_solve(small, params, callback=lambda k, x: plain.append(x.copy()))
    for kind in ("HO", "SD"):
        joint.clear()
        pd_joint_solve(small, kind, params, callback=lambda k, st: joint.append(st.x_hat.copy()),
                       trace_every=0)
        assert len(joint) == len(plain)
        assert all(np.array_equal(a, b) for a, b in zip(plain, joint))


@pytest.mark.parametrize("kind", KINDS)
def test_refit_fidelity_not_worse(small, kind):
    r = pd_joint_solve(small, kind, PDParams(iters=2000), trace_every=0)
    f_hat, f_tilde = small.fidelity(r.x_hat), small.fidelity(r.x_tilde)
    assert f_tilde <= f_hat + 1e-6 * float(np.vdot(small.y, small.y))


def test_pd_objective_stationarity_proxy(small):
    r = pd_joint_solve(small, "SD", PDParams(iters=1500))
    obj = r.trace.column("objective_biased")
    assert abs(obj[-100:].mean() - obj.min()) <= 1e-3 * obj.min()


def test_deterministic_replay(small, tmp_path):
    a = pd_joint_solve(small, "SD", PDParams(iters=60))
    b = pd_joint_solve(small, "SD", PDParams(iters=60))
    a.trace.write_csv(tmp_path / "a.csv")
    b.trace.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_trace_columns_and_psnr(small, tmp_path):
    r = pd_joint_solve(small, "SO", PDParams(iters=30), trace_every=10)
    assert [row[0] for row in r.trace.rows] == [0, 10, 20, 29]
    r.trace.write_csv(tmp_path / "t.csv")
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRACE_COLUMNS
    last = dict(zip(rows[0], rows[-1]))
    assert float(last["psnr_biased"]) == pytest.approx(psnr(small.x_true, r.x_hat))
    assert int(last["support_size"]) == int(r.support.sum())


def test_trace_without_ground_truth_writes_nan(tmp_path):
    p = make_problem("tv_gray", np.arange(16.0).reshape(4, 4), 1.0)
    r = pd_joint_solve(p, "SD", PDParams(iters=3))
    assert np.isnan(r.trace.column("psnr_refit")).all()


class _Exploding(Identity):
    def __init__(self, after):
        self.calls = 0
        self.after = after

    def resolvent(self, tau, v):
        self.calls += 1
        out = super().resolvent(tau, v)
        return out * np.inf if self.calls > self.after else out


def test_divergence_detection(small):
    p = make_problem("tv_gray", small.y, 10.0, forward=_Exploding(after=10))
    p.forward.calls = 0  # construction probes the resolvent once
    with pytest.raises(DivergenceError) as info:
        pd_joint_solve(p, "SD", PDParams(iters=50))
    assert info.value.iteration == 5  # two resolvent calls per iteration


# --- Douglas-Rachford ---------------------------------------------------------


def test_dr_tiny_lambda_recovers_data(small):
    p = make_problem("tv_gray", small.y, 1e-8)
    r = dr_joint_solve(p, "QO", DRParams(alpha=1.0, tau=1.0, iters=100), trace_every=0)
    for x in (r.x_hat, r.x_tilde):
        assert np.linalg.norm(x - p.y) <= 1e-4 * np.linalg.norm(p.y)


def test_dr_biased_chain_matches_plain_dr(small):
    params = DRParams(alpha=1.2, tau=0.3, iters=80)
    x_plain, zeta_plain = dr_solve(small, params)
    r = dr_joint_solve(small, "SD", params, trace_every=0)
    assert np.array_equal(r.x_hat, x_plain)
    assert np.array_equal(r.state.zeta_hat, zeta_plain)


def test_dr_fixed_point_on_support(small):
    params = DRParams(alpha=1.0, tau=0.3, iters=4000)
    r = dr_joint_solve(small, "SD", params, trace_every=0)
    z = small.analysis(r.x_hat)
    nz = block_norm(z)
    on = nz > 1e-2 * nz.max()
    expected = z + params.tau * small.lam * z / np.maximum(nz, 1e-300)[..., None]
    err = block_norm(r.state.zeta_hat - expected)[on] / block_norm(expected)[on]
    assert err.max() <= 1e-4


def test_dr_and_pd_agree_small(small):
    x_pd, _ = pd_solve(small, PDParams(iters=3000))
    x_dr, _ = dr_solve(small, DRParams(alpha=1.0, tau=0.3, iters=3000))
    assert np.linalg.norm(x_pd - x_dr) <= 1e-3 * np.linalg.norm(x_pd)


# --- sequential refitting and boosting --------------------------------------------


def test_posterior_single_block_hd_stays_on_ray():
    # two constant halves: a single row of active vertical-difference blocks
    y = np.zeros((8, 8))
    y[4:] = 50.0
    y += add_gaussian_noise(np.zeros((8, 8)), 1.0, 3)
    p = make_problem("tv_gray", y, 5.0)
    x_hat, _ = pd_solve(p, PDParams(iters=3000))
    res = posterior_refit(p, "HD", x_hat, beta=1e-3, params=PDParams(iters=3000))
    zhat, zt = p.analysis(x_hat), p.analysis(res.x)
    for i, j in zip(*np.nonzero(res.support)):
        cos = np.dot(zhat[i, j], zt[i, j]) / (np.linalg.norm(zhat[i, j]) * np.linalg.norm(zt[i, j]))
        assert cos == pytest.approx(1.0, abs=1e-6)


def test_posterior_huge_beta_gives_mean(small):
    res = posterior_refit(small, "SD", small.y, beta=1e12, params=PDParams(iters=20000),
                           trace_every=0)
    assert not res.support.any()
    np.testing.assert_allclose(res.x, small.y.mean(), rtol=1e-6)


def test_posterior_rejects_bad_arguments(small):
    with pytest.raises(ValueError):
        posterior_refit(small, "SD", small.y, beta=0.0)
    with pytest.raises(ValueError):
        posterior_refit(small, "SD", small.y, beta=1.0, solver="admm")


def test_posterior_matches_joint_with_accurate_biased_solution(small):
    joint = pd_joint_solve(small, "SD", PDParams(iters=10000), trace_every=0)
    beta = 1e-8 * small.lam
    x_hat, _ = pd_solve(small, PDParams(iters=10000))
    post = posterior_refit(small, "SD", x_hat, beta=beta * 1e3, params=PDParams(iters=10000),
                           trace_every=0)
    diff = psnr(small.x_true, joint.x_tilde) - psnr(small.x_true, post.x)
    assert abs(diff) <= 0.3


def test_ib_boost_from_zero_is_biased_solution(small):
    params = PDParams(iters=400)
    x_hat, _ = pd_solve(small, params)
    boosted = ib_boost(small, np.zeros_like(small.y), params=params, trace_every=0)
    assert not boosted.support.any()
    np.testing.assert_allclose(boosted.x, x_hat, rtol=1e-12, atol=1e-12)


def test_ib_boost_improves_fidelity(small):
    x_hat, _ = pd_solve(small, PDParams(iters=3000))
    boosted = ib_boost(small, x_hat, params=PDParams(iters=3000), trace_every=0)
    assert small.fidelity(boosted.x) <= small.fidelity(x_hat) + 1e-6 * float(np.vdot(small.y, small.y))


def test_ib_boost_can_leave_the_support():
    # x_hat carries only the left edge; the data has a second strong edge
    y = np.zeros((6, 12))
    y[:, 4:] = 100.0
    y[:, 8:] = 200.0
    x_hat = np.zeros((6, 12))
    x_hat[:, 4:] = 100.0
    p = make_problem("tv_gray", y, 2.0)
    support = block_norm(p.analysis(x_hat)) > 0
    res = ib_boost(p, x_hat, support, params=PDParams(iters=3000), trace_every=0)
    active = block_norm(p.analysis(res.x)) > 1.0
    assert (active & ~support).any()


def test_ib_boost_steps(small):
    params = PDParams(iters=1500)
    x_hat, _ = pd_solve(small, params)
    one = ib_boost(small, x_hat, params=params, trace_every=0)
    again = ib_boost(small, one.x, params=params, trace_every=0,
                     support=block_norm(small.analysis(one.x)) > params.resolve(small.analysis.op_norm, small.lam)[2])
    two = ib_boost(small, x_hat, params=params, trace_every=0, steps=2)
    np.testing.assert_allclose(two.x, again.x, rtol=1e-12, atol=1e-9)
    assert small.fidelity(two.x) <= small.fidelity(one.x) + 1e-6 * float(np.vdot(small.y, small.y))
    with pytest.raises(ValueError):
        ib_boost(small, x_hat, steps=0)

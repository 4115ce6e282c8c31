"""Self-check suites: brute-force prox oracles, operator checks, penalty
properties, algebraic identities and small solver sanity runs.

Every suite returns a list of :class:`Check` records; ``refit verify`` prints
them and exits non-zero on any failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linops
from .linops import AnalysisOperator, DenseMatrix, Identity, PeriodicConvolution
from .penalties import (
    KINDS,
    AnchorBlock,
    Kind,
    ball_project,
    block_norm,
    block_soft_threshold,
    bregman_block,
    eval_conjugate,
    eval_penalty,
    prox_conj,
    prox_primal,
)

__all__ = [
    "Check",
    "SUITES",
    "run_suite",
    "grid_prox",
    "prox_oracle_instances",
    "property_table",
    "EXPECTED_PROPERTIES",
]


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}" + (f"  ({self.detail})" if self.detail else "")


# ---------------------------------------------------------------------------
# Brute-force prox oracle
# ---------------------------------------------------------------------------


def _frame(u):
    """Orthonormal basis (u, v) of ℝ² with u given."""
    return np.array([u, [-u[1], u[0]]])


def grid_prox(objective, radius, u, n=200, m=20, shrink=10.0, min_step=1e-11, patience=3,
              max_windows=400, seed=0):
    """Minimize a 2D objective by a grid search plus local pattern refinement.

    The coarse grid has ``(2n+1)²`` points on ``[-radius, radius]²`` in the
    frame ``(u, u⊥)``, so measure-zero sets aligned with ``u`` (lines, rays)
    are sampled exactly.  Each refinement round evaluates two ``(2m+1)²``
    windows around the incumbent: one aligned with the frame and one with a
    random rotation and offset.  The random window keeps the search from
    stalling on lattice artifacts along curved domain boundaries.  The
    spacing shrinks after ``patience`` rounds without improvement.

    ``objective`` maps ``(N, 2)`` points to ``N`` values (``inf`` allowed).

    Returns ``(best_point, best_value, coarse_min)``.
    """
    rng = np.random.default_rng(seed)
    basis = _frame(np.asarray(u, dtype=float))
    ticks = radius * np.arange(-n, n + 1) / n
    aa, pp = np.meshgrid(ticks, ticks, indexing="ij")
    pts = np.stack([aa.ravel(), pp.ravel()], axis=-1) @ basis
    vals = objective(pts)
    k = int(np.argmin(vals))
    best, best_val = pts[k], float(vals[k])
    coarse_min = best_val
    offsets = np.arange(-m, m + 1)
    aa, pp = np.meshgrid(offsets, offsets, indexing="ij")
    stencil = np.stack([aa.ravel(), pp.ravel()], axis=-1).astype(float)
    step = radius / n / shrink
    stale = windows = 0
    while step > min_step * radius and windows < max_windows:
        t = rng.uniform(0, 2 * np.pi)
        rot = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
        jitter = rng.uniform(-0.5, 0.5, size=2)
        cand = np.concatenate([
            best + step * stencil @ basis,
            best + step * (stencil + jitter) @ rot,
        ])
        vals = objective(cand)
        k = int(np.argmin(vals))
        windows += 1
        if vals[k] < best_val:
            best, best_val = cand[k], float(vals[k])
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                step /= shrink
                stale = 0
    return best, best_val, coarse_min


def prox_oracle_instances(count=200, seed=0):
    """Random ``(z0, zhat, lam, kappa)`` instances in ℝ²."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        lam = float(rng.uniform(0.5, 2.0))
        kappa = float(rng.uniform(0.25, 2.0))
        zhat = rng.normal(size=2) * rng.uniform(0.2, 3.0)
        z0 = rng.normal(size=2) * lam * rng.uniform(0.2, 1.5)
        out.append((z0, zhat, lam, kappa))
    return out


def check_prox_instance(kind, z0, zhat, lam, kappa):
    """Distance between the closed form and the oracle, and the objective margin."""
    anchor = AnchorBlock.from_blocks(zhat)
    closed = prox_conj(kind, z0, anchor, lam, kappa)

    def objective(pts):
        conj = eval_conjugate(kind, pts, np.broadcast_to(zhat, pts.shape), lam)
        d = pts - z0
        return np.einsum("ij,ij->i", d, d) / (2 * kappa) + conj

    radius = max(3 * lam, 1.5 * float(np.linalg.norm(z0)))
    best, best_val, coarse_min = grid_prox(objective, radius, anchor.direction)
    closed_val = float(objective(closed[None, :])[0])
    return float(np.linalg.norm(best - closed)), closed_val - coarse_min, closed_val - best_val


def suite_prox(count=200, seed=0):
    checks = []
    instances = prox_oracle_instances(count, seed)
    for kind in KINDS:
        worst = 0.0
        worst_margin = -math.inf
        failures = 0
        for z0, zhat, lam, kappa in instances:
            dist, margin, _ = check_prox_instance(kind, z0, zhat, lam, kappa)
            tol = 1e-3 * (1 + np.linalg.norm(z0))
            if not (dist <= tol and margin <= 1e-6):
                failures += 1
            worst = max(worst, dist / (1 + np.linalg.norm(z0)))
            worst_margin = max(worst_margin, margin)
        checks.append(Check(
            f"prox_conj {kind} vs grid oracle ({count} instances)",
            failures == 0,
            f"failures={failures} max rel dist={worst:.2e} max excess={worst_margin:.2e}",
        ))
    # primal prox against an oracle on φ itself
    rng = np.random.default_rng(seed + 1)
    for kind in KINDS:
        failures = 0
        for _ in range(max(count // 10, 1)):
            lam = float(rng.uniform(0.5, 2.0))
            tau = float(rng.uniform(0.25, 2.0))
            zhat = rng.normal(size=2) * rng.uniform(0.2, 3.0)
            zeta0 = rng.normal(size=2) * rng.uniform(0.2, 3.0)
            anchor = AnchorBlock.from_blocks(zhat)
            closed = prox_primal(kind, zeta0, anchor, lam, tau)

            def objective(pts):
                pen = eval_penalty(kind, pts, np.broadcast_to(zhat, pts.shape), lam)
                return np.sum((pts - zeta0) ** 2, axis=-1) / (2 * tau) + pen

            radius = 1.5 * float(np.linalg.norm(zeta0)) + 1e-3
            best, _, _ = grid_prox(objective, radius, anchor.direction)
            if np.linalg.norm(best - closed) > 1e-3 * (1 + np.linalg.norm(zeta0)):
                failures += 1
        checks.append(Check(f"prox_primal {kind} vs grid oracle", failures == 0, f"failures={failures}"))
    # Moreau residual
    worst = 0.0
    for i in range(1000):
        kind = KINDS[i % len(KINDS)]
        zhat = rng.normal(size=2) + 0.1
        zeta0 = rng.normal(size=2) * 3
        lam, tau = float(rng.uniform(0.1, 3)), float(rng.uniform(0.1, 3))
        anchor = AnchorBlock.from_blocks(zhat)
        rec = prox_primal(kind, zeta0, anchor, lam, tau) + tau * prox_conj(kind, zeta0 / tau, anchor, lam, 1 / tau)
        worst = max(worst, float(np.linalg.norm(rec - zeta0)))
    checks.append(Check("Moreau reconstruction (1000 draws)", worst <= 1e-10, f"max residual={worst:.1e}"))
    return checks


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def _adjoint_gap(forward, adjoint, in_shape, out_shape, pairs, rng):
    worst = 0.0
    for _ in range(pairs):
        x = rng.normal(size=in_shape)
        g = rng.normal(size=out_shape)
        lhs = float(np.vdot(forward(x), g))
        rhs = float(np.vdot(x, adjoint(g)))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(x) * np.linalg.norm(g)))
    return worst


def suite_adjoint(pairs=100, seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    shape = (24, 20)
    analysis = {
        "tv_gray": AnalysisOperator.tv_gray(shape),
        "tv_color": AnalysisOperator.tv_color(shape),
        "tgv(0)": AnalysisOperator.tgv(shape, 0.0),
        "tgv(0.45)": AnalysisOperator.tgv(shape, 0.45),
    }
    for name, op in analysis.items():
        gap = _adjoint_gap(op.forward, op.adjoint, op.image_shape, op.block_shape, pairs, rng)
        checks.append(Check(f"adjoint {name}", gap <= 1e-8, f"max gap={gap:.1e}"))
        w = rng.normal(size=op.image_shape)
        rhs = w + op.normal(w)
        u = op.resolvent(rhs)
        res = np.linalg.norm(u + op.normal(u) - rhs) / np.linalg.norm(rhs)
        err = np.linalg.norm(u - w) / np.linalg.norm(w)
        checks.append(Check(f"resolvent (Id+GtG) {name}", res <= 1e-7 and err <= 1e-7,
                            f"residual={res:.1e} round-trip={err:.1e}"))
    kernel = np.zeros((5, 5))
    kernel[2, 1:4] = [0.25, 0.5, 0.25]
    forward = {
        "identity": Identity(),
        "convolution": PeriodicConvolution(kernel, shape),
        "dense": DenseMatrix(rng.normal(size=(16, 16)) / 4, (4, 4)),
    }
    for name, op in forward.items():
        ishape = (4, 4) if name == "dense" else shape
        oshape = op.apply(np.zeros(ishape)).shape
        gap = _adjoint_gap(op.apply, op.adjoint, ishape, oshape, pairs, rng)
        checks.append(Check(f"adjoint Phi {name}", gap <= 1e-8, f"max gap={gap:.1e}"))
        worst = 0.0
        for tau in (0.1, 1.0, 10.0):
            v = rng.normal(size=ishape)
            u = op.resolvent(tau, v)
            res = np.linalg.norm(u + tau * op.normal(u) - v) / np.linalg.norm(v)
            worst = max(worst, res)
        checks.append(Check(f"resolvent (Id+tau PhitPhi) {name}", worst <= 1e-7, f"residual={worst:.1e}"))
    est = linops.power_iteration_norm(analysis["tv_gray"].forward, analysis["tv_gray"].adjoint, (64, 64))
    checks.append(Check("norm tv_gray 64x64 in [2.79, 2.8285]", 2.79 <= est <= 2.8285, f"{est:.4f}"))
    est = AnalysisOperator.tgv((64, 64), 0.45).op_norm
    checks.append(Check("norm tgv(0.45) in [3.00, 3.10]", 3.0 <= est <= 3.1, f"{est:.4f}"))
    return checks


# ---------------------------------------------------------------------------
# Penalty properties
# ---------------------------------------------------------------------------

# Which properties each penalty satisfies.
EXPECTED_PROPERTIES = {
    Kind.HO: (True, False, False, False),
    Kind.HD: (True, True, False, False),
    Kind.QO: (True, False, True, False),
    Kind.QD: (True, True, True, False),
    Kind.SO: (True, False, True, True),
    Kind.SD: (True, True, True, True),
}


def _rot(theta):
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def property_p1(kind, lam, rng, count=2000):
    """Non-negative everywhere, zero on the anchor ray and at the origin."""
    zhat = rng.normal(size=2) + np.array([0.5, 0.0])
    z = rng.normal(size=(count, 2)) * 3
    zh = np.broadcast_to(zhat, z.shape)
    vals = eval_penalty(kind, z, zh, lam)
    if np.any(vals < 0):
        k = int(np.argmin(vals))
        return False, f"negative value at z={z[k]}"
    ray = rng.uniform(0, 5, size=(count, 1)) * zhat
    if np.any(eval_penalty(kind, ray, np.broadcast_to(zhat, ray.shape), lam) > 1e-12 * lam):
        return False, "non-zero on the anchor ray"
    if eval_penalty(kind, np.zeros(2), zhat, lam) != 0:
        return False, "non-zero at the origin"
    return True, ""


def property_p2(kind, lam, rng, count=2000):
    """Equal norms and a larger cosine never increase the penalty."""
    zhat = np.array([1.0, 0.0]) * rng.uniform(0.5, 2.0)
    r = rng.uniform(0.1, 3.0, size=count)
    t1 = rng.uniform(-np.pi, np.pi, size=count)
    t2 = rng.uniform(-np.pi, np.pi, size=count)
    # structured pairs: the opposite ray against every direction
    t1 = np.concatenate([t1, np.full(64, np.pi)])
    t2 = np.concatenate([t2, np.linspace(-np.pi / 2, np.pi / 2, 64)])
    r = np.concatenate([r, np.ones(64)])
    z1 = r[:, None] * _rot(t1)
    z2 = r[:, None] * _rot(t2)
    c1, c2 = np.cos(t1), np.cos(t2)
    zh = np.broadcast_to(zhat, z1.shape)
    f1, f2 = eval_penalty(kind, z1, zh, lam), eval_penalty(kind, z2, zh, lam)
    # orient each pair so that z' has the smaller cosine
    lo = np.where(c1 <= c2, f1, f2)
    hi = np.where(c1 <= c2, f2, f1)
    bad = lo < hi - 1e-12 * np.maximum(1, np.abs(np.where(np.isfinite(hi), hi, 0)))
    if bad.any():
        k = int(np.argmax(bad))
        return False, f"witness z'={np.round(np.where(c1 <= c2, 1, 0)[k] * z1[k] + np.where(c1 <= c2, 0, 1)[k] * z2[k], 4)}"
    return True, ""


def property_p3(kind, lam, rng, count=500):
    """Local Lipschitz continuity: difference quotients stay bounded as ‖δ‖ → 0."""
    zhat = np.array([1.0, 0.0]) * rng.uniform(0.5, 2.0)
    nz = np.linalg.norm(zhat)
    z = rng.normal(size=(count, 2)) * 2
    # structured points on the anchor ray, where the indicator kinds jump
    z = np.concatenate([z, rng.uniform(0.5, 2.0, size=(32, 1)) * zhat])
    zh = np.broadcast_to(zhat, z.shape)
    for h in (1e-4, 1e-6):
        d = rng.normal(size=z.shape)
        d = h * d / block_norm(d)[:, None]
        f0 = eval_penalty(kind, z, zh, lam)
        f1 = eval_penalty(kind, z + d, zh, lam)
        with np.errstate(invalid="ignore"):
            diff = np.abs(f1 - f0)
        diff = np.where(np.isnan(diff), 0.0, diff)  # inf - inf: both outside the domain
        bound = 10 * lam * (1 + 2 * block_norm(z) / nz)
        bad = diff > bound * h
        if bad.any():
            k = int(np.argmax(bad))
            return False, f"jump witness z={np.round(z[k], 4)} |dphi|={diff[k]:.3g} at |delta|={h:g}"
    return True, ""


def property_p4(kind, lam, rng, count=2000, c_factor=1e3):
    """``φ(z) <= C‖z‖`` with ``C = 2λ``; failures are certified against ``10³λ``."""
    zhat = np.array([1.0, 0.0]) * rng.uniform(0.5, 2.0)
    z = rng.normal(size=(count, 2)) * rng.uniform(0.1, 10.0, size=(count, 1))
    zh = np.broadcast_to(zhat, z.shape)
    vals = eval_penalty(kind, z, zh, lam)
    nz = block_norm(z)
    if np.all(vals <= 2 * lam * nz * (1 + 1e-12)):
        return True, ""
    # witness on the orthogonal line, far enough out to beat C = 10³λ
    amp = 10 * c_factor * np.linalg.norm(zhat)
    w = np.array([0.0, amp])
    val = float(eval_penalty(kind, w, zhat, lam))
    if val > c_factor * lam * amp:
        return False, f"witness z={w} phi={val:.3g} > {c_factor:g}*lam*|z|"
    return False, "bound 2*lam*|z| violated"


PROPERTIES = (property_p1, property_p2, property_p3, property_p4)


def property_table(lam=1.0, seed=0):
    """``{kind: ((passed, detail) for P1..P4)}``."""
    table = {}
    for kind in KINDS:
        rng = np.random.default_rng(seed)
        table[kind] = tuple(prop(kind, lam, rng) for prop in PROPERTIES)
    return table


def suite_properties(seed=0):
    checks = []
    for lam in (0.5, 2.0):
        table = property_table(lam, seed)
        for kind, results in table.items():
            got = tuple(ok for ok, _ in results)
            expected = EXPECTED_PROPERTIES[kind]
            detail = " ".join(f"P{i + 1}={'y' if ok else 'n'}" for i, ok in enumerate(got))
            witnesses = "; ".join(d for (ok, d) in results if not ok and d)
            checks.append(Check(f"property pattern {kind} (lambda={lam})", got == expected,
                                detail + (f" [{witnesses}]" if witnesses else "")))
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(500, 2))
    zhat = rng.normal(size=(500, 2)) + 0.2
    alpha = rng.uniform(0, 5, size=500)
    ok = True
    for kind in (Kind.SD, Kind.SO):
        a = eval_penalty(kind, alpha[:, None] * z, zhat, 1.3)
        b = alpha * eval_penalty(kind, z, zhat, 1.3)
        ok &= bool(np.allclose(a, b, rtol=1e-12, atol=1e-12))
    checks.append(Check("1-homogeneity of SD and SO", ok))
    bad = []
    for kind in KINDS:
        z1, z2 = rng.normal(size=(500, 2)), rng.normal(size=(500, 2))
        zh = np.broadcast_to(np.array([1.0, 0.5]), z1.shape)
        if kind in (Kind.HO, Kind.HD):
            # finite-value region: points on the anchor line (or ray)
            s1, s2 = rng.uniform(0 if kind is Kind.HD else -2, 2, size=(2, 500, 1))
            z1, z2 = s1 * zh, s2 * zh
        t = rng.uniform(size=500)
        lhs = t * eval_penalty(kind, z1, zh, 1.0) + (1 - t) * eval_penalty(kind, z2, zh, 1.0)
        rhs = eval_penalty(kind, t[:, None] * z1 + (1 - t[:, None]) * z2, zh, 1.0)
        if np.any(lhs < rhs - 1e-10):
            bad.append(str(kind))
    checks.append(Check("convexity spot check", not bad, ",".join(bad)))
    # conjugate domain membership against the stated sets
    dom_bad = []
    pts = rng.normal(size=(2000, 2)) * 2
    pts[:200, 0] = 0.0
    u = np.broadcast_to(np.array([1.0, 0.0]), pts.shape)
    lam = 1.0
    expected = {
        Kind.HO: pts[:, 0] == 0,
        Kind.HD: pts[:, 0] <= 0,
        Kind.QO: pts[:, 0] == 0,
        Kind.QD: pts[:, 0] <= 0,
        Kind.SO: (pts[:, 0] == 0) & (np.abs(pts[:, 1]) <= lam),
        Kind.SD: block_norm(pts + lam * u) <= lam,
    }
    for kind, member in expected.items():
        got = np.isfinite(eval_conjugate(kind, pts, u, lam, tol=0.0))
        if not np.array_equal(got, member):
            dom_bad.append(str(kind))
    checks.append(Check("conjugate domains", not dom_bad, ",".join(dom_bad)))
    return checks


# ---------------------------------------------------------------------------
# Identities
# ---------------------------------------------------------------------------


def clear_update(nu_tilde, nu_hat, lam):
    """Covariant refitting dual update ``(λ/‖ν̂‖)(ν̃ - P_ν̂(ν̃))``."""
    n = block_norm(nu_hat)
    u = nu_hat / n[..., None]
    perp = nu_tilde - np.sum(nu_tilde * u, axis=-1)[..., None] * u
    return (lam / n)[..., None] * perp


def suite_equivalence(seed=0):
    from .solvers import psi_direction

    rng = np.random.default_rng(seed)
    checks = []
    worst = 0.0
    for b in (2, 3, 6):
        lam = float(rng.uniform(0.5, 50))
        kappa = float(rng.uniform(0.05, 5))
        nu_hat = rng.normal(size=(1000, b))
        nu_hat *= (lam * rng.uniform(1.0001, 3.0, size=1000) / block_norm(nu_hat))[:, None]
        nu_tilde = rng.normal(size=(1000, b)) * lam
        qo = prox_conj(Kind.QO, nu_tilde, psi_direction(nu_hat, lam, kappa), lam, kappa)
        cl = clear_update(nu_tilde, nu_hat, lam)
        worst = max(worst, float(np.max(block_norm(qo - cl))))
    checks.append(Check("QO dual update == CLEAR update", worst <= 1e-10, f"max block error={worst:.1e}"))
    worst = 0.0
    for b in (2, 3, 6):
        lam = float(rng.uniform(0.1, 10))
        zhat = rng.normal(size=(5000, b))
        z = rng.normal(size=(5000, b)) * 3
        eta = zhat / block_norm(zhat)[:, None]
        sd = eval_penalty(Kind.SD, z, zhat, lam)
        br = lam * bregman_block(z, eta)
        worst = max(worst, float(np.max(np.abs(sd - br) / np.maximum(1.0, lam * block_norm(z)))))
    checks.append(Check("SD penalty == lam * Bregman divergence", worst <= 1e-12, f"max error={worst:.1e}"))
    z = rng.normal(size=(2000, 3)) * 4
    lam = 2.5
    err = float(np.max(np.abs(block_soft_threshold(z, lam) + ball_project(z, lam) - z)))
    checks.append(Check("ST + ball projection == identity", err <= 1e-12, f"max error={err:.1e}"))
    return checks


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def suite_solvers(seed=0):
    from .problems import add_gaussian_noise, build_scene, make_problem
    from .solvers import PDParams, DRParams, dr_joint_solve, pd_joint_solve, pd_solve, ib_boost

    checks = []
    x0 = build_scene("shapes128")[::4, ::4].copy()
    y = add_gaussian_noise(x0, 20, seed)
    p = make_problem("tv_gray", y, 1e-8)
    r = pd_joint_solve(p, "SD", PDParams(iters=200), trace_every=0)
    err = max(np.linalg.norm(r.x_hat - y), np.linalg.norm(r.x_tilde - y)) / np.linalg.norm(y)
    checks.append(Check("PD joint, lambda->0 recovers y", err <= 1e-4, f"rel err={err:.1e}"))
    r = dr_joint_solve(p, "SD", DRParams(alpha=1.0, tau=1.0, iters=200), trace_every=0)
    err = max(np.linalg.norm(r.x_hat - y), np.linalg.norm(r.x_tilde - y)) / np.linalg.norm(y)
    checks.append(Check("DR joint, lambda->0 recovers y", err <= 1e-4, f"rel err={err:.1e}"))

    p = make_problem("tv_gray", y, 30.0)
    ref = []
    pd_solve(p, PDParams(iters=150), callback=lambda k, x: ref.append(x.copy()))
    joint = []
    pd_joint_solve(p, "QO", PDParams(iters=150), callback=lambda k, st: joint.append(st.x_hat.copy()), trace_every=0)
    same = all(np.array_equal(a, b) for a, b in zip(ref, joint))
    checks.append(Check("biased chain bit-identical to plain PD", same))

    worst = -math.inf
    for kind in KINDS:
        r = pd_joint_solve(p, kind, PDParams(iters=1500), trace_every=0)
        gap = (p.fidelity(r.x_tilde) - p.fidelity(r.x_hat)) / float(np.vdot(y, y))
        worst = max(worst, gap)
    checks.append(Check("fidelity ordering (all kinds)", worst <= 1e-6, f"max gap/|y|^2={worst:.1e}"))

    c = np.full((16, 16), 77.0)
    pc = make_problem("tv_gray", c, 10.0)
    r = pd_joint_solve(pc, "SD", PDParams(iters=50), trace_every=0)
    ok = not r.support.any() and np.allclose(r.x_hat, c) and np.array_equal(r.x_hat, r.x_tilde)
    checks.append(Check("constant image: empty support, x_tilde == x_hat", bool(ok)))

    xb, _ = pd_solve(p, PDParams(iters=300))
    boost = ib_boost(p, np.zeros_like(y), params=PDParams(iters=300), trace_every=0).x
    checks.append(Check("Bregman boost from x=0 equals the biased solve", bool(np.array_equal(boost, xb)) or
                        np.linalg.norm(boost - xb) <= 1e-12 * np.linalg.norm(xb)))
    return checks


SUITES = {
    "prox": suite_prox,
    "adjoint": suite_adjoint,
    "properties": suite_properties,
    "equivalence": suite_equivalence,
    "solvers": suite_solvers,
}


def run_suite(name):
    try:
        suite = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}") from None
    return suite()

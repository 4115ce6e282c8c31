"""Joint biased/refitted solvers and sequential refitting.

The joint solvers run the biased chain (the plain ℓ12 problem) and the
refitted chain side by side.  At every iteration the support and the anchor
blocks used by the refitting penalty are read off the biased chain's dual
(primal-dual) or auxiliary (Douglas-Rachford) variables, which saturate on
the support long before ``Γx̂ᵏ`` settles.

All iterates start at zero.  Given the same problem and parameters a run is
fully deterministic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .penalties import (
    TINY,
    AnchorBlock,
    Kind,
    ball_project,
    block_norm,
    block_soft_threshold,
    bregman_ball_prox_conj,
    min_norm_subgradient,
    parse_kind,
    prox_conj,
    prox_primal,
)
from .problems import psnr

__all__ = [
    "DivergenceError",
    "PDParams",
    "DRParams",
    "Trace",
    "JointState",
    "JointResult",
    "RefitResult",
    "psi_direction",
    "detect_support_pd",
    "detect_support_dr",
    "prox_omega_conj",
    "prox_omega",
    "pd_solve",
    "pd_joint_solve",
    "dr_solve",
    "dr_joint_solve",
    "posterior_refit",
    "ib_boost",
    "TRACE_COLUMNS",
]

# Default support margin relative to λ.
BETA_REL = 1e-8
# Safety factor on the power-iteration norm estimate for default step sizes.
NORM_MARGIN = 1.01


class DivergenceError(RuntimeError):
    """An iterate became non-finite."""

    def __init__(self, iteration, where):
        super().__init__(f"non-finite {where} at iteration {iteration}")
        self.iteration = iteration


@dataclass
class PDParams:
    """Primal-dual parameters.

    ``tau`` and ``kappa`` default to ``1 / (1.01 ‖Γ‖)``; ``beta`` defaults
    to ``1e-8 λ``.  The step sizes must satisfy ``τκ‖Γ‖² < 1``.
    """

    tau: float | None = None
    kappa: float | None = None
    theta: float = 1.0
    beta: float | None = None
    iters: int = 4000

    def __post_init__(self):
        for name in ("tau", "kappa", "beta"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")

    def resolve(self, op_norm, lam):
        tau = self.tau if self.tau is not None else 1.0 / (NORM_MARGIN * op_norm)
        kappa = self.kappa if self.kappa is not None else 1.0 / (NORM_MARGIN * op_norm)
        if tau * kappa * op_norm**2 >= 1.0:
            raise ValueError(
                f"step sizes violate tau*kappa*|Gamma|^2 < 1 "
                f"({tau:.4g} * {kappa:.4g} * {op_norm:.4g}^2 = {tau * kappa * op_norm**2:.4g})"
            )
        beta = self.beta if self.beta is not None else BETA_REL * lam
        return tau, kappa, beta


@dataclass
class DRParams:
    """Douglas-Rachford parameters: relaxation ``alpha`` in (0, 2), step ``tau``.

    The defaults ``alpha=0.5``, ``tau=0.01`` are the settings used for the
    sequential-versus-joint study on 256² TV denoising.
    """

    alpha: float = 0.5
    tau: float = 0.01
    beta: float | None = None
    iters: int = 1000

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValueError("alpha must lie strictly inside (0, 2)")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")

    def resolve_beta(self, lam):
        return self.beta if self.beta is not None else BETA_REL * lam


TRACE_COLUMNS = (
    "iter",
    "fidelity_biased",
    "fidelity_refit",
    "objective_biased",
    "support_size",
    "psnr_biased",
    "psnr_refit",
)


@dataclass
class Trace:
    """Per-iteration diagnostics; missing quantities are stored as NaN."""

    rows: list = field(default_factory=list)

    def record(self, problem, k, x_biased=None, x_refit=None, support_size=-1):
        nan = math.nan
        truth = problem.x_true
        fb = problem.fidelity(x_biased) if x_biased is not None else nan
        fr = problem.fidelity(x_refit) if x_refit is not None else nan
        ob = problem.objective(x_biased) if x_biased is not None else nan
        pb = pr = nan
        if truth is not None:
            if x_biased is not None:
                pb = psnr(truth, problem.extract(x_biased))
            if x_refit is not None:
                pr = psnr(truth, problem.extract(x_refit))
        self.rows.append((k, fb, fr, ob, int(support_size), pb, pr))

    def column(self, name):
        return np.array([row[TRACE_COLUMNS.index(name)] for row in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows:
                writer.writerow([row[0]] + [_fmt(v) for v in row[1:4]] + [row[4]] + [_fmt(v) for v in row[5:]])


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


@dataclass
class JointState:
    """Iterates of both chains.

    For primal-dual, ``aux`` is the over-relaxed point ``v`` and ``zeta`` is
    unused; for Douglas-Rachford, ``aux`` is ``μ`` and ``zeta`` is ``ζ``.
    """

    x_hat: np.ndarray
    xi_hat: np.ndarray
    aux_hat: np.ndarray
    x_tilde: np.ndarray
    xi_tilde: np.ndarray
    aux_tilde: np.ndarray
    zeta_hat: np.ndarray | None = None
    zeta_tilde: np.ndarray | None = None
    support: np.ndarray | None = None
    iteration: int = 0


@dataclass
class JointResult:
    x_hat: np.ndarray
    x_tilde: np.ndarray
    support: np.ndarray
    trace: Trace
    state: JointState


@dataclass
class RefitResult:
    x: np.ndarray
    support: np.ndarray
    trace: Trace
    dual: np.ndarray


def _check_finite(k, **arrays):
    for name, a in arrays.items():
        if not np.isfinite(np.sum(a)):
            raise DivergenceError(k, name)


# ---------------------------------------------------------------------------
# Support and anchor identification
# ---------------------------------------------------------------------------


def psi_direction(nu, lam, kappa):
    """Anchor estimate from the biased dual predictor ``ν̂ᵢ``.

    ``direction = ν̂ᵢ/‖ν̂ᵢ‖`` and ``norm = (‖ν̂ᵢ‖ - λ)/κ``.  Only defined on
    the support, where ``‖ν̂ᵢ‖ > λ``.
    """
    nu = np.asarray(nu, dtype=float)
    nrm = block_norm(nu)
    if np.any(nrm <= lam):
        raise ValueError("psi_direction is only defined where |nu_i| > lambda")
    return AnchorBlock(nu / nrm[..., None], (nrm - lam) / kappa)


def detect_support_pd(nu, lam, beta):
    """``{i : ‖ν̂ᵢ‖ > λ + β}``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return block_norm(nu) > lam + beta


def detect_support_dr(zeta, tau, lam, beta):
    """``{i : ‖ζ̂ᵢ‖ > τλ + β}``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return block_norm(zeta) > tau * lam + beta


def _anchors_subset(anchors, mask, kind):
    direction = np.asarray(anchors.direction)[mask]
    norm = np.asarray(anchors.norm)[mask]
    if not np.all(np.isfinite(direction)):
        raise ValueError("missing anchor on an in-mask block")
    if kind in (Kind.QO, Kind.QD) and not np.all(norm > 0):
        raise ValueError("missing anchor norm on an in-mask block")
    return AnchorBlock(direction, norm)


def prox_omega_conj(nu, anchors, mask, kind, lam, kappa):
    """Conjugate prox of the support-restricted refitting function.

    In-mask blocks get ``prox_{κφ*}(νᵢ, ẑᵢ)``; the other blocks are passed
    through unchanged (the conjugate of the indicator of ``{0}`` is zero).
    ``anchors`` covers the whole field; only in-mask entries are read.
    """
    kind = parse_kind(kind)
    out = np.array(nu, dtype=float, copy=True)
    mask = np.asarray(mask, dtype=bool)
    if mask.any():
        out[mask] = prox_conj(kind, out[mask], _anchors_subset(anchors, mask, kind), lam, kappa)
    return out


def prox_omega(zeta, anchors, mask, kind, lam, tau):
    """Primal prox of the support-restricted refitting function.

    In-mask blocks get ``prox_{τφ}(ζᵢ, ẑᵢ)``; the other blocks are set to 0.
    """
    kind = parse_kind(kind)
    zeta = np.asarray(zeta, dtype=float)
    out = np.zeros_like(zeta)
    mask = np.asarray(mask, dtype=bool)
    if mask.any():
        out[mask] = prox_primal(kind, zeta[mask], _anchors_subset(anchors, mask, kind), lam, tau)
    return out


def _psi_field(nu, nrm, lam, kappa):
    return AnchorBlock(nu / np.maximum(nrm, TINY)[..., None], (nrm - lam) / kappa)


def _upsilon_field(zeta, nrm, lam, tau):
    return AnchorBlock(zeta / np.maximum(nrm, TINY)[..., None], nrm - lam * tau)


# ---------------------------------------------------------------------------
# Primal-dual
# ---------------------------------------------------------------------------


def pd_solve(problem, params=None, callback=None):
    """Plain Chambolle-Pock for the biased problem (no refitting chain).

    Returns ``(x_hat, xi_hat)``.  ``callback(k, x_hat)`` is called after
    every iteration.
    """
    params = params or PDParams()
    G, F, lam = problem.analysis, problem.forward, problem.lam
    tau, kappa, _ = params.resolve(G.op_norm, lam)
    theta = params.theta
    ty = problem.phi_t_y
    x = np.zeros(problem.primal_shape)
    v = np.zeros(problem.primal_shape)
    xi = np.zeros(G.block_shape)
    for k in range(params.iters):
        nu = xi + kappa * G(v)
        xi = ball_project(nu, lam)
        x_new = F.resolvent(tau, x + tau * (ty - G.adjoint(xi)))
        v = x_new + theta * (x_new - x)
        x = x_new
        _check_finite(k, x_hat=x)
        if callback is not None:
            callback(k, x)
    return x, xi


def pd_joint_solve(problem, kind, params=None, callback=None, trace_every=1):
    """Primal-dual solver returning the biased and refitted solutions together.

    Per iteration::

        ν̂ = ξ̂ + κΓv̂            ν̃ = ξ̃ + κΓṽ
        ξ̂ = Π(ν̂, λ)             Î = {‖ν̂ᵢ‖ > λ + β}
        ξ̃ = prox_{κω*}(ν̃; Ψ(ν̂), Î)
        x̂⁺ = Φ_τ⁻(x̂ + τ(Φᵗy - Γᵗξ̂))      x̃⁺ likewise with ξ̃
        v = x⁺ + θ(x⁺ - x)                for both chains

    Parameters
    ----------
    problem : ProblemSpec
    kind : Kind or str
        Refitting block penalty.
    params : PDParams, optional
    callback : callable, optional
        ``callback(k, state)`` after every iteration.
    trace_every : int
        Record diagnostics every ``trace_every`` iterations (0 disables).

    Returns
    -------
    JointResult
    """
    kind = parse_kind(kind)
    params = params or PDParams()
    G, F, lam = problem.analysis, problem.forward, problem.lam
    tau, kappa, beta = params.resolve(G.op_norm, lam)
    theta = params.theta
    ty = problem.phi_t_y
    shape, bshape = problem.primal_shape, G.block_shape
    st = JointState(
        x_hat=np.zeros(shape), xi_hat=np.zeros(bshape), aux_hat=np.zeros(shape),
        x_tilde=np.zeros(shape), xi_tilde=np.zeros(bshape), aux_tilde=np.zeros(shape),
        support=np.zeros(bshape[:-1], dtype=bool),
    )
    trace = Trace()
    for k in range(params.iters):
        nu_hat = st.xi_hat + kappa * G(st.aux_hat)
        nu_tilde = st.xi_tilde + kappa * G(st.aux_tilde)
        st.xi_hat = ball_project(nu_hat, lam)
        nrm = block_norm(nu_hat)
        st.support = nrm > lam + beta
        anchors = _psi_field(nu_hat, nrm, lam, kappa)
        st.xi_tilde = prox_omega_conj(nu_tilde, anchors, st.support, kind, lam, kappa)
        x_hat = F.resolvent(tau, st.x_hat + tau * (ty - G.adjoint(st.xi_hat)))
        x_tilde = F.resolvent(tau, st.x_tilde + tau * (ty - G.adjoint(st.xi_tilde)))
        st.aux_hat = x_hat + theta * (x_hat - st.x_hat)
        st.aux_tilde = x_tilde + theta * (x_tilde - st.x_tilde)
        st.x_hat, st.x_tilde = x_hat, x_tilde
        st.iteration = k + 1
        _check_finite(k, x_hat=x_hat, x_tilde=x_tilde)
        if trace_every and (k % trace_every == 0 or k == params.iters - 1):
            trace.record(problem, k, x_hat, x_tilde, int(st.support.sum()))
        if callback is not None:
            callback(k, st)
    return JointResult(st.x_hat, st.x_tilde, st.support, trace, st)


def _pd_refit_chain(problem, dual_prox, params, support_size, trace_every):
    """Single primal-dual chain with a user-supplied dual prox."""
    G, F, lam = problem.analysis, problem.forward, problem.lam
    tau, kappa, _ = params.resolve(G.op_norm, lam)
    theta = params.theta
    ty = problem.phi_t_y
    x = np.zeros(problem.primal_shape)
    v = np.zeros(problem.primal_shape)
    xi = np.zeros(G.block_shape)
    trace = Trace()
    for k in range(params.iters):
        xi = dual_prox(xi + kappa * G(v), kappa)
        x_new = F.resolvent(tau, x + tau * (ty - G.adjoint(xi)))
        v = x_new + theta * (x_new - x)
        x = x_new
        _check_finite(k, x=x)
        if trace_every and (k % trace_every == 0 or k == params.iters - 1):
            trace.record(problem, k, None, x, support_size)
    return x, xi, trace


# ---------------------------------------------------------------------------
# Douglas-Rachford
# ---------------------------------------------------------------------------


def dr_solve(problem, params=None, callback=None):
    """Douglas-Rachford for the biased problem only.  Returns ``(x_hat, zeta_hat)``."""
    params = params or DRParams()
    G, F, lam = problem.analysis, problem.forward, problem.lam
    alpha, tau = params.alpha, params.tau
    ty = problem.phi_t_y
    x = np.zeros(problem.primal_shape)
    mu = np.zeros(problem.primal_shape)
    xi = np.zeros(G.block_shape)
    zeta = np.zeros(G.block_shape)
    for k in range(params.iters):
        ups = G.resolvent(2 * x - mu + G.adjoint(2 * xi - zeta))
        mu = mu + alpha * (ups - x)
        zeta = zeta + alpha * (G(ups) - xi)
        x = F.resolvent(tau, mu + tau * ty)
        xi = block_soft_threshold(zeta, tau * lam)
        _check_finite(k, x_hat=x)
        if callback is not None:
            callback(k, x)
    return x, zeta


def dr_joint_solve(problem, kind, params=None, callback=None, trace_every=1):
    """Douglas-Rachford solver returning the biased and refitted solutions together.

    Per iteration, for both chains (hat / tilde)::

        υ = Γ⁻(2x - μ + Γᵗ(2ξ - ζ))
        μ = μ + α(υ - x)          ζ = ζ + α(Γυ - ξ)
        x = Φ_τ⁻(μ + τΦᵗy)

    then ``ξ̂ = ST(ζ̂, τλ)``, ``Î = {‖ζ̂ᵢ‖ > τλ + β}`` and
    ``ξ̃ = prox_{τω}(ζ̃; Υ(ζ̂), Î)`` with ``Υ(ζ̂) = (‖ζ̂‖ - λτ) ζ̂/‖ζ̂‖``.
    """
    kind = parse_kind(kind)
    params = params or DRParams()
    G, F, lam = problem.analysis, problem.forward, problem.lam
    alpha, tau = params.alpha, params.tau
    beta = params.resolve_beta(lam)
    ty = problem.phi_t_y
    shape, bshape = problem.primal_shape, G.block_shape
    st = JointState(
        x_hat=np.zeros(shape), xi_hat=np.zeros(bshape), aux_hat=np.zeros(shape),
        x_tilde=np.zeros(shape), xi_tilde=np.zeros(bshape), aux_tilde=np.zeros(shape),
        zeta_hat=np.zeros(bshape), zeta_tilde=np.zeros(bshape),
        support=np.zeros(bshape[:-1], dtype=bool),
    )
    trace = Trace()
    for k in range(params.iters):
        ups_hat = G.resolvent(2 * st.x_hat - st.aux_hat + G.adjoint(2 * st.xi_hat - st.zeta_hat))
        ups_tilde = G.resolvent(
            2 * st.x_tilde - st.aux_tilde + G.adjoint(2 * st.xi_tilde - st.zeta_tilde)
        )
        st.aux_hat = st.aux_hat + alpha * (ups_hat - st.x_hat)
        st.aux_tilde = st.aux_tilde + alpha * (ups_tilde - st.x_tilde)
        st.zeta_hat = st.zeta_hat + alpha * (G(ups_hat) - st.xi_hat)
        st.zeta_tilde = st.zeta_tilde + alpha * (G(ups_tilde) - st.xi_tilde)
        st.x_hat = F.resolvent(tau, st.aux_hat + tau * ty)
        st.x_tilde = F.resolvent(tau, st.aux_tilde + tau * ty)
        st.xi_hat = block_soft_threshold(st.zeta_hat, tau * lam)
        nrm = block_norm(st.zeta_hat)
        st.support = nrm > tau * lam + beta
        anchors = _upsilon_field(st.zeta_hat, nrm, lam, tau)
        st.xi_tilde = prox_omega(st.zeta_tilde, anchors, st.support, kind, lam, tau)
        st.iteration = k + 1
        _check_finite(k, x_hat=st.x_hat, x_tilde=st.x_tilde)
        if trace_every and (k % trace_every == 0 or k == params.iters - 1):
            trace.record(problem, k, st.x_hat, st.x_tilde, int(st.support.sum()))
        if callback is not None:
            callback(k, st)
    return JointResult(st.x_hat, st.x_tilde, st.support, trace, st)


def _dr_refit_chain(problem, primal_prox, params, support_size, trace_every):
    G, F = problem.analysis, problem.forward
    alpha, tau = params.alpha, params.tau
    ty = problem.phi_t_y
    x = np.zeros(problem.primal_shape)
    mu = np.zeros(problem.primal_shape)
    xi = np.zeros(G.block_shape)
    zeta = np.zeros(G.block_shape)
    trace = Trace()
    for k in range(params.iters):
        ups = G.resolvent(2 * x - mu + G.adjoint(2 * xi - zeta))
        mu = mu + alpha * (ups - x)
        zeta = zeta + alpha * (G(ups) - xi)
        x = F.resolvent(tau, mu + tau * ty)
        xi = primal_prox(zeta, tau)
        _check_finite(k, x=x)
        if trace_every and (k % trace_every == 0 or k == params.iters - 1):
            trace.record(problem, k, None, x, support_size)
    return x, zeta, trace


# ---------------------------------------------------------------------------
# Sequential refitting and Bregman boosting
# ---------------------------------------------------------------------------


def posterior_refit(problem, kind, x_hat, beta, solver="pd", params=None, trace_every=1):
    """Refit a precomputed biased solution with a frozen support.

    The support is ``{i : ‖(Γx̂)ᵢ‖ > β}`` and the anchors are ``(Γx̂)ᵢ``.  An
    empty support is allowed; the refit then minimizes the fidelity over
    ``Γx = 0``.
    """
    kind = parse_kind(kind)
    if not beta > 0:
        raise ValueError("beta must be positive")
    lam = problem.lam
    zhat = problem.analysis(x_hat)
    mask = block_norm(zhat) > beta
    anchors = AnchorBlock.from_blocks(zhat)
    size = int(mask.sum())
    if solver == "pd":
        params = params or PDParams()
        x, dual, trace = _pd_refit_chain(
            problem,
            lambda nu, kappa: prox_omega_conj(nu, anchors, mask, kind, lam, kappa),
            params, size, trace_every,
        )
    elif solver == "dr":
        params = params or DRParams()
        x, dual, trace = _dr_refit_chain(
            problem,
            lambda zeta, tau: prox_omega(zeta, anchors, mask, kind, lam, tau),
            params, size, trace_every,
        )
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return RefitResult(x, mask, trace, dual)


def ib_boost(problem, x_hat, support=None, params=None, trace_every=1, steps=1):
    """Iterative-Bregman boosting anchored on the minimal-norm subgradient.

    Minimizes ``½‖Φx - y‖² + λ Σᵢ (‖(Γx)ᵢ‖ - <η̄ᵢ, (Γx)ᵢ>)`` where ``η̄`` is
    the unit direction of ``Γx̂`` on its support and 0 elsewhere.  The
    support is not constrained.  ``support`` defaults to ``Γx̂ ≠ 0``.

    With ``steps > 1`` each further step re-anchors on the previous output,
    taking its support as ``‖(Γx)ᵢ‖ > β``.  The returned trace and dual
    belong to the last step.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    params = params or PDParams()
    lam = problem.lam
    beta = params.resolve(problem.analysis.op_norm, lam)[2]
    x = x_hat
    for step in range(steps):
        zhat = problem.analysis(x)
        if step > 0:
            support = block_norm(zhat) > beta
        elif support is None:
            support = block_norm(zhat) > 0
        eta = min_norm_subgradient(zhat, support)
        x, dual, trace = _pd_refit_chain(
            problem,
            lambda nu, kappa, eta=eta: bregman_ball_prox_conj(nu, eta, lam),
            params, int(np.sum(support)), trace_every,
        )
    return RefitResult(x, np.asarray(support, dtype=bool), trace, dual)

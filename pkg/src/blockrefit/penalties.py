"""Refitting block penalties, their conjugates and proximal maps.

All functions are vectorized over blocks: vectors live on the last axis and
any leading axes index blocks.  ``zhat`` (the anchor block taken from the
biased solution) is assumed non-zero; callers only evaluate penalties on the
detected support.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Kind",
    "KINDS",
    "parse_kind",
    "AnchorBlock",
    "block_norm",
    "cos_angle",
    "proj_span",
    "eval_penalty",
    "eval_conjugate",
    "prox_conj",
    "prox_primal",
    "ball_project",
    "block_soft_threshold",
    "bregman_block",
    "bregman_ball_prox_conj",
    "min_norm_subgradient",
    "landscape_rows",
]

# Floor for every division by a block norm.
TINY = 1e-30
# Relative tolerance when testing the measure-zero sets of the indicator penalties.
ALIGN_TOL = 1e-9


class Kind(str, enum.Enum):
    """The six refitting block penalties."""

    HO = "HO"
    HD = "HD"
    QO = "QO"
    QD = "QD"
    SO = "SO"
    SD = "SD"

    def __str__(self):
        return self.value


KINDS = tuple(Kind)


def parse_kind(name):
    """Return the :class:`Kind` for ``name`` (case-insensitive)."""
    if isinstance(name, Kind):
        return name
    try:
        return Kind(str(name).upper())
    except ValueError:
        raise ValueError(
            f"unknown penalty {name!r}; expected one of {', '.join(k.value for k in KINDS)}"
        ) from None


@dataclass
class AnchorBlock:
    """Unit direction and norm of the anchor block(s) ``ẑ``.

    ``direction`` has shape ``(..., b)``, ``norm`` has the leading shape.
    """

    direction: np.ndarray
    norm: np.ndarray

    @classmethod
    def from_blocks(cls, zhat):
        zhat = np.asarray(zhat, dtype=float)
        nrm = block_norm(zhat)
        direction = zhat / np.maximum(nrm, TINY)[..., None]
        return cls(direction, nrm)


def block_norm(z):
    z = np.asarray(z, dtype=float)
    return np.sqrt(np.einsum("...i,...i->...", z, z))


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def cos_angle(z, zhat):
    """Cosine of the angle between ``z`` and ``zhat``; 1 when either is zero."""
    z = np.asarray(z, dtype=float)
    zhat = np.asarray(zhat, dtype=float)
    denom = block_norm(z) * block_norm(zhat)
    safe = np.where(denom > 0, denom, 1.0)
    c = np.where(denom > 0, _dot(z, zhat) / safe, 1.0)
    return np.clip(c, -1.0, 1.0)


def proj_span(z, zhat):
    """Orthogonal projection of ``z`` onto ``Span(zhat)``."""
    z = np.asarray(z, dtype=float)
    zhat = np.asarray(zhat, dtype=float)
    nrm = block_norm(zhat)
    if np.any(nrm == 0):
        raise ValueError("proj_span requires a non-zero anchor")
    u = zhat / nrm[..., None]
    return _dot(z, u)[..., None] * u


def _split(z, u):
    """Coordinates of ``z`` along the unit vector ``u`` and orthogonal to it."""
    along = _dot(z, u)
    perp = z - along[..., None] * u
    return along, perp


def eval_penalty(kind, z, zhat, lam):
    """Value of the block penalty ``φ(z, ẑ)`` (``inf`` allowed for HO/HD)."""
    kind = parse_kind(kind)
    z = np.asarray(z, dtype=float)
    zhat = np.asarray(zhat, dtype=float)
    nz = block_norm(z)
    nzhat = block_norm(zhat)
    c = cos_angle(z, zhat)
    zero = nz == 0
    if kind in (Kind.HO, Kind.HD):
        u = zhat / np.maximum(nzhat, TINY)[..., None]
        along, perp = _split(z, u)
        aligned = block_norm(perp) <= ALIGN_TOL * nz
        if kind is Kind.HD:
            aligned &= along > 0
        val = np.where(aligned | zero, 0.0, np.inf)
    elif kind in (Kind.QO, Kind.QD, Kind.SO):
        # ‖z‖²(1 - cos²) and ‖z‖ sin computed from the orthogonal part, which
        # stays exact on the anchor ray where 1 - cos² cancels badly
        u = zhat / np.maximum(nzhat, TINY)[..., None]
        perp = _split(z, u)[1]
        perp2 = _dot(perp, perp)
        if kind is Kind.QO:
            val = lam * perp2 / (2 * nzhat)
        elif kind is Kind.QD:
            val = np.where(c >= 0, lam * perp2 / (2 * nzhat), lam * nz**2 / (2 * nzhat))
        else:
            val = lam * np.sqrt(perp2)
    else:
        val = lam * nz * (1 - c)
    val = np.where(zero, 0.0, val)
    return val[()] if np.ndim(val) == 0 else val


def eval_conjugate(kind, z, zhat, lam, tol=ALIGN_TOL):
    """Convex conjugate ``φ*(z, ẑ)`` in its first argument.

    The indicator domains are tested with a relative tolerance ``tol``
    (relative to ``max(‖z‖, λ)``) so that points produced by a projection
    onto a measure-zero set count as feasible.
    """
    kind = parse_kind(kind)
    z = np.asarray(z, dtype=float)
    zhat = np.asarray(zhat, dtype=float)
    nzhat = block_norm(zhat)
    u = zhat / np.maximum(nzhat, TINY)[..., None]
    along, perp = _split(z, u)
    scale = tol * np.maximum(block_norm(z), lam)
    if kind is Kind.HO:
        val = np.where(np.abs(along) <= scale, 0.0, np.inf)
    elif kind is Kind.HD:
        val = np.where(along <= scale, 0.0, np.inf)
    elif kind is Kind.QO:
        val = np.where(np.abs(along) <= scale, nzhat / (2 * lam) * block_norm(perp) ** 2, np.inf)
    elif kind is Kind.QD:
        val = np.where(along <= scale, nzhat / (2 * lam) * block_norm(z) ** 2, np.inf)
    elif kind is Kind.SO:
        ok = (np.abs(along) <= scale) & (block_norm(perp) <= lam + scale)
        val = np.where(ok, 0.0, np.inf)
    else:
        val = np.where(block_norm(z + lam * u) <= lam + scale, 0.0, np.inf)
    return val[()] if np.ndim(val) == 0 else val


def prox_conj(kind, z0, anchor, lam, kappa):
    """``prox_{κφ*}(z0)`` in closed form.

    Parameters
    ----------
    kind : Kind or str
    z0 : ndarray, shape (..., b)
    anchor : AnchorBlock
        Direction (and, for QO/QD, norm) of ``ẑ``.
    lam : float
        Penalty weight ``λ``.
    kappa : float
        Prox step ``κ``; the indicator kinds (HO, HD, SO, SD) ignore it.
    """
    kind = parse_kind(kind)
    z0 = np.asarray(z0, dtype=float)
    u = np.asarray(anchor.direction, dtype=float)
    along, perp = _split(z0, u)
    if kind is Kind.HO:
        return perp
    if kind is Kind.HD:
        return np.where((along >= 0)[..., None], perp, z0)
    if kind is Kind.SO:
        return lam * perp / np.maximum(lam, block_norm(perp))[..., None]
    if kind is Kind.SD:
        shifted = z0 + lam * u
        return lam * (shifted / np.maximum(lam, block_norm(shifted))[..., None] - u)
    nrm = np.asarray(anchor.norm, dtype=float)
    if np.any(nrm <= 0):
        raise ValueError(f"{kind} prox requires anchors with a positive norm")
    shrink = (lam / (lam + kappa * nrm))[..., None]
    if kind is Kind.QO:
        return shrink * perp
    return shrink * np.where((along >= 0)[..., None], perp, z0)


def prox_primal(kind, zeta0, anchor, lam, tau):
    """``prox_{τφ}(ζ0)`` through the Moreau identity ``ζ0 - τ prox_{φ*/τ}(ζ0/τ)``."""
    zeta0 = np.asarray(zeta0, dtype=float)
    return zeta0 - tau * prox_conj(kind, zeta0 / tau, anchor, lam, 1.0 / tau)


def ball_project(xi, lam):
    """Blockwise projection onto the ℓ2 ball of radius ``lam``."""
    xi = np.asarray(xi, dtype=float)
    return lam * xi / np.maximum(lam, block_norm(xi))[..., None]


def block_soft_threshold(zeta, lam):
    """Blockwise soft thresholding: zero when ``‖ζ_i‖ <= λ``, else ``ζ_i (1 - λ/‖ζ_i‖)``."""
    zeta = np.asarray(zeta, dtype=float)
    nrm = block_norm(zeta)
    factor = np.where(nrm > lam, 1.0 - lam / np.maximum(nrm, TINY), 0.0)
    return zeta * factor[..., None]


def bregman_block(z, eta):
    """Bregman divergence of the ℓ2 norm, ``‖z‖ - <η, z>``, for ``‖η‖ <= 1``."""
    z = np.asarray(z, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(block_norm(eta) > 1 + 1e-12):
        raise ValueError("subgradient blocks must have norm <= 1")
    val = block_norm(z) - _dot(eta, z)
    return val[()] if np.ndim(val) == 0 else val


def bregman_ball_prox_conj(xi0, eta, lam):
    """Prox of the conjugate of ``λ(‖z‖ - <η, z>)``: project onto the ball ``B(-λη, λ)``.

    With ``η = 0`` this is :func:`ball_project`; with a unit ``η`` it is the SD
    conjugate prox anchored on ``η``.
    """
    center = -lam * np.asarray(eta, dtype=float)
    return center + ball_project(np.asarray(xi0, dtype=float) - center, lam)


def min_norm_subgradient(zhat, support):
    """Minimal-norm element of the block subdifferential at ``zhat``.

    Unit blocks ``zhat_i / ‖zhat_i‖`` on the support, zero elsewhere.
    """
    zhat = np.asarray(zhat, dtype=float)
    support = np.asarray(support, dtype=bool)
    nrm = block_norm(zhat)
    eta = zhat / np.maximum(nrm, TINY)[..., None]
    return np.where((support & (nrm > 0))[..., None], eta, 0.0)


def landscape_rows(kind, lam, n_theta=181, n_amp=61, amp_max=3.0):
    """Sample ``φ(A·R(θ)ẑ, ẑ)`` with ``ẑ = (1, 0)``.

    Yields ``(theta, amplitude, value)`` for ``θ`` on a uniform grid of
    ``[-π, π]`` and ``A`` on a uniform grid of ``[0, amp_max]``.
    """
    kind = parse_kind(kind)
    half = (n_theta - 1) / 2
    thetas = math.pi * (np.arange(n_theta) - half) / half
    amps = amp_max * np.arange(n_amp) / (n_amp - 1)
    zhat = np.array([1.0, 0.0])
    for theta in thetas:
        direction = np.array([math.cos(theta), math.sin(theta)])
        z = amps[:, None] * direction
        values = eval_penalty(kind, z, np.broadcast_to(zhat, z.shape), lam)
        for a, v in zip(amps, np.atleast_1d(values)):
            yield float(theta), float(a), float(v)

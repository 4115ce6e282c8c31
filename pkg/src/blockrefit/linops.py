"""Linear operators: analysis operators Γ, forward operators Φ, and their resolvents.

Array conventions
-----------------
Images are ``float64`` arrays of shape ``(H, W)`` (gray) or ``(H, W, C)``.
Block fields keep the block coordinates on the last axis, so ``Γx`` has shape
``(H, W, 2)`` for gray TV, ``(H, W, 6)`` for color TV and ``(2, H, W, 3)`` for
second-order TGV.  Every function working on blocks reduces over ``axis=-1``.

Gradients use forward differences with a Neumann boundary: the difference is
zero on the last row (component 0, along axis 0) and the last column
(component 1, along axis 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft
from scipy.sparse.linalg import LinearOperator, cg

__all__ = [
    "ConvergenceError",
    "grad",
    "grad_adjoint",
    "div",
    "gamma_color",
    "gamma_color_adjoint",
    "backward_diff",
    "backward_diff_adjoint",
    "gamma_tgv",
    "gamma_tgv_adjoint",
    "power_iteration_norm",
    "conjugate_gradient",
    "AnalysisOperator",
    "ForwardOperator",
    "Identity",
    "PeriodicConvolution",
    "DenseMatrix",
    "FirstChannel",
    "MAX_DENSE_PIXELS",
]

MAX_DENSE_PIXELS = 4096
SQRT2 = math.sqrt(2.0)


class ConvergenceError(RuntimeError):
    """An iterative linear solve stopped before reaching its tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def _forward_diff(x, axis):
    d = np.zeros_like(x)
    if axis == 0:
        d[:-1] = x[1:] - x[:-1]
    else:
        d[:, :-1] = x[:, 1:] - x[:, :-1]
    return d


def _forward_diff_adjoint(p, axis):
    out = np.zeros_like(p)
    if axis == 0:
        out[:-1] -= p[:-1]
        out[1:] += p[:-1]
    else:
        out[:, :-1] -= p[:, :-1]
        out[:, 1:] += p[:, :-1]
    return out


def backward_diff(z, axis):
    """Backward difference ``z[i] - z[i-1]``, zero on the first row/column.

    With this boundary rule the difference of a constant field is exactly
    zero everywhere, so the symmetrized derivative annihilates constants.
    """
    d = np.zeros_like(z)
    if axis == 0:
        d[1:] = z[1:] - z[:-1]
    else:
        d[:, 1:] = z[:, 1:] - z[:, :-1]
    return d


def backward_diff_adjoint(p, axis):
    """Exact transpose of :func:`backward_diff`."""
    out = np.zeros_like(p)
    if axis == 0:
        out[1:] += p[1:]
        out[:-1] -= p[1:]
    else:
        out[:, 1:] += p[:, 1:]
        out[:, :-1] -= p[:, 1:]
    return out


def _require_2d(x, what):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"{what} expects a single-channel (H, W) image, got shape {x.shape}")
    return x


def grad(x):
    """Discrete gradient of a gray image.

    Parameters
    ----------
    x : ndarray, shape (H, W)

    Returns
    -------
    ndarray, shape (H, W, 2)
        Block ``[i, j]`` holds the forward differences along rows and
        columns at pixel ``(i, j)``.
    """
    x = _require_2d(x, "grad")
    return np.stack([_forward_diff(x, 0), _forward_diff(x, 1)], axis=-1)


def grad_adjoint(p):
    """Adjoint of :func:`grad`, i.e. ``-div p``."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 3 or p.shape[-1] != 2:
        raise ValueError(f"grad_adjoint expects an (H, W, 2) field, got shape {p.shape}")
    return _forward_diff_adjoint(p[..., 0], 0) + _forward_diff_adjoint(p[..., 1], 1)


def div(p):
    """Discrete divergence, the negative adjoint of :func:`grad`."""
    return -grad_adjoint(p)


def gamma_color(x):
    """Color TV analysis operator: both gradient components of R, G and B.

    Maps ``(H, W, 3)`` to ``(H, W, 6)`` ordered ``(∇¹R, ∇²R, ∇¹G, ∇²G, ∇¹B, ∇²B)``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[-1] != 3:
        raise ValueError(f"gamma_color expects an (H, W, 3) image, got shape {x.shape}")
    return np.concatenate([grad(x[..., c]) for c in range(3)], axis=-1)


def gamma_color_adjoint(p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 3 or p.shape[-1] != 6:
        raise ValueError(f"gamma_color_adjoint expects an (H, W, 6) field, got shape {p.shape}")
    return np.stack([grad_adjoint(p[..., 2 * c : 2 * c + 2]) for c in range(3)], axis=-1)


def gamma_tgv(X, zeta):
    """Second-order TGV analysis operator on the composite ``X = (x, z¹, z²)``.

    Parameters
    ----------
    X : ndarray, shape (H, W, 3)
        Channel 0 is the image, channels 1-2 the auxiliary vector field.
    zeta : float
        Non-negative coupling weight.

    Returns
    -------
    ndarray, shape (2, H, W, 3)
        ``out[0]`` holds ``(∇¹x - ζz¹, ∇²x - ζz², 0)`` and ``out[1]`` holds
        ``(∇̄¹z¹, ∇̄²z², (∇̄¹z² + ∇̄²z¹)/√2)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 3 or X.shape[-1] != 3:
        raise ValueError(f"gamma_tgv expects an (H, W, 3) composite, got shape {X.shape}")
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    x, z1, z2 = X[..., 0], X[..., 1], X[..., 2]
    out = np.empty((2,) + X.shape)
    out[0, ..., 0] = _forward_diff(x, 0) - zeta * z1
    out[0, ..., 1] = _forward_diff(x, 1) - zeta * z2
    out[0, ..., 2] = 0.0
    out[1, ..., 0] = backward_diff(z1, 0)
    out[1, ..., 1] = backward_diff(z2, 1)
    out[1, ..., 2] = (backward_diff(z2, 0) + backward_diff(z1, 1)) / SQRT2
    return out


def gamma_tgv_adjoint(e, zeta):
    """Exact transpose of :func:`gamma_tgv`, shape (2, H, W, 3) -> (H, W, 3)."""
    e = np.asarray(e, dtype=float)
    if e.ndim != 4 or e.shape[0] != 2 or e.shape[-1] != 3:
        raise ValueError(f"gamma_tgv_adjoint expects a (2, H, W, 3) field, got shape {e.shape}")
    a, s = e[0], e[1]
    out = np.empty(e.shape[1:])
    out[..., 0] = _forward_diff_adjoint(a[..., 0], 0) + _forward_diff_adjoint(a[..., 1], 1)
    out[..., 1] = (
        -zeta * a[..., 0]
        + backward_diff_adjoint(s[..., 0], 0)
        + backward_diff_adjoint(s[..., 2], 1) / SQRT2
    )
    out[..., 2] = (
        -zeta * a[..., 1]
        + backward_diff_adjoint(s[..., 1], 1)
        + backward_diff_adjoint(s[..., 2], 0) / SQRT2
    )
    return out


# ---------------------------------------------------------------------------
# Norm estimation and linear solves
# ---------------------------------------------------------------------------


def power_iteration_norm(forward, adjoint, shape, iters=200, seed=0, history=False):
    """Estimate ``‖A‖₂`` by power iteration on ``AᵗA``.

    The returned estimate ``‖A x_k‖`` with ``x_k ∝ (AᵗA)^k x_0`` is a
    Rayleigh quotient, hence non-decreasing in ``k`` and never above the
    true norm.

    Parameters
    ----------
    forward, adjoint : callable
        The operator and its transpose.
    shape : tuple
        Shape of the operator's input.
    iters : int
        Number of power steps (at least 1).
    seed : int
        Seed of the random starting vector.
    history : bool
        Also return the array of per-iteration estimates.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    estimates = np.empty(iters)
    for k in range(iters):
        y = forward(x)
        estimates[k] = np.linalg.norm(y)
        x = adjoint(y)
        nx = np.linalg.norm(x)
        if nx == 0.0:
            estimates[k:] = 0.0
            break
        x /= nx
    if history:
        return float(estimates[-1]), estimates
    return float(estimates[-1])


def conjugate_gradient(apply, rhs, rtol=1e-10, maxiter=None, x0=None):
    """Solve the SPD system ``apply(u) = rhs`` matrix-free.

    Raises :class:`ConvergenceError` with the achieved relative residual when
    the tolerance is not met within ``maxiter`` iterations.
    """
    rhs = np.asarray(rhs, dtype=float)
    shape = rhs.shape
    b = rhs.ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(shape)
    size = b.size
    op = LinearOperator((size, size), matvec=lambda v: apply(v.reshape(shape)).ravel(), dtype=float)
    if maxiter is None:
        maxiter = max(1000, 10 * int(math.sqrt(size)))
    guess = None if x0 is None else np.asarray(x0, dtype=float).ravel()
    u, _ = cg(op, b, x0=guess, rtol=rtol, atol=0.0, maxiter=maxiter)
    residual = np.linalg.norm(apply(u.reshape(shape)).ravel() - b) / bnorm
    # scipy tracks a recursively updated residual; accept small drift from it
    if not np.isfinite(residual) or residual > 10 * rtol:
        raise ConvergenceError("conjugate gradient did not converge", residual)
    return u.reshape(shape)


def _neumann_laplacian_eigs(h, w):
    ky = 2.0 - 2.0 * np.cos(np.pi * np.arange(h) / h)
    kx = 2.0 - 2.0 * np.cos(np.pi * np.arange(w) / w)
    return ky[:, None] + kx[None, :]


# ---------------------------------------------------------------------------
# Analysis operators
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class AnalysisOperator:
    """A block analysis operator ``Γ`` with its adjoint and a norm estimate.

    Build instances with :meth:`tv_gray`, :meth:`tv_color` or :meth:`tgv`.
    ``op_norm`` is computed once at construction with 200 power iterations
    from seed 0, so step sizes derived from it are reproducible.
    """

    kind: str
    image_shape: tuple
    block_shape: tuple
    forward: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    zeta: float = 0.0
    norm_iters: int = 200
    op_norm: float = field(init=False)

    def __post_init__(self):
        self.op_norm = power_iteration_norm(
            self.forward, self.adjoint, self.image_shape, iters=self.norm_iters, seed=0
        )

    @classmethod
    def tv_gray(cls, shape):
        h, w = shape
        return cls("tv_gray", (h, w), (h, w, 2), grad, grad_adjoint)

    @classmethod
    def tv_color(cls, shape):
        h, w = shape[:2]
        return cls("tv_color", (h, w, 3), (h, w, 6), gamma_color, gamma_color_adjoint)

    @classmethod
    def tgv(cls, shape, zeta):
        if zeta < 0:
            raise ValueError("zeta must be non-negative")
        h, w = shape[:2]
        zeta = float(zeta)
        return cls(
            "tgv",
            (h, w, 3),
            (2, h, w, 3),
            lambda X: gamma_tgv(X, zeta),
            lambda e: gamma_tgv_adjoint(e, zeta),
            zeta=zeta,
        )

    @property
    def block_size(self):
        return self.block_shape[-1]

    @property
    def n_blocks(self):
        return int(np.prod(self.block_shape[:-1]))

    def __call__(self, x):
        return self.forward(x)

    def normal(self, x):
        """``ΓᵗΓx``."""
        return self.adjoint(self.forward(x))

    def resolvent(self, rhs, method="auto", rtol=1e-10):
        """Solve ``(Id + ΓᵗΓ) u = rhs``.

        ``method="auto"`` uses an exact DCT-II diagonalization for the TV
        kinds (``ΓᵗΓ`` is then the Neumann Laplacian per channel) and
        conjugate gradient otherwise.  ``method="cg"`` forces CG.
        """
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != self.image_shape:
            raise ValueError(f"rhs shape {rhs.shape} does not match {self.image_shape}")
        if method == "auto" and self.kind in ("tv_gray", "tv_color"):
            h, w = self.image_shape[:2]
            denom = 1.0 + _neumann_laplacian_eigs(h, w)
            if rhs.ndim == 3:
                denom = denom[..., None]
            coef = scipy.fft.dctn(rhs, type=2, norm="ortho", axes=(0, 1))
            return scipy.fft.idctn(coef / denom, type=2, norm="ortho", axes=(0, 1))
        if method not in ("auto", "cg"):
            raise ValueError(f"unknown resolvent method {method!r}")
        return conjugate_gradient(lambda u: u + self.normal(u), rhs, rtol=rtol)


# ---------------------------------------------------------------------------
# Forward operators
# ---------------------------------------------------------------------------


class ForwardOperator:
    """Base class for the observation operator ``Φ``.

    Subclasses provide ``apply``, ``adjoint`` and ``resolvent(tau, v)``, the
    latter returning ``(Id + τΦᵗΦ)⁻¹ v``.
    """

    kind = "abstract"

    def apply(self, x):
        raise NotImplementedError

    def adjoint(self, r):
        raise NotImplementedError

    def resolvent(self, tau, v):
        raise NotImplementedError

    def __call__(self, x):
        return self.apply(x)

    def normal(self, x):
        return self.adjoint(self.apply(x))

    @staticmethod
    def _check_tau(tau):
        if not tau > 0:
            raise ValueError("tau must be positive")


class Identity(ForwardOperator):
    kind = "identity"

    def apply(self, x):
        return np.array(x, dtype=float, copy=True)

    def adjoint(self, r):
        return np.array(r, dtype=float, copy=True)

    def resolvent(self, tau, v):
        self._check_tau(tau)
        return np.asarray(v, dtype=float) / (1.0 + tau)


class PeriodicConvolution(ForwardOperator):
    """Circular 2D convolution, applied independently to every channel.

    The kernel's center pixel ``(kh // 2, kw // 2)`` is the origin.
    """

    kind = "periodic_convolution"

    def __init__(self, kernel, image_shape):
        kernel = np.asarray(kernel, dtype=float)
        if kernel.ndim != 2:
            raise ValueError("kernel must be 2D")
        h, w = image_shape[:2]
        kh, kw = kernel.shape
        if kh > h or kw > w:
            raise ValueError("kernel larger than the image")
        padded = np.zeros((h, w))
        padded[:kh, :kw] = kernel
        padded = np.roll(padded, (-(kh // 2), -(kw // 2)), axis=(0, 1))
        self.kernel = kernel
        self.image_shape = tuple(image_shape)
        self.transfer = np.fft.fft2(padded)

    def _filter(self, x, transfer):
        x = np.asarray(x, dtype=float)
        if x.ndim == 3:
            transfer = transfer[..., None]
        return np.real(np.fft.ifft2(np.fft.fft2(x, axes=(0, 1)) * transfer, axes=(0, 1)))

    def apply(self, x):
        return self._filter(x, self.transfer)

    def adjoint(self, r):
        return self._filter(r, np.conj(self.transfer))

    def resolvent(self, tau, v):
        self._check_tau(tau)
        return self._filter(v, 1.0 / (1.0 + tau * np.abs(self.transfer) ** 2))


class DenseMatrix(ForwardOperator):
    """Explicit matrix acting on the flattened image (at most 4096 pixels)."""

    kind = "dense_matrix"

    def __init__(self, matrix, image_shape, rtol=1e-10):
        matrix = np.asarray(matrix, dtype=float)
        n = int(np.prod(image_shape))
        if matrix.ndim != 2 or matrix.shape[1] != n:
            raise ValueError(f"matrix must have {n} columns, got shape {matrix.shape}")
        if n > MAX_DENSE_PIXELS:
            raise ValueError(f"dense operators are limited to {MAX_DENSE_PIXELS} pixels, got {n}")
        self.matrix = matrix
        self.image_shape = tuple(image_shape)
        self.rtol = rtol

    def apply(self, x):
        return self.matrix @ np.asarray(x, dtype=float).ravel()

    def adjoint(self, r):
        return (self.matrix.T @ np.asarray(r, dtype=float)).reshape(self.image_shape)

    def resolvent(self, tau, v):
        self._check_tau(tau)
        return conjugate_gradient(lambda u: u + tau * self.normal(u), v, rtol=self.rtol)


class FirstChannel(ForwardOperator):
    """``Ξ(x, z) = Φx``: applies an inner operator to channel 0 of a composite."""

    kind = "first_channel"

    def __init__(self, inner, channels=3):
        self.inner = inner
        self.channels = channels

    def apply(self, X):
        return self.inner.apply(np.asarray(X, dtype=float)[..., 0])

    def adjoint(self, r):
        x = self.inner.adjoint(r)
        out = np.zeros(x.shape + (self.channels,))
        out[..., 0] = x
        return out

    def resolvent(self, tau, V):
        self._check_tau(tau)
        out = np.array(V, dtype=float, copy=True)
        out[..., 0] = self.inner.resolvent(tau, out[..., 0])
        return out

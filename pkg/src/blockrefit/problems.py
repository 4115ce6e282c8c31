"""Problem builders, synthetic scenes, noise synthesis and quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linops import AnalysisOperator, FirstChannel, ForwardOperator, Identity
from .penalties import block_norm

__all__ = [
    "FAMILIES",
    "ProblemSpec",
    "make_problem",
    "add_gaussian_noise",
    "gaussian_field",
    "psnr",
    "SCENES",
    "build_scene",
    "motion_blur_kernel",
    "deblur_lambda",
    "tgv_embed",
    "tgv_extract",
]

FAMILIES = ("tv_gray", "tv_color", "tgv")
_BLOCK_SIZES = {"tv_gray": 2, "tv_color": 6, "tgv": 3}
PEAK = 255.0


@dataclass(eq=False)
class ProblemSpec:
    """``min_x ½‖Φx - y‖² + λ‖Γx‖₁,₂`` for one of the experiment families.

    For ``family="tgv"`` the primal variable is the composite ``(x, z¹, z²)``
    of shape ``(H, W, 3)`` and ``forward`` applies ``Φ`` to channel 0 only.
    ``x_true`` is optional ground truth used for PSNR traces.
    """

    family: str
    forward: ForwardOperator
    analysis: AnalysisOperator
    lam: float
    y: np.ndarray
    zeta: float = 0.0
    x_true: np.ndarray | None = None
    phi_t_y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.analysis.block_size != _BLOCK_SIZES[self.family]:
            raise ValueError("analysis block size does not match the family")
        self.y = np.asarray(self.y, dtype=float)
        if not np.all(np.isfinite(self.y)):
            raise ValueError("observation contains non-finite values")
        self.phi_t_y = self.forward.adjoint(self.y)
        if self.phi_t_y.shape != self.primal_shape:
            raise ValueError("forward operator does not map the primal space onto y")
        self._check_operators()

    def _check_operators(self, adjoint_tol=1e-8, resolvent_tol=1e-7):
        # one random probe per operator; cheap next to any solve
        rng = np.random.default_rng(0)
        G, F = self.analysis, self.forward
        x = rng.normal(size=self.primal_shape)
        for name, fwd, adj, out in (("analysis", G, G.adjoint, G.block_shape),
                                    ("forward", F.apply, F.adjoint, self.y.shape)):
            g = rng.normal(size=out)
            gap = abs(np.vdot(fwd(x), g) - np.vdot(x, adj(g))) / (np.linalg.norm(x) * np.linalg.norm(g))
            if gap > adjoint_tol:
                raise ValueError(f"{name} operator fails the adjoint test (gap {gap:.1e})")
        u = G.resolvent(x)
        res = np.linalg.norm(u + G.normal(u) - x) / np.linalg.norm(x)
        if res > resolvent_tol:
            raise ValueError(f"analysis resolvent residual {res:.1e}")
        u = F.resolvent(1.0, x)
        res = np.linalg.norm(u + F.normal(u) - x) / np.linalg.norm(x)
        if res > resolvent_tol:
            raise ValueError(f"forward resolvent residual {res:.1e}")

    @property
    def primal_shape(self):
        return self.analysis.image_shape

    def extract(self, X):
        """The image part of a primal iterate (channel 0 for TGV)."""
        return tgv_extract(X) if self.family == "tgv" else X

    def fidelity(self, x):
        r = self.forward.apply(x) - self.y
        return 0.5 * float(np.vdot(r, r))

    def objective(self, x):
        """``½‖Φx - y‖² + λ‖Γx‖₁,₂``."""
        z = self.analysis(x)
        return self.fidelity(x) + self.lam * float(np.sum(block_norm(z)))


def make_problem(family, y, lam, forward=None, zeta=0.0, x_true=None):
    """Bind ``Φ``, ``Γ``, ``λ`` and data ``y`` for ``family``.

    ``forward`` defaults to the identity (denoising).  For TGV, ``forward``
    is the operator on the image and is wrapped to act on channel 0.
    """
    y = np.asarray(y, dtype=float)
    forward = forward if forward is not None else Identity()
    if family == "tv_gray":
        analysis = AnalysisOperator.tv_gray(y.shape[:2])
    elif family == "tv_color":
        analysis = AnalysisOperator.tv_color(y.shape[:2])
    elif family == "tgv":
        analysis = AnalysisOperator.tgv(y.shape[:2], zeta)
        forward = FirstChannel(forward)
    else:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return ProblemSpec(family, forward, analysis, float(lam), y, zeta=float(zeta), x_true=x_true)


# ---------------------------------------------------------------------------
# Noise and metrics
# ---------------------------------------------------------------------------


def gaussian_field(shape, seed):
    """Standard normal samples by Box-Muller over the Philox-4x64 counter PRNG.

    Uniforms come from ``numpy.random.Philox(seed)``; each pair
    ``(u1, u2)`` yields ``sqrt(-2 ln u1) cos(2πu2)`` and
    ``sqrt(-2 ln u1) sin(2πu2)``.  Deterministic for a given seed.
    """
    n = int(np.prod(shape))
    pairs = (n + 1) // 2
    gen = np.random.Generator(np.random.Philox(seed))
    u = gen.random((2, pairs))
    u1 = 1.0 - u[0]  # in (0, 1], keeps the log finite
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u[1]
    g = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]
    return g.reshape(shape)


def add_gaussian_noise(x, sigma, seed):
    """``x + σ g`` with ``g`` from :func:`gaussian_field`."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    x = np.asarray(x, dtype=float)
    if sigma == 0:
        return x.copy()
    return x + sigma * gaussian_field(x.shape, seed)


def psnr(x_ref, x):
    """Peak signal-to-noise ratio ``10 log10(255² n / ‖x_ref - x‖²)`` in dB.

    Returns ``inf`` for identical images.
    """
    x_ref = np.asarray(x_ref, dtype=float)
    x = np.asarray(x, dtype=float)
    if x_ref.shape != x.shape:
        raise ValueError(f"shape mismatch {x_ref.shape} vs {x.shape}")
    mse = float(np.mean((x_ref - x) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK**2 / mse)


# ---------------------------------------------------------------------------
# Scenes
# ---------------------------------------------------------------------------


def _disk(h, w, cy, cx, r):
    yy, xx = np.mgrid[:h, :w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def _shapes128():
    h = w = 128
    img = np.full((h, w), 110.0)
    img[14:74, 14:74] = 235.0  # large bright square
    img[50:106, 56:112] = 170.0  # second square overlapping the first
    img[_disk(h, w, 100, 30, 14)] = 40.0  # dark disk
    img[_disk(h, w, 30, 100, 16)] = 200.0
    return img


def _cameraman_like():
    """256² stand-in: sky gradient, textured ground, a silhouette and thin structures."""
    h = w = 256
    yy, xx = np.mgrid[:h, :w].astype(float)
    img = 170.0 + 40.0 * (1 - yy / h)  # sky
    ground = yy > 180
    texture = 12.0 * np.sin(xx / 3.0) * np.cos(yy / 5.0)
    img[ground] = (90.0 + texture)[ground]
    # silhouette: torso, head and legs
    torso = (np.abs(xx - 110) < 22) & (yy > 70) & (yy < 165)
    head = _disk(h, w, 55, 110, 16)
    legs = ((np.abs(xx - 98) < 7) | (np.abs(xx - 122) < 7)) & (yy >= 165) & (yy < 235)
    img[torso | head | legs] = 25.0
    # tripod: thin oblique lines
    for slope, x0 in ((0.35, 150), (-0.35, 150), (0.0, 150)):
        for t in range(110, 235):
            c = int(round(x0 + slope * (t - 110)))
            img[t, c : c + 2] = 40.0
    # camera box and distant towers
    img[95:115, 135:165] = 55.0
    img[120:180, 200:212] = 140.0
    img[100:180, 225:233] = 150.0
    return np.clip(img, 0.0, 255.0)


def _color256():
    """256² RGB composite built from the gray stand-in plus colored patches."""
    base = _cameraman_like()
    img = np.stack([base, base * 0.85 + 20.0, base * 0.6 + 60.0], axis=-1)
    h, w = base.shape
    img[_disk(h, w, 200, 60, 30)] = (210.0, 60.0, 40.0)
    img[20:70, 170:240] = (40.0, 160.0, 90.0)
    return np.clip(img, 0.0, 255.0)


def _elevation(size=128):
    """Piecewise-affine elevation map with flat roofs, gables, ramps and chimneys."""
    h = w = size
    yy, xx = np.mgrid[:h, :w].astype(float)
    img = 20.0 + 0.15 * xx  # gently sloped ground
    # flat-roof building
    img[16:56, 12:52] = 150.0
    # gable-roof building: two affine roof planes
    left = (xx >= 20) & (xx < 42)
    right = (xx >= 42) & (xx < 64)
    in_rows = (yy >= 70) & (yy < 114)
    img[in_rows & left] = (120.0 + 4.0 * (xx - 20))[in_rows & left]
    img[in_rows & right] = (208.0 - 4.0 * (xx - 42))[in_rows & right]
    # sidewalk ramp between street level and a plateau
    ramp = (yy >= 20) & (yy < 60) & (xx >= 70) & (xx < 100)
    img[ramp] = (40.0 + 3.0 * (xx - 70))[ramp]
    img[20:60, 100:118] = 130.0
    # chimneys on the flat roof and the plateau
    img[24:28, 20:24] = 240.0
    img[44:48, 40:44] = 235.0
    img[30:34, 108:112] = 250.0
    return np.clip(img, 0.0, 255.0)


SCENES = {
    "shapes128": _shapes128,
    "cameraman_like": _cameraman_like,
    "color256": _color256,
    "elevation": _elevation,
}


def build_scene(name):
    """Deterministic synthetic scene with values in [0, 255]."""
    try:
        return SCENES[name]()
    except KeyError:
        raise ValueError(f"unknown scene {name!r}; expected one of {sorted(SCENES)}") from None


def motion_blur_kernel(length=10, angle=45.0):
    """Normalized linear motion kernel along ``angle`` degrees."""
    if length < 1:
        raise ValueError("length must be >= 1")
    theta = math.radians(angle)
    size = length if length % 2 == 1 else length + 1
    kernel = np.zeros((size, size))
    c = size // 2
    for t in np.linspace(-(length - 1) / 2, (length - 1) / 2, 4 * length):
        i = int(round(c - t * math.sin(theta)))
        j = int(round(c + t * math.cos(theta)))
        kernel[i, j] = 1.0
    return kernel / kernel.sum()


def deblur_lambda(sigma):
    """Regularization preset ``λ = 4.3σ`` used for color denoising and deblurring."""
    return 4.3 * sigma


def tgv_embed(x, z=None):
    """Stack an image and an optional vector field into the TGV composite."""
    x = np.asarray(x, dtype=float)
    X = np.zeros(x.shape + (3,))
    X[..., 0] = x
    if z is not None:
        X[..., 1:] = z
    return X


def tgv_extract(X):
    """Image channel of a TGV composite ``(x, z¹, z²)``."""
    X = np.asarray(X)
    if X.ndim != 3 or X.shape[-1] != 3:
        raise ValueError(f"expected an (H, W, 3) composite, got shape {X.shape}")
    return X[..., 0].copy()

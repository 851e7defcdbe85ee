"""2-D isotropic undecimated (starlet / a trous) wavelet transform.

Sources are stored as rows of an ``n x (height*width)`` matrix; row ``i`` is
the image ``S[i].reshape(height, width)`` (row-major, fixed project-wide).
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

B3_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class Geometry:
    """Image size and number of detail scales shared by a set of sources."""

    width: int
    height: int
    n_scales: int = 3

    def __post_init__(self):
        if self.n_scales < 1:
            raise ValueError("n_scales must be >= 1")
        if min(self.width, self.height) < 2 ** self.n_scales:
            raise ValueError(
                f"image {self.height}x{self.width} too small for {self.n_scales} scales"
            )

    @property
    def n_pixels(self):
        return self.width * self.height

    @property
    def shape(self):
        return (self.height, self.width)


@dataclass
class StarletPyramid:
    """Detail planes (finest first) plus the coarse plane of one image."""

    details: np.ndarray  # (n_scales, height, width)
    coarse: np.ndarray  # (height, width)

    def __post_init__(self):
        if self.details.ndim != 3 or self.details.shape[1:] != self.coarse.shape:
            raise ValueError("detail planes and coarse plane must share image dimensions")

    @property
    def n_scales(self):
        return self.details.shape[0]

    @property
    def height(self):
        return self.coarse.shape[0]

    @property
    def width(self):
        return self.coarse.shape[1]

    def __mul__(self, alpha):
        return StarletPyramid(self.details * alpha, self.coarse * alpha)

    __rmul__ = __mul__


def _dilated_kernel(scale):
    step = 2**scale
    h = np.zeros(4 * step + 1)
    h[::step] = B3_KERNEL
    return h


def _smooth(planes, scale):
    # mirror = symmetric extension without repeating the edge sample
    h = _dilated_kernel(scale)
    out = convolve1d(planes, h, axis=-1, mode="mirror")
    return convolve1d(out, h, axis=-2, mode="mirror")


def forward_stack(images, n_scales):
    """Transform a stack ``(..., height, width)`` of images at once.

    Returns an array of shape ``(..., n_scales + 1, height, width)`` whose last
    plane along the scale axis is the coarse plane.
    """
    images = np.asarray(images, dtype=np.float64)
    h, w = images.shape[-2:]
    if n_scales < 1:
        raise ValueError("n_scales must be >= 1")
    if min(h, w) < 2**n_scales:
        raise ValueError(f"image {h}x{w} too small for {n_scales} scales")
    out = np.empty(images.shape[:-2] + (n_scales + 1, h, w))
    c = images
    for j in range(n_scales):
        c_next = _smooth(c, j)
        out[..., j, :, :] = c - c_next
        c = c_next
    out[..., n_scales, :, :] = c
    return out


def inverse_stack(coefs):
    """Additive inverse of :func:`forward_stack`."""
    return np.sum(coefs, axis=-3)


def starlet_forward(image, n_scales):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("image must be 2-D")
    coefs = forward_stack(image, n_scales)
    return StarletPyramid(coefs[:-1].copy(), coefs[-1].copy())


def starlet_inverse(p):
    return p.coarse + np.sum(p.details, axis=0)


def analyze_matrix(S, geom):
    """Transform every row of ``S``; returns ``(n, n_scales + 1, height, width)``."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[1] != geom.n_pixels:
        raise ValueError(
            f"source matrix has {S.shape[-1]} columns, geometry expects {geom.n_pixels}"
        )
    return forward_stack(S.reshape(S.shape[0], geom.height, geom.width), geom.n_scales)


def synthesize_matrix(coefs):
    coefs = np.asarray(coefs)
    return inverse_stack(coefs).reshape(coefs.shape[0], -1)


def analyze_sources(S, width, height, n_scales):
    """One :class:`StarletPyramid` per row of ``S``, in row order."""
    coefs = analyze_matrix(S, Geometry(width, height, n_scales))
    return [StarletPyramid(c[:-1].copy(), c[-1].copy()) for c in coefs]


def synthesize_sources(pyramids):
    if not pyramids:
        raise ValueError("no pyramids")
    return np.stack([starlet_inverse(p).ravel() for p in pyramids])

"""Orthonormal 2D type-II DCT applied independently per channel.

A feature map is a numpy array of shape (channels, height, width); its
spectrum shares the layout. Coefficients follow the orthonormal convention

    f[u, v] = (2 / sqrt(h * w)) * m(u) * m(v)
              * sum_ij z[i, j] * cos((2i+1) u pi / 2h) * cos((2j+1) v pi / 2w)

with m(0) = 1/sqrt(2) and m(k) = 1 for k > 0, so each axis transform is an
orthogonal matrix and Parseval holds. The 2D transform is evaluated as the
separable row-then-column product with cached basis matrices; arithmetic runs
at 64-bit precision and results are stored back in the input dtype.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import InvalidInputError

# Spatial-domain feature maps and their DCT-domain counterparts share the
# same (channels, h, w) ndarray layout.
FeatureMap = np.ndarray
Spectrum = np.ndarray


def require_feature_map(z: np.ndarray, name: str = "input") -> np.ndarray:
    """Validate (channels, h, w) shape, floating dtype, and finiteness."""
    z = np.asarray(z)
    if z.ndim != 3 or min(z.shape) < 1:
        raise InvalidInputError(f"{name}: expected shape (channels, h, w), got {z.shape}")
    if not np.issubdtype(z.dtype, np.floating):
        raise InvalidInputError(f"{name}: expected a floating dtype, got {z.dtype}")
    if not np.isfinite(z).all():
        raise InvalidInputError(f"{name}: contains non-finite values")
    return z


@lru_cache(maxsize=32)
def _basis(n: int) -> np.ndarray:
    # Row u is the u-th orthonormal DCT-II basis vector of length n.
    i = np.arange(n, dtype=np.float64)
    mat = np.sqrt(2.0 / n) * np.cos((2.0 * i + 1.0) * i[:, None] * np.pi / (2.0 * n))
    mat[0] /= np.sqrt(2.0)
    mat.setflags(write=False)
    return mat


def dct2(z: FeatureMap) -> Spectrum:
    """Per-channel orthonormal 2D DCT-II; output dtype matches the input."""
    z = require_feature_map(z)
    _, h, w = z.shape
    f = _basis(h) @ z.astype(np.float64, copy=False) @ _basis(w).T
    return f.astype(z.dtype, copy=False)


def idct2(f: Spectrum) -> FeatureMap:
    """Exact inverse of dct2 up to floating-point round-off."""
    f = require_feature_map(f)
    _, h, w = f.shape
    z = _basis(h).T @ f.astype(np.float64, copy=False) @ _basis(w)
    return z.astype(f.dtype, copy=False)

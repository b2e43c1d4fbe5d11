"""Image <-> latent codecs and 8-bit RGB PNG IO.

The identity codec maps pixels linearly from [0, 255] to [-1, 1] and back,
losslessly on the 8-bit grid. The avgpool codec adds k x k mean pooling on
encode and nearest-neighbor upsampling on decode. The remote codec defers to
a backbone autoencoder behind the wire protocol; pixel floats on the wire use
the same [-1, 1] convention.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import InvalidInputError
from .spectral import FeatureMap
from .wire import OP_DECODE, OP_ENCODE, RemoteConnection

# 8-bit RGB image, row-major, shape (height, width, 3).
ImageBuffer = np.ndarray


def require_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or min(img.shape[:2]) < 1:
        raise InvalidInputError(f"{name}: expected (h, w, 3) RGB, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise InvalidInputError(f"{name}: expected uint8 pixels, got {img.dtype}")
    return img


def _to_unit(img: ImageBuffer) -> np.ndarray:
    # (h, w, 3) uint8 -> (3, h, w) float32 in [-1, 1]
    v = img.astype(np.float64) * (2.0 / 255.0) - 1.0
    return np.moveaxis(v, 2, 0).astype(np.float32)


def _to_pixels(z: np.ndarray) -> ImageBuffer:
    # (3, h, w) floats -> (h, w, 3) uint8; clamp then round half away from zero
    v = np.clip(np.moveaxis(np.asarray(z, dtype=np.float64), 0, 2), -1.0, 1.0)
    px = np.floor((v + 1.0) * 127.5 + 0.5)
    return np.clip(px, 0.0, 255.0).astype(np.uint8)


class IdentityCodec:
    """Linear range map between 8-bit RGB and a 3-channel [-1, 1] float map."""

    def encode(self, img: ImageBuffer) -> FeatureMap:
        return _to_unit(require_image(img))

    def decode(self, z: FeatureMap) -> ImageBuffer:
        z = np.asarray(z)
        if z.ndim != 3 or z.shape[0] != 3:
            raise InvalidInputError(f"identity decode needs 3 channels, got shape {z.shape}")
        return _to_pixels(z)

    def describe(self) -> str:
        return "identity"


class AvgPoolCodec:
    """Identity range map followed by k x k mean pooling per channel; decode
    upsamples by nearest neighbor."""

    def __init__(self, k: int):
        k = int(k)
        if k < 1:
            raise InvalidInputError(f"pool size must be >= 1, got {k}")
        self.k = k

    def encode(self, img: ImageBuffer) -> FeatureMap:
        img = require_image(img)
        h, w = img.shape[:2]
        k = self.k
        if h % k or w % k:
            raise InvalidInputError(f"image {h}x{w} not divisible by pool size {k}")
        v = img.astype(np.float64) * (2.0 / 255.0) - 1.0
        v = np.moveaxis(v, 2, 0).reshape(3, h // k, k, w // k, k)
        return v.mean(axis=(2, 4)).astype(np.float32)

    def decode(self, z: FeatureMap) -> ImageBuffer:
        z = np.asarray(z)
        if z.ndim != 3 or z.shape[0] != 3:
            raise InvalidInputError(f"avgpool decode needs 3 channels, got shape {z.shape}")
        up = np.repeat(np.repeat(z, self.k, axis=1), self.k, axis=2)
        return _to_pixels(up)

    def describe(self) -> str:
        return f"avgpool:{self.k}"


class RemoteCodec:
    """Backbone autoencoder behind the wire protocol (opcodes 2 and 3)."""

    def __init__(self, host: str, port: int, timeout_ms: int | None = None):
        self._conn = RemoteConnection(host, port, timeout_ms)

    def encode(self, img: ImageBuffer) -> FeatureMap:
        return self._conn.request(OP_ENCODE, _to_unit(require_image(img)))

    def decode(self, z: FeatureMap) -> ImageBuffer:
        out = self._conn.request(OP_DECODE, np.asarray(z))
        if out.shape[0] != 3:
            raise InvalidInputError(f"remote decode returned {out.shape[0]} channels, expected 3")
        return _to_pixels(out)

    def describe(self) -> str:
        return f"remote:{self._conn.address}"

    def close(self) -> None:
        self._conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def encode(c, img: ImageBuffer) -> FeatureMap:
    """Encode an image into a latent feature map with codec `c`."""
    return c.encode(img)


def decode(c, z: FeatureMap) -> ImageBuffer:
    """Decode a latent feature map back to an 8-bit image with codec `c`."""
    return c.decode(z)


def read_png(path) -> ImageBuffer:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_png(img: ImageBuffer, path) -> None:
    Image.fromarray(require_image(img), mode="RGB").save(path, format="PNG")

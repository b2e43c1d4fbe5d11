"""Noise predictors: a closed-form Gaussian oracle, a remote-backbone client,
and the classifier-free guidance combination."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .schedule import Schedule
from .spectral import FeatureMap
from .wire import OP_EPS, RemoteConnection


@dataclass(frozen=True)
class Conditioning:
    kind: str  # "null" | "text"
    text: str | None = None

    def __post_init__(self):
        if self.kind not in ("null", "text"):
            raise InvalidConfigError(f"conditioning kind must be null or text, got {self.kind!r}")
        if self.kind == "null" and self.text is not None:
            raise InvalidConfigError("null conditioning carries no text")
        if self.kind == "text" and not isinstance(self.text, str):
            raise InvalidConfigError("text conditioning requires a string prompt")


NULL_COND = Conditioning("null")


def text_cond(prompt: str) -> Conditioning:
    return Conditioning("text", prompt)


class OracleConditioningWarning(UserWarning):
    """Text conditioning was requested from the unconditional oracle."""


class OracleDenoiser:
    """Optimal linear noise predictor for zero-mean isotropic Gaussian data.

    For x0 ~ N(0, sigma^2 I) and z_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps,
    the conditional expectation of eps given z_t is

        sqrt(1 - abar_t) * z_t / (abar_t * sigma^2 + 1 - abar_t),

    which makes every trajectory an exactly analyzable affine map. Pure and
    reentrant; ignores text conditioning (with a warning).
    """

    def __init__(self, sigma: float = 1.0):
        sigma = float(sigma)
        if sigma <= 0.0:
            raise InvalidConfigError(f"oracle sigma must be positive, got {sigma}")
        self.sigma = sigma

    def predict_eps(self, z_t: FeatureMap, t: int, cond: Conditioning,
                    s: Schedule) -> FeatureMap:
        if cond.kind == "text":
            warnings.warn("oracle denoiser is unconditional; text prompt has no effect",
                          OracleConditioningWarning, stacklevel=2)
        a = s.abar(t)
        gain = np.sqrt(1.0 - a) / (a * self.sigma ** 2 + 1.0 - a)
        return float(gain) * np.asarray(z_t)

    def describe(self) -> str:
        return f"oracle:{self.sigma:g}"


class RemoteDenoiser:
    """Noise predictions served by a backbone behind the wire protocol.

    One request in flight per connection; use separate handles for concurrent
    trajectories. Any backend failure aborts the caller (no silent fallback).
    """

    def __init__(self, host: str, port: int, timeout_ms: int | None = None):
        self._conn = RemoteConnection(host, port, timeout_ms)

    def predict_eps(self, z_t: FeatureMap, t: int, cond: Conditioning,
                    s: Schedule) -> FeatureMap:
        if not 1 <= t <= s.n_train:
            raise InvalidConfigError(f"timestep {t} outside [1, {s.n_train}]")
        text = cond.text if cond.kind == "text" else None
        return self._conn.request(OP_EPS, np.asarray(z_t), timestep=int(t), text=text)

    def describe(self) -> str:
        return f"remote:{self._conn.address}"

    def close(self) -> None:
        self._conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def predict_eps(d, z_t: FeatureMap, t: int, c: Conditioning, s: Schedule) -> FeatureMap:
    """Predict the noise content of z_t at timestep t with backend `d`."""
    return d.predict_eps(z_t, t, c, s)


def cfg_eps(eps_cond: FeatureMap, eps_uncond: FeatureMap, omega: float) -> FeatureMap:
    """omega * eps_cond + (1 - omega) * eps_uncond, elementwise."""
    eps_cond = np.asarray(eps_cond)
    eps_uncond = np.asarray(eps_uncond)
    if eps_cond.shape != eps_uncond.shape:
        raise InvalidInputError(
            f"guidance shapes differ: {eps_cond.shape} vs {eps_uncond.shape}"
        )
    omega = float(omega)
    return omega * eps_cond + (1.0 - omega) * eps_uncond

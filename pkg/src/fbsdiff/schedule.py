"""Noise schedule construction, DDIM timestep ladders, forward diffusion, and
clean-sample prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, SingularScheduleError
from .spectral import FeatureMap


@dataclass(frozen=True)
class Schedule:
    """Linear-beta noise schedule over `n_train` steps.

    `alpha_bar[t - 1]` is the running product for timestep t in [1, n_train];
    `abar(0)` is defined as 1 (empty product) so endpoint formulas are total.
    Immutable after construction; safe to share across threads.
    """

    n_train: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def abar(self, t: int) -> float:
        if not 0 <= t <= self.n_train:
            raise InvalidConfigError(f"timestep {t} outside [0, {self.n_train}]")
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])


def build_schedule(n_train: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> Schedule:
    """Linear beta ramp; alpha_bar is the running product of (1 - beta)."""
    if n_train < 1:
        raise InvalidConfigError(f"n_train must be >= 1, got {n_train}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise InvalidConfigError(
            f"betas must satisfy 0 < start <= end < 1, got [{beta_start}, {beta_end}]"
        )
    beta = np.linspace(beta_start, beta_end, n_train)
    alpha = 1.0 - beta
    for arr in (beta, alpha):
        arr.setflags(write=False)
    alpha_bar = np.cumprod(alpha)
    alpha_bar.setflags(write=False)
    return Schedule(n_train=n_train, beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def subsample(s: Schedule, t_steps: int) -> np.ndarray:
    """Uniform-stride ladder floor(i * n_train / T) for i = 1..T, ending at n_train."""
    if not 1 <= t_steps <= s.n_train:
        raise InvalidConfigError(f"ladder length {t_steps} outside [1, {s.n_train}]")
    i = np.arange(1, t_steps + 1, dtype=np.int64)
    return (i * s.n_train) // t_steps


def _check_broadcast(a, b, op: str) -> None:
    try:
        np.broadcast_shapes(np.shape(a), np.shape(b))
    except ValueError as exc:
        raise InvalidInputError(f"{op}: shapes {np.shape(a)} and {np.shape(b)} do not align") from exc


def forward_diffuse(x0: FeatureMap, t: int, eps: FeatureMap, s: Schedule) -> FeatureMap:
    """sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps."""
    _check_broadcast(x0, eps, "forward_diffuse")
    a = s.abar(t)
    return float(np.sqrt(a)) * np.asarray(x0) + float(np.sqrt(1.0 - a)) * np.asarray(eps)


def predict_x0(z_t: FeatureMap, t: int, eps_hat: FeatureMap, s: Schedule) -> FeatureMap:
    """(z_t - sqrt(1 - abar_t) * eps_hat) / sqrt(abar_t)."""
    _check_broadcast(z_t, eps_hat, "predict_x0")
    a = s.abar(t)
    if a == 0.0:
        raise SingularScheduleError(f"alpha_bar({t}) = 0; cannot invert the marginal")
    return (np.asarray(z_t) - float(np.sqrt(1.0 - a)) * np.asarray(eps_hat)) / float(np.sqrt(a))

"""Trajectory orchestration: DDIM inversion of the reference latent, lock-step
reconstruction and sampling with per-step band substitution during the
calibration phase, a free sampling tail, and final decode.

One run is sequential; the trajectories are data-dependent step to step.
Distinct runs with independent configs (and independent remote connections)
may execute concurrently.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .codec import IdentityCodec, ImageBuffer
from .denoiser import NULL_COND, Conditioning, OracleDenoiser, cfg_eps, predict_eps, text_cond
from .errors import InvalidConfigError, PipelineError
from .fbs import substitute_band
from .masks import BandMask, make_mask
from .schedule import Schedule, build_schedule, predict_x0, subsample
from .spectral import FeatureMap

# Noise for the sampling trajectory comes from this generator, seeded from the
# run config; the name is recorded in the run manifest so bit-exact
# reproducibility claims are checkable.
PRNG_NAME = "PCG64"


@dataclass
class PipelineConfig:
    """Run configuration. Defaults: 1000-step inversion, 50-step sampling,
    non-calibration fraction 0.45, guidance scale 7.5, low band threshold 80."""

    t_inv: int = 1000
    steps: int = 50
    lam: float = 0.45
    omega: float = 7.5
    mask_kind: str = "low"
    th_lp: int = 80
    th_hp: int = 5
    th_mp1: int = 5
    th_mp2: int = 80
    prompt: str = ""
    seed: int = 0
    denoiser: Any = field(default_factory=OracleDenoiser)
    codec: Any = field(default_factory=IdentityCodec)
    n_train: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    # Debug ablation: substitute only at the last calibration step. Known to
    # degrade output; not a supported mode.
    once_substitution: bool = False

    def validate(self) -> None:
        if not 1 <= self.steps <= self.t_inv <= self.n_train:
            raise InvalidConfigError(
                f"need 1 <= steps <= t_inv <= n_train, got "
                f"steps={self.steps}, t_inv={self.t_inv}, n_train={self.n_train}"
            )
        if not 0.0 <= self.lam < 1.0:
            raise InvalidConfigError(f"lambda must be in [0, 1), got {self.lam}")
        nc = self.non_calibration_steps()
        if not 0 <= nc < self.steps:
            raise InvalidConfigError(
                f"lambda * steps must round inside [0, steps), got {nc} of {self.steps}"
            )
        if self.th_mp1 >= self.th_mp2:
            raise InvalidConfigError(
                f"mid thresholds need th_mp1 < th_mp2, got {self.th_mp1} >= {self.th_mp2}"
            )
        if self.mask_kind not in ("low", "high", "mid", "full", "empty"):
            raise InvalidConfigError(f"unknown mask kind {self.mask_kind!r}")

    def non_calibration_steps(self) -> int:
        # round-half-to-even: lambda=0.45, steps=50 -> 22 free steps,
        # leaving 28 calibration steps.
        return int(round(self.lam * self.steps))

    def mask_thresholds(self):
        if self.mask_kind == "low":
            return self.th_lp
        if self.mask_kind == "high":
            return self.th_hp
        if self.mask_kind == "mid":
            return (self.th_mp1, self.th_mp2)
        return None

    def build_mask(self, h: int, w: int) -> BandMask:
        return make_mask(self.mask_kind, self.mask_thresholds(), h, w)

    def conditioning(self) -> Conditioning:
        return text_cond(self.prompt) if self.prompt else NULL_COND


@dataclass
class TrajectoryRecord:
    """Optional per-step latent retention plus run metadata.

    `inversion` maps schedule timestep -> latent along the inversion ladder
    (key 0 holds the clean input). `recon` and `sampling` map ladder index ->
    latent (index `steps` holds the initial noise latents; calibration entries
    are post-substitution). Set `keep_latents=False` to collect timings only.
    """

    inversion: dict[int, np.ndarray] = field(default_factory=dict)
    recon: dict[int, np.ndarray] = field(default_factory=dict)
    sampling: dict[int, np.ndarray] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    prng: str = PRNG_NAME
    keep_latents: bool = True


def invert(z0: FeatureMap, cfg: PipelineConfig, s: Schedule,
           record: TrajectoryRecord | None = None) -> FeatureMap:
    """Map a clean latent up the noise ladder with null conditioning.

    Each update from t_prev to t_next evaluates the noise estimate at the
    arrival timestep t_next, making it the algebraic inverse of the matching
    reverse-time step and keeping the reconstruction round trip tight.
    """
    ladder = subsample(s, cfg.t_inv)
    d = cfg.denoiser
    z = np.asarray(z0, dtype=np.float64)
    keep = record is not None and record.keep_latents
    if keep:
        record.inversion[0] = z.copy()
    t_prev = 0
    for t_next in ladder:
        t_next = int(t_next)
        eps = predict_eps(d, z, t_next, NULL_COND, s)
        a_next = s.abar(t_next)
        z = float(np.sqrt(a_next)) * predict_x0(z, t_prev, eps, s) \
            + float(np.sqrt(1.0 - a_next)) * eps
        if keep:
            record.inversion[t_next] = z.copy()
        t_prev = t_next
    return z


def ddim_step(z_t: FeatureMap, t_cur: int, t_prev: int, c: Conditioning,
              omega: float, d, s: Schedule) -> FeatureMap:
    """One deterministic reverse step from t_cur down to t_prev.

    Null conditioning reproduces the plain reconstruction update; text
    conditioning blends conditional and unconditional predictions with
    guidance scale omega before the update.
    """
    if not t_prev < t_cur:
        raise InvalidConfigError(f"need t_prev < t_cur, got {t_prev} >= {t_cur}")
    eps_uncond = predict_eps(d, z_t, t_cur, NULL_COND, s)
    if c.kind == "text":
        eps = cfg_eps(predict_eps(d, z_t, t_cur, c, s), eps_uncond, omega)
    else:
        eps = eps_uncond
    a_prev = s.abar(t_prev)
    return float(np.sqrt(a_prev)) * predict_x0(z_t, t_cur, eps, s) \
        + float(np.sqrt(1.0 - a_prev)) * eps


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"{name}: {exc}") from exc


def run(ref: ImageBuffer, cfg: PipelineConfig,
        record: TrajectoryRecord | None = None) -> ImageBuffer:
    """Translate `ref` per the config; returns the decoded output image.

    Stages: encode, invert, calibration (lock-step reconstruction + sampling
    + band substitution), free sampling, decode. Any stage error aborts with
    a stage-tagged diagnostic. Pass a TrajectoryRecord to retain per-step
    latents and timings.
    """
    cfg.validate()
    rec = record if record is not None else TrajectoryRecord(keep_latents=False)
    s = build_schedule(cfg.n_train, cfg.beta_start, cfg.beta_end)
    d = cfg.denoiser
    cond = cfg.conditioning()

    t0 = time.perf_counter()
    z0 = _stage("encode", cfg.codec.encode, ref)
    rec.timings["encode"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    z_inv = _stage("invert", invert, z0, cfg, s, rec)
    rec.timings["invert"] = time.perf_counter() - t0

    _, h, w = z_inv.shape
    mask = cfg.build_mask(h, w)
    ladder = subsample(s, cfg.steps)
    nc = cfg.non_calibration_steps()

    # mask to uint64 so any 64-bit integer (signed included) seeds the stream
    rng = np.random.Generator(np.random.PCG64(cfg.seed & (2 ** 64 - 1)))
    z_hat = z_inv
    z_til = rng.standard_normal(z_inv.shape)
    if rec.keep_latents:
        rec.recon[cfg.steps] = z_hat.copy()
        rec.sampling[cfg.steps] = z_til.copy()

    def calibration_phase():
        nonlocal z_hat, z_til
        # Per-step order: reconstruction update, sampling update, then the
        # substitution consumes exactly those two fresh latents.
        for i in range(cfg.steps, nc, -1):
            t_cur = int(ladder[i - 1])
            t_prev = int(ladder[i - 2]) if i >= 2 else 0
            z_hat = ddim_step(z_hat, t_cur, t_prev, NULL_COND, cfg.omega, d, s)
            z_til = ddim_step(z_til, t_cur, t_prev, cond, cfg.omega, d, s)
            if not cfg.once_substitution or i == nc + 1:
                z_til = substitute_band(z_hat, z_til, mask)
            if rec.keep_latents:
                rec.recon[i - 1] = z_hat.copy()
                rec.sampling[i - 1] = z_til.copy()

    def free_phase():
        nonlocal z_til
        for i in range(nc, 0, -1):
            t_cur = int(ladder[i - 1])
            t_prev = int(ladder[i - 2]) if i >= 2 else 0
            z_til = ddim_step(z_til, t_cur, t_prev, cond, cfg.omega, d, s)
            if rec.keep_latents:
                rec.sampling[i - 1] = z_til.copy()

    t0 = time.perf_counter()
    _stage("calibration", calibration_phase)
    rec.timings["calibration"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    _stage("sampling", free_phase)
    rec.timings["sampling"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    out = _stage("decode", cfg.codec.decode, z_til)
    rec.timings["decode"] = time.perf_counter() - t0
    return out

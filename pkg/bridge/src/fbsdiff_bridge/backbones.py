"""Latent-diffusion backbones served by the bridge.

A backbone exposes four calls: `embed(text)` mapping a prompt to an embedding
(the server caches these per distinct prompt), `eps(z, t, emb)` predicting the
noise content of a latent at a schedule timestep (emb=None means null
conditioning), and the autoencoder pair `encode(x)` / `decode(z)` working on
[-1, 1] float images. All latent scaling conventions live here so the wire
carries backbone-native latents.
"""

from __future__ import annotations

import hashlib

import numpy as np


class TinyBackbone:
    """Small deterministic stand-in backbone.

    Seeded random projections form the autoencoder (8x spatial pooling with a
    fixed 3->4 channel map and its pseudoinverse), and the noise head combines
    a marginal-variance gain with a cross-channel stencil and a smooth
    prompt-dependent bias field. Exists so the server, the protocol, and full
    translation runs can be exercised without multi-gigabyte weights.
    """

    latent_channels = 4
    down = 8
    n_train = 1000

    def __init__(self, seed: int = 0):
        rng = np.random.Generator(np.random.PCG64(int(seed)))
        beta = np.linspace(1e-4, 0.02, self.n_train)
        self._abar = np.cumprod(1.0 - beta)
        w = rng.normal(size=(self.latent_channels, 3))
        self._w_enc = w / np.linalg.norm(w, axis=1, keepdims=True)
        self._w_dec = np.linalg.pinv(self._w_enc)
        self._mix = rng.normal(size=(self.latent_channels, self.latent_channels, 3, 3)) / 6.0

    def abar(self, t: int) -> float:
        if not 1 <= t <= self.n_train:
            raise ValueError(f"timestep {t} outside [1, {self.n_train}]")
        return float(self._abar[t - 1])

    def embed(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        gen = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
        return gen.normal(size=16)

    def _stencil(self, z: np.ndarray) -> np.ndarray:
        c, h, w = z.shape
        padded = np.pad(z, ((0, 0), (1, 1), (1, 1)), mode="edge")
        out = np.zeros_like(z)
        for dy in range(3):
            for dx in range(3):
                out += np.einsum("oc,chw->ohw", self._mix[:, :, dy, dx],
                                 padded[:, dy:dy + h, dx:dx + w])
        return out

    def _prompt_field(self, emb: np.ndarray, shape) -> np.ndarray:
        c, h, w = shape
        coeff = np.asarray(emb, dtype=np.float64).reshape(c, 2, 2)
        iy = (np.arange(h) + 0.5) / h
        ix = (np.arange(w) + 0.5) / w
        rows = np.stack([np.ones(h), np.cos(np.pi * iy)])
        cols = np.stack([np.ones(w), np.cos(np.pi * ix)])
        return np.einsum("cpq,ph,qw->chw", coeff, rows, cols)

    def eps(self, z: np.ndarray, t: int, emb: np.ndarray | None) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[0] != self.latent_channels:
            raise ValueError(f"latent must have {self.latent_channels} channels, "
                             f"got {z.shape[0]}")
        scale = np.sqrt(1.0 - self.abar(t))
        out = scale * z + 0.2 * scale * np.tanh(self._stencil(z))
        if emb is not None:
            out = out + 0.1 * scale * self._prompt_field(emb, z.shape)
        return out.astype(np.float32)

    def encode(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        c, h, w = x.shape
        if c != 3:
            raise ValueError(f"encode expects 3 image channels, got {c}")
        if h % self.down or w % self.down:
            raise ValueError(f"image {h}x{w} not divisible by {self.down}")
        pooled = x.reshape(3, h // self.down, self.down,
                           w // self.down, self.down).mean(axis=(2, 4))
        return np.einsum("lc,chw->lhw", self._w_enc, pooled).astype(np.float32)

    def decode(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[0] != self.latent_channels:
            raise ValueError(f"decode expects {self.latent_channels} latent channels, "
                             f"got {z.shape[0]}")
        x = np.einsum("cl,lhw->chw", self._w_dec, z)
        x = np.repeat(np.repeat(x, self.down, axis=1), self.down, axis=2)
        return np.clip(x, -1.0, 1.0).astype(np.float32)

    def pin_determinism(self) -> None:
        pass  # pure numpy: deterministic by construction


class StableDiffusionBackbone:
    """Pretrained latent-diffusion backbone loaded from a local directory.

    Requires the `sd` extra (torch, diffusers, transformers) and locally
    available weights; any load failure aborts server startup. The VAE
    scaling factor is applied here so clients see backbone-native latents.
    """

    latent_channels = 4
    down = 8
    n_train = 1000

    def __init__(self, path: str, device: str = "cpu"):
        import torch
        from diffusers import StableDiffusionPipeline

        self._torch = torch
        pipe = StableDiffusionPipeline.from_pretrained(
            path, torch_dtype=torch.float32, safety_checker=None,
            requires_safety_checker=False, local_files_only=True)
        self._unet = pipe.unet.to(device).eval()
        self._vae = pipe.vae.to(device).eval()
        self._tokenizer = pipe.tokenizer
        self._text_encoder = pipe.text_encoder.to(device).eval()
        self._scale = float(self._vae.config.scaling_factor)
        self._device = device
        self._null_emb = None

    def pin_determinism(self) -> None:
        self._torch.manual_seed(0)
        self._torch.use_deterministic_algorithms(True, warn_only=True)

    def embed(self, text: str) -> np.ndarray:
        torch = self._torch
        tokens = self._tokenizer(text, padding="max_length", truncation=True,
                                 max_length=self._tokenizer.model_max_length,
                                 return_tensors="pt").input_ids.to(self._device)
        with torch.no_grad():
            return self._text_encoder(tokens)[0][0].cpu().numpy()

    def _null(self) -> np.ndarray:
        if self._null_emb is None:
            self._null_emb = self.embed("")
        return self._null_emb

    def eps(self, z: np.ndarray, t: int, emb: np.ndarray | None) -> np.ndarray:
        torch = self._torch
        if not 1 <= t <= self.n_train:
            raise ValueError(f"timestep {t} outside [1, {self.n_train}]")
        cond = self._null() if emb is None else emb
        with torch.no_grad():
            zt = torch.from_numpy(np.ascontiguousarray(z, dtype=np.float32))[None]
            ct = torch.from_numpy(np.ascontiguousarray(cond, dtype=np.float32))[None]
            out = self._unet(zt.to(self._device), t - 1,
                             encoder_hidden_states=ct.to(self._device)).sample
        return out[0].cpu().numpy()

    def encode(self, x: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            xt = torch.from_numpy(np.ascontiguousarray(x, dtype=np.float32))[None]
            posterior = self._vae.encode(xt.to(self._device)).latent_dist
            z = posterior.mode() * self._scale  # mode keeps encode deterministic
        return z[0].cpu().numpy()

    def decode(self, z: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            zt = torch.from_numpy(np.ascontiguousarray(z, dtype=np.float32))[None]
            x = self._vae.decode(zt.to(self._device) / self._scale).sample
        return x[0].clamp(-1.0, 1.0).cpu().numpy()


def load_backbone(spec: str):
    """`tiny[:SEED]` or `sd15:PATH`; load failures abort startup."""
    name, _, rest = spec.partition(":")
    if name == "tiny":
        return TinyBackbone(seed=int(rest) if rest else 0)
    if name == "sd15":
        if not rest:
            raise ValueError("sd15 backbone needs a weights path, e.g. sd15:/models/sd15")
        return StableDiffusionBackbone(rest)
    raise ValueError(f"unknown model spec {spec!r} (expected tiny[:SEED] or sd15:PATH)")

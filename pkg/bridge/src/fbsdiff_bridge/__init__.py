"""Socket bridge exposing a latent-diffusion backbone (noise predictor, text
encoder, autoencoder) over the fbsdiff wire protocol."""

from .backbones import StableDiffusionBackbone, TinyBackbone, load_backbone
from .server import BridgeServer, serve

__version__ = "0.1.0"

__all__ = ["BridgeServer", "StableDiffusionBackbone", "TinyBackbone",
           "load_backbone", "serve"]

"""Text-driven image-to-image translation via dynamic DCT frequency band
substitution between deterministic diffusion trajectories, with a closed-form
oracle denoiser for exact desk-scale verification and a wire protocol for
attaching a pretrained backbone."""

from .codec import (AvgPoolCodec, IdentityCodec, ImageBuffer, RemoteCodec,
                    decode, encode, read_png, write_png)
from .denoiser import (NULL_COND, Conditioning, OracleConditioningWarning,
                       OracleDenoiser, RemoteDenoiser, cfg_eps, predict_eps,
                       text_cond)
from .errors import (BackendError, FBSDiffError, InvalidConfigError,
                     InvalidInputError, InvalidThresholdError, PipelineError,
                     SingularScheduleError)
from .fbs import substitute_band
from .masks import BandMask, make_mask, mask_popcount, to_pgm_bytes, write_pgm
from .pipeline import (PRNG_NAME, PipelineConfig, TrajectoryRecord, ddim_step,
                       invert, run)
from .schedule import (Schedule, build_schedule, forward_diffuse, predict_x0,
                       subsample)
from .spectral import FeatureMap, Spectrum, dct2, idct2

__version__ = "0.1.0"

__all__ = [
    "AvgPoolCodec", "BandMask", "BackendError", "Conditioning", "FBSDiffError",
    "FeatureMap", "IdentityCodec", "ImageBuffer", "InvalidConfigError",
    "InvalidInputError", "InvalidThresholdError", "NULL_COND",
    "OracleConditioningWarning", "OracleDenoiser", "PRNG_NAME",
    "PipelineConfig", "PipelineError", "RemoteCodec", "RemoteDenoiser",
    "Schedule", "SingularScheduleError", "Spectrum", "TrajectoryRecord",
    "build_schedule", "cfg_eps", "dct2", "ddim_step", "decode", "encode",
    "forward_diffuse", "idct2", "invert", "make_mask", "mask_popcount",
    "predict_eps", "predict_x0", "read_png", "run", "subsample",
    "substitute_band", "text_cond", "to_pgm_bytes", "write_pgm", "write_png",
]

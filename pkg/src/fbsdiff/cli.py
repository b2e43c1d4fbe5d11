"""Command-line surface: translation runs, band decomposition, mask export,
and inverted-latent dumps.

Configuration precedence is flags over config-file values over built-in
defaults. The config file is line-oriented `key = value` text with `#`
comments; keys mirror flag names (t-inv, steps, lambda, omega, mode, th-lp,
th-hp, th-mp1, th-mp2, seed, prompt, denoiser, codec).
"""

from __future__ import annotations

import argparse
import struct
import sys
import time
from pathlib import Path

import numpy as np

from .codec import AvgPoolCodec, IdentityCodec, RemoteCodec, read_png, write_png
from .errors import FBSDiffError, InvalidConfigError
from .masks import make_mask, mask_popcount, write_pgm
from .pipeline import PipelineConfig, TrajectoryRecord, invert, run
from .schedule import build_schedule
from .spectral import dct2, idct2
from .denoiser import OracleDenoiser, RemoteDenoiser

LATENT_MAGIC = b"FBSL"  # raw latent dump: magic + u32 c,h,w + float32 payload

_DEFAULTS = {
    "t-inv": 1000,
    "steps": 50,
    "lambda": 0.45,
    "omega": 7.5,
    "mode": "low",
    "th-lp": 80,
    "th-hp": 5,
    "th-mp1": 5,
    "th-mp2": 80,
    "seed": 0,
    "prompt": "",
    "denoiser": "oracle",
    "codec": "identity",
    "once-substitution": False,
}

_COERCE = {
    "t-inv": int,
    "steps": int,
    "lambda": float,
    "omega": float,
    "mode": str,
    "th-lp": int,
    "th-hp": int,
    "th-mp1": int,
    "th-mp2": int,
    "seed": int,
    "prompt": str,
    "denoiser": str,
    "codec": str,
    "once-substitution": lambda v: str(v).lower() in ("1", "true", "yes", "on"),
}


def make_denoiser(spec: str):
    name, _, rest = spec.partition(":")
    if name == "oracle":
        return OracleDenoiser(float(rest) if rest else 1.0)
    if name == "remote":
        host, _, port = rest.partition(":")
        if not host or not port:
            raise InvalidConfigError(f"remote denoiser needs HOST:PORT, got {spec!r}")
        return RemoteDenoiser(host, int(port))
    raise InvalidConfigError(f"unknown denoiser spec {spec!r}")


def make_codec(spec: str):
    name, _, rest = spec.partition(":")
    if name == "identity":
        return IdentityCodec()
    if name == "avgpool":
        if not rest:
            raise InvalidConfigError("avgpool codec needs a pool size, e.g. avgpool:8")
        return AvgPoolCodec(int(rest))
    if name == "remote":
        host, _, port = rest.partition(":")
        if not host or not port:
            raise InvalidConfigError(f"remote codec needs HOST:PORT, got {spec!r}")
        return RemoteCodec(host, int(port))
    raise InvalidConfigError(f"unknown codec spec {spec!r}")


def load_config_file(path) -> dict:
    """Parse `key = value` lines; `#` starts a comment, blank lines ignored."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if not sep or not key:
            raise InvalidConfigError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
        if key not in _DEFAULTS:
            raise InvalidConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _COERCE[key](value.strip())
    return values


def parse_config(flags: dict, config_file=None, clamp_steps: bool = False) -> PipelineConfig:
    """Merge flag values (None means unset) over file values over defaults.

    `clamp_steps` caps the sampling-step count at t_inv for subcommands that
    never build the sampling ladder.
    """
    merged = dict(_DEFAULTS)
    if config_file is not None:
        merged.update(load_config_file(config_file))
    merged.update({k: v for k, v in flags.items() if v is not None})
    if clamp_steps:
        merged["steps"] = min(merged["steps"], merged["t-inv"])
    if merged["mode"] not in ("low", "mid", "high"):
        raise InvalidConfigError(f"mode must be low, mid, or high, got {merged['mode']!r}")
    cfg = PipelineConfig(
        t_inv=merged["t-inv"],
        steps=merged["steps"],
        lam=merged["lambda"],
        omega=merged["omega"],
        mask_kind=merged["mode"],
        th_lp=merged["th-lp"],
        th_hp=merged["th-hp"],
        th_mp1=merged["th-mp1"],
        th_mp2=merged["th-mp2"],
        prompt=merged["prompt"],
        seed=merged["seed"],
        denoiser=make_denoiser(merged["denoiser"]),
        codec=make_codec(merged["codec"]),
        once_substitution=bool(merged["once-substitution"]),
    )
    cfg.validate()
    return cfg


def _flag_values(ns: argparse.Namespace) -> dict:
    pairs = {
        "t-inv": ns.t_inv, "steps": ns.steps, "lambda": ns.lam, "omega": ns.omega,
        "mode": ns.mode, "th-lp": ns.th_lp, "th-hp": ns.th_hp,
        "th-mp1": ns.th_mp1, "th-mp2": ns.th_mp2, "seed": ns.seed,
        "prompt": ns.prompt, "denoiser": ns.denoiser, "codec": ns.codec,
        "once-substitution": True if ns.once_substitution else None,
    }
    return pairs


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="config file (key = value lines)")
    p.add_argument("--t-inv", type=int, default=None, help="inversion steps (default 1000)")
    p.add_argument("--steps", type=int, default=None, help="sampling steps (default 50)")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="non-calibration fraction in [0,1) (default 0.45)")
    p.add_argument("--omega", type=float, default=None, help="guidance scale (default 7.5)")
    p.add_argument("--mode", choices=("low", "mid", "high"), default=None,
                   help="band to substitute (default low)")
    p.add_argument("--th-lp", type=int, default=None, help="low band threshold (default 80)")
    p.add_argument("--th-hp", type=int, default=None, help="high band threshold (default 5)")
    p.add_argument("--th-mp1", type=int, default=None, help="mid band lower bound (default 5)")
    p.add_argument("--th-mp2", type=int, default=None, help="mid band upper bound (default 80)")
    p.add_argument("--seed", type=int, default=None, help="sampling noise seed (default 0)")
    p.add_argument("--prompt", default=None, help="target text prompt")
    p.add_argument("--denoiser", default=None,
                   help="oracle[:SIGMA] or remote:HOST:PORT (default oracle)")
    p.add_argument("--codec", default=None,
                   help="identity, avgpool:K, or remote:HOST:PORT (default identity)")
    p.add_argument("--once-substitution", action="store_true", default=False,
                   help="debug ablation: substitute only at the last calibration step")


def save_latent(z: np.ndarray, path) -> None:
    """Raw float dump: 16-byte header (magic + u32 c,h,w) + float32 payload."""
    arr = np.ascontiguousarray(z, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(LATENT_MAGIC + struct.pack("<III", *arr.shape))
        fh.write(arr.tobytes())


def load_latent(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != LATENT_MAGIC or len(raw) < 16:
        raise FBSDiffError(f"{path} is not a latent dump")
    c, h, w = struct.unpack("<III", raw[4:16])
    return np.frombuffer(raw[16:], dtype="<f4").reshape(c, h, w).copy()


def _write_manifest(path, cfg: PipelineConfig, rec: TrajectoryRecord) -> None:
    # Key = value lines double as a reusable config file; volatile fields
    # (timings) ride in comments so identical runs emit identical values.
    lines = ["# fbsdiff run manifest"]
    lines.append(f"t-inv = {cfg.t_inv}")
    lines.append(f"steps = {cfg.steps}")
    lines.append(f"lambda = {cfg.lam}")
    lines.append(f"omega = {cfg.omega}")
    lines.append(f"mode = {cfg.mask_kind}")
    lines.append(f"th-lp = {cfg.th_lp}")
    lines.append(f"th-hp = {cfg.th_hp}")
    lines.append(f"th-mp1 = {cfg.th_mp1}")
    lines.append(f"th-mp2 = {cfg.th_mp2}")
    lines.append(f"seed = {cfg.seed}")
    lines.append(f"prompt = {cfg.prompt}")
    lines.append(f"denoiser = {cfg.denoiser.describe()}")
    lines.append(f"codec = {cfg.codec.describe()}")
    lines.append(f"# prng = {rec.prng}")
    for stage, seconds in rec.timings.items():
        lines.append(f"# time {stage} = {seconds:.3f}s")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_translate(ns: argparse.Namespace) -> int:
    cfg = parse_config(_flag_values(ns), ns.config)
    ref = read_png(ns.ref)
    rec = TrajectoryRecord(keep_latents=False)
    out_img = run(ref, cfg, record=rec)
    write_png(out_img, ns.out)
    if ns.manifest is not None:
        _write_manifest(ns.manifest, cfg, rec)
    print(f"wrote {ns.out}")
    return 0


def cmd_bands(ns: argparse.Namespace) -> int:
    cfg = parse_config(_flag_values(ns), ns.config)
    codec = IdentityCodec()
    z = codec.encode(read_png(ns.ref)).astype(np.float64)
    f = dct2(z)
    _, h, w = f.shape
    total = float(np.sum(f * f))
    out = Path(ns.out)
    bands = (
        ("low", make_mask("low", cfg.th_lp, h, w)),
        ("mid", make_mask("mid", (cfg.th_mp1, cfg.th_mp2), h, w)),
        ("high", make_mask("high", cfg.th_hp, h, w)),
    )
    for name, m in bands:
        part = np.where(m.bits, f, 0.0)
        recon = idct2(part)
        # transform round-off far below the 8-bit quantization scale would
        # wobble exact rounding ties (e.g. an empty band around mid-gray)
        recon[np.abs(recon) < 1e-9] = 0.0
        dest = out.with_name(f"{out.stem}_{name}{out.suffix or '.png'}")
        write_png(codec.decode(recon), dest)
        energy = float(np.sum(part * part))
        fraction = energy / total if total > 0.0 else 0.0
        print(f"band={name} thresholds={m.thresholds} popcount={mask_popcount(m)} "
              f"energy={energy:.6e} fraction={fraction:.6f}")
        print(f"wrote {dest}")
    return 0


def cmd_mask(ns: argparse.Namespace) -> int:
    cfg = parse_config(_flag_values(ns), ns.config)
    m = cfg.build_mask(ns.height, ns.width)
    write_pgm(m, ns.out)
    print(f"wrote {ns.out} kind={m.kind} thresholds={m.thresholds} "
          f"popcount={mask_popcount(m)}")
    return 0


def cmd_invert(ns: argparse.Namespace) -> int:
    cfg = parse_config(_flag_values(ns), ns.config, clamp_steps=True)
    z0 = cfg.codec.encode(read_png(ns.ref))
    s = build_schedule(cfg.n_train, cfg.beta_start, cfg.beta_end)
    t0 = time.perf_counter()
    z = invert(z0, cfg, s)
    save_latent(z, ns.out)
    print(f"wrote {ns.out} shape={tuple(z.shape)} t-inv={cfg.t_inv} "
          f"({time.perf_counter() - t0:.3f}s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbsdiff",
        description="Text-driven image translation via DCT band substitution "
                    "between diffusion trajectories.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_tr = sub.add_parser("translate", help="translate a reference image per a text prompt")
    p_tr.add_argument("--ref", required=True, help="reference image (8-bit RGB PNG)")
    p_tr.add_argument("--out", default="out.png", help="output image path")
    p_tr.add_argument("--manifest", default=None, help="write a run manifest here")
    _add_config_flags(p_tr)
    p_tr.set_defaults(handler=cmd_translate)

    p_b = sub.add_parser("bands", help="decompose an image into band reconstructions")
    p_b.add_argument("--ref", required=True, help="input image (8-bit RGB PNG)")
    p_b.add_argument("--out", default="bands.png", help="output stem; writes *_low/_mid/_high")
    _add_config_flags(p_b)
    p_b.set_defaults(handler=cmd_bands)

    p_m = sub.add_parser("mask", help="export a band mask as a binary PGM")
    p_m.add_argument("--height", type=int, default=64)
    p_m.add_argument("--width", type=int, default=64)
    p_m.add_argument("--out", default="mask.pgm", help="output PGM path")
    _add_config_flags(p_m)
    p_m.set_defaults(handler=cmd_mask)

    p_i = sub.add_parser("invert", help="dump the inverted latent as a raw float file")
    p_i.add_argument("--ref", required=True, help="reference image (8-bit RGB PNG)")
    p_i.add_argument("--out", default="latent.bin", help="output latent path")
    _add_config_flags(p_i)
    p_i.set_defaults(handler=cmd_invert)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.handler(ns)
    except FBSDiffError as exc:
        print(f"fbsdiff: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fbsdiff: io error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

"""Binary DCT band masks selected by coordinate-sum thresholds.

A spectrum coefficient at (x, y) belongs to the low band when x + y <= th_lp,
to the high band when x + y > th_hp, and to the mid band when
th_mp1 < x + y <= th_mp2. Thresholds beyond (h-1)+(w-1) saturate the low mask
to all-ones; negative thresholds give the empty low mask, so threshold sweeps
are total.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidThresholdError

KINDS = ("low", "high", "mid", "full", "empty")


@dataclass(frozen=True)
class BandMask:
    h: int
    w: int
    kind: str
    thresholds: tuple[int, ...]
    bits: np.ndarray  # bool, shape (h, w)


def make_mask(kind: str, thresholds, h: int, w: int) -> BandMask:
    """Build a band mask over an h x w coefficient grid.

    `thresholds` is an int for low/high, a (lower, upper) pair for mid, and
    ignored for full/empty.
    """
    if h < 1 or w < 1:
        raise InvalidConfigError(f"mask grid must be at least 1x1, got {h}x{w}")
    if kind not in KINDS:
        raise InvalidConfigError(f"unknown mask kind {kind!r}; expected one of {KINDS}")
    coord_sum = np.arange(h)[:, None] + np.arange(w)[None, :]
    if kind in ("low", "high"):
        try:
            th = int(thresholds)
        except (TypeError, ValueError):
            raise InvalidThresholdError(
                f"{kind} band needs one integer threshold, got {thresholds!r}") from None
        bits = coord_sum <= th if kind == "low" else coord_sum > th
        ths = (th,)
    elif kind == "mid":
        try:
            lo, hi = (int(t) for t in thresholds)
        except (TypeError, ValueError):
            raise InvalidThresholdError(
                f"mid band needs two integer thresholds, got {thresholds!r}") from None
        if lo >= hi:
            raise InvalidThresholdError(f"mid band needs th_mp1 < th_mp2, got {lo} >= {hi}")
        bits, ths = (coord_sum > lo) & (coord_sum <= hi), (lo, hi)
    elif kind == "full":
        bits, ths = np.ones((h, w), dtype=bool), ()
    else:
        bits, ths = np.zeros((h, w), dtype=bool), ()
    bits.setflags(write=False)
    return BandMask(h=h, w=w, kind=kind, thresholds=ths, bits=bits)


def mask_popcount(m: BandMask) -> int:
    """Number of 1-bits in the mask."""
    return int(m.bits.sum())


def to_pgm_bytes(m: BandMask) -> bytes:
    """Serialize as a binary portable graymap, 255 inside the band, 0 outside."""
    header = f"P5\n{m.w} {m.h}\n255\n".encode("ascii")
    return header + (m.bits.astype(np.uint8) * 255).tobytes()


def write_pgm(m: BandMask, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_pgm_bytes(m))

"""Frequency band substitution: transplant a masked DCT band from a guidance
feature into a target feature in one spectral round trip."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .masks import BandMask
from .spectral import FeatureMap, dct2, idct2, require_feature_map


def substitute_band(guide: FeatureMap, target: FeatureMap, mask: BandMask) -> FeatureMap:
    """Return idct2(dct2(guide) * mask + dct2(target) * (1 - mask)).

    The binary mask is shared across channels. Inside the band the output
    spectrum is exactly the guide's; outside it is exactly the target's.
    """
    guide = require_feature_map(guide, "guide")
    target = require_feature_map(target, "target")
    if guide.shape != target.shape:
        raise InvalidInputError(
            f"guide shape {guide.shape} != target shape {target.shape}"
        )
    if mask.bits.shape != guide.shape[1:]:
        raise InvalidInputError(
            f"mask grid {mask.bits.shape} does not match feature grid {guide.shape[1:]}"
        )
    fused = np.where(mask.bits, dct2(guide), dct2(target))
    return idct2(fused)

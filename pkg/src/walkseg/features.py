"""Per-pixel feature stacks: RGB plus two seeded random 3x3 filter banks.

The affinity branch consumes low-level, full-resolution features. Here the
two learned low-level convolution layers are replaced by fixed banks of
seeded random 3x3 filters with rectification: bank 1 filters the RGB
channels, bank 2 filters bank 1's responses. The seed is part of the
configuration, so a feature stack is a pure function of (image, config).
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError


@dataclass
class FilterBankConfig:
    """Sizes and seed of the two random filter banks.

    The total channel count is 3 + f1 + f2 (131 with the defaults).
    """

    f1: int = 64
    f2: int = 64
    seed: int = 0

    @property
    def num_channels(self) -> int:
        return 3 + self.f1 + self.f2


def validate_image(image) -> np.ndarray:
    """Check (h, w, 3) shape and finite values in [0, 1]; return float64."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InvalidInputError(f"expected (h, w, 3) image, got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise InvalidInputError("zero-sized image")
    if not np.all(np.isfinite(image)):
        raise InvalidInputError("image contains non-finite values")
    if image.min() < 0.0 or image.max() > 1.0:
        raise InvalidInputError("image values must lie in [0, 1]")
    return image


def _bank_filters(rng, count: int, in_channels: int) -> np.ndarray:
    # fan-in scaled so response magnitudes stay comparable across banks
    scale = 1.0 / np.sqrt(9.0 * in_channels)
    return rng.standard_normal((count, in_channels, 3, 3)) * scale


def _conv3x3(x: np.ndarray, filters: np.ndarray) -> np.ndarray:
    """3x3 correlation, stride 1, symmetric (reflective) padding, rectified."""
    h, w, cin = x.shape
    cout = filters.shape[0]
    padded = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="symmetric")
    windows = sliding_window_view(padded, (3, 3), axis=(0, 1))  # (h, w, cin, 3, 3)
    patches = windows.reshape(h * w, cin * 9)
    flat = filters.transpose(1, 2, 3, 0).reshape(cin * 9, cout)
    out = patches @ flat
    return np.maximum(out, 0.0).reshape(h, w, cout)


def extract_features(image, bank: FilterBankConfig) -> np.ndarray:
    """Build the (h, w, 3 + f1 + f2) feature stack for an image.

    Channels are [RGB | bank-1 responses | bank-2 responses]. Bank 2 filters
    bank 1's output, so f1 = 0 requires f2 = 0. Deterministic given
    (image, bank): the filters are drawn from a generator seeded with
    `bank.seed`, bank 1 first.
    """
    image = validate_image(image)
    if bank.f1 < 0 or bank.f2 < 0:
        raise InvalidInputError("filter bank sizes must be nonnegative")
    if bank.f1 == 0 and bank.f2 > 0:
        raise InvalidInputError("bank 2 filters bank 1 output; f2 > 0 needs f1 > 0")
    parts = [image]
    rng = np.random.default_rng(bank.seed)
    if bank.f1 > 0:
        responses1 = _conv3x3(image, _bank_filters(rng, bank.f1, 3))
        parts.append(responses1)
        if bank.f2 > 0:
            responses2 = _conv3x3(responses1, _bank_filters(rng, bank.f2, bank.f1))
            parts.append(responses2)
    return np.concatenate(parts, axis=2)


def per_channel_normalize(stack: np.ndarray) -> np.ndarray:
    """Rescale each channel linearly to [0, 1]; constant channels map to 0.

    Idempotent: a second application is a no-op.
    """
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3:
        raise InvalidInputError(f"expected (h, w, k) stack, got {stack.shape}")
    lo = stack.min(axis=(0, 1), keepdims=True)
    hi = stack.max(axis=(0, 1), keepdims=True)
    span = hi - lo
    span[span == 0.0] = 1.0  # constant channel: (x - lo) / 1 == 0
    return (stack - lo) / span

"""2D discrete Fourier analysis and dual-domain channel assembly.

The forward transform is an iterative radix-2 Cooley-Tukey FFT (bit-reversal
permutation, then log2(n) butterfly stages) applied row-wise and then
column-wise. No normalization on the forward pass; the inverse carries the
1/(H*W) factor. Extents must be powers of two; resizing upstream guarantees
that for real data.

Channel assembly builds the 3-channel experimental input: the grayscale
image plus the DC-centered, signed-log-compressed real and imaginary planes
of its transform, the latter two standardized with dataset-level statistics.
Raw k-space is dominated by the DC coefficient by orders of magnitude, so
the log compression is what makes the planes usable as conv inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .numerics import ShapeError

__all__ = [
    "Scaling",
    "KSpacePlanes",
    "ChannelStats",
    "ChannelStack",
    "ConfigurationError",
    "NumericalConsistencyError",
    "fft2",
    "ifft2",
    "fftshift",
    "log_magnitude",
    "signed_log",
    "assemble_channels",
]


class ConfigurationError(ValueError):
    """Missing or inconsistent configuration for an operation."""


class NumericalConsistencyError(ArithmeticError):
    """A numerical self-check failed (e.g. large imaginary residue)."""


class Scaling(Enum):
    RAW = "raw"
    SIGNED_LOG = "signed_log"


@dataclass(frozen=True)
class KSpacePlanes:
    """Real/imaginary frequency planes of one image plus provenance flags."""

    real: np.ndarray
    imag: np.ndarray
    dc_centered: bool = False
    scaling: Scaling = Scaling.RAW

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise ShapeError(
                f"real/imag shapes differ: {self.real.shape} vs {self.imag.shape}"
            )


@dataclass(frozen=True)
class ChannelStats:
    """Dataset-level mean/std of the two transformed k-space channels."""

    mean: np.ndarray  # (2,) for [real, imag]
    std: np.ndarray  # (2,)


@dataclass(frozen=True)
class ChannelStack:
    """Model input: (C, H, W) with C=1 (control) or C=3 (experimental)."""

    channels: np.ndarray
    mode: str  # "control" | "experimental"

    def __post_init__(self):
        c = self.channels.shape[0]
        want = 1 if self.mode == "control" else 3
        if c != want:
            raise ShapeError(f"mode {self.mode} needs {want} channels, got {c}")


def _check_pow2(n: int) -> None:
    if n < 1 or (n & (n - 1)) != 0:
        raise ShapeError(f"extent {n} is not a power of two")


def _bit_reversal_indices(n: int) -> np.ndarray:
    idx = np.zeros(1, dtype=np.intp)
    while len(idx) < n:
        idx = np.concatenate([2 * idx, 2 * idx + 1])
    return idx


def _fft_rows(x: np.ndarray) -> np.ndarray:
    """Radix-2 DIT FFT of every row of a complex (m, n) array."""
    m, n = x.shape
    _check_pow2(n)
    if n == 1:
        return x.copy()
    x = x[:, _bit_reversal_indices(n)]
    span = 1
    while span < n:
        w = np.exp((-1j * np.pi / span) * np.arange(span))
        x = x.reshape(m, n // (2 * span), 2, span)
        even = x[:, :, 0, :]
        odd = x[:, :, 1, :] * w
        x = np.concatenate([even + odd, even - odd], axis=2).reshape(m, n)
        span *= 2
    return x


def _fft2_complex(x: np.ndarray) -> np.ndarray:
    x = _fft_rows(x)
    return _fft_rows(x.T).T


def fft2(image: np.ndarray) -> KSpacePlanes:
    """Forward 2D DFT of a real image, X[u,v] = sum x[m,n] e^{-2pi i(um/H + vn/W)}.

    Both extents must be powers of two. No normalization factor; planes come
    back un-shifted (DC at index (0, 0)) and raw-scaled.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeError(f"fft2 expects a 2-D image, got shape {image.shape}")
    for n in image.shape:
        _check_pow2(n)
    spec = _fft2_complex(image.astype(np.complex128))
    return KSpacePlanes(real=spec.real.copy(), imag=spec.imag.copy())


def ifft2(planes: KSpacePlanes) -> np.ndarray:
    """Inverse 2D DFT with 1/(H*W) normalization, returning the real image.

    Requires un-shifted, raw-scaled planes. The imaginary residue of the
    inverse is checked and discarded; a residue above 1e-6 means the planes
    were not the spectrum of a real image and raises.
    """
    if planes.dc_centered:
        raise ValueError("ifft2 requires un-shifted planes (dc_centered=False)")
    if planes.scaling is not Scaling.RAW:
        raise ValueError(f"ifft2 requires raw scaling, got {planes.scaling.value}")
    spec = planes.real + 1j * planes.imag
    h, w = spec.shape
    for n in spec.shape:
        _check_pow2(n)
    # conjugation trick: ifft(X) = conj(fft(conj(X))) / (H*W)
    out = np.conj(_fft2_complex(np.conj(spec))) / (h * w)
    residue = float(np.max(np.abs(out.imag))) if out.size else 0.0
    if residue > 1e-6:
        raise NumericalConsistencyError(
            f"imaginary residue {residue:.3e} exceeds 1e-6; input planes are "
            "not the spectrum of a real image"
        )
    return np.ascontiguousarray(out.real)


def fftshift(plane: np.ndarray) -> np.ndarray:
    """Swap quadrants so index (0,0) maps to (H/2, W/2). Extents must be even."""
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise ShapeError(f"fftshift expects a 2-D plane, got shape {plane.shape}")
    h, w = plane.shape
    if h % 2 or w % 2:
        raise ShapeError(f"fftshift needs even extents, got {plane.shape}")
    return np.roll(plane, (h // 2, w // 2), axis=(0, 1))


def log_magnitude(planes: KSpacePlanes) -> np.ndarray:
    """log(1 + |X|) of the spectrum, the standard k-space display channel."""
    return np.log1p(np.hypot(planes.real, planes.imag))


def signed_log(v: np.ndarray) -> np.ndarray:
    """sign(v) * log(1 + |v|): log compression that keeps sign information."""
    return np.sign(v) * np.log1p(np.abs(v))


def assemble_channels(
    image: np.ndarray,
    mode: str,
    stats: ChannelStats | None = None,
) -> ChannelStack:
    """Build the model input stack for one [0,1] grayscale image.

    control: the single spatial channel, untouched.
    experimental: [spatial, T(real), T(imag)] where both planes are
    DC-centered (fftshift) then signed-log scaled, then standardized with
    the supplied dataset-level stats. The spatial channel is shared verbatim
    with the control arm so the two models see identical pixel data.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeError(f"expected 2-D image, got shape {image.shape}")
    if image.size and (image.min() < -1e-9 or image.max() > 1.0 + 1e-9):
        raise ValueError("image values must lie in [0, 1]")
    if mode == "control":
        return ChannelStack(channels=image[np.newaxis].copy(), mode=mode)
    if mode != "experimental":
        raise ValueError(f"unknown mode {mode!r}")
    if stats is None:
        raise ConfigurationError(
            "experimental mode needs dataset-level channel statistics"
        )
    planes = fft2(image)
    re = signed_log(fftshift(planes.real))
    im = signed_log(fftshift(planes.imag))
    re = (re - stats.mean[0]) / stats.std[0]
    im = (im - stats.mean[1]) / stats.std[1]
    return ChannelStack(channels=np.stack([image, re, im]), mode=mode)

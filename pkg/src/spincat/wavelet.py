"""Continuous wavelet analysis of measurement records.

Uses the standard analytic mother wavelet psi(t) = pi^{-1/4} e^{i w0 t}
e^{-t^2/2} with the a^{-1/2} transform normalization

    W(a, b) = a^{-1/2} sum_k x_k psi*((t_k - b)/a) dt.

Under this convention a pure cosine of frequency f produces a power ridge
at scale a* = f_c / f with center frequency f_c = (w0 + sqrt(2 + w0^2)) /
(4 pi).  Scales are expressed in units of the sampling interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import detrend as _detrend
from scipy.signal import fftconvolve, find_peaks


@dataclass(frozen=True)
class WaveletParams:
    """Transform controls; scale_max = None defaults to n_samples/4."""

    omega0: float = 6.0
    n_scales: int = 64
    scale_min: float = 2.0
    scale_max: Optional[float] = None
    detrend: bool = True

    def __post_init__(self):
        if self.omega0 < 5.0:
            raise ValueError(
                f"omega0 must be >= 5 for near-admissibility, got {self.omega0}"
            )
        if self.n_scales < 8:
            raise ValueError(f"n_scales must be >= 8, got {self.n_scales}")
        if self.scale_min <= 0:
            raise ValueError(f"scale_min must be positive, got {self.scale_min}")
        if self.scale_max is not None and self.scale_min >= self.scale_max:
            raise ValueError(
                f"scale_min {self.scale_min} must be below scale_max {self.scale_max}"
            )


@dataclass
class WaveletSpectrum:
    """Power |W(a,b)|^2 over (scale, time), globally normalized to max 1."""

    scales: np.ndarray
    times: np.ndarray
    power: np.ndarray


def morlet(t, omega0: float = 6.0):
    """Mother wavelet pi^{-1/4} e^{i omega0 t} e^{-t^2/2}."""
    t = np.asarray(t, dtype=float)
    out = math.pi ** (-0.25) * np.exp(1j * omega0 * t - 0.5 * t * t)
    return complex(out) if out.ndim == 0 else out


def morlet_center_frequency(omega0: float = 6.0) -> float:
    """Frequency f_c such that a cosine at f peaks at scale a = f_c/f."""
    return (omega0 + math.sqrt(2.0 + omega0**2)) / (4.0 * math.pi)


def scale_grid(params: WaveletParams, n_samples: int) -> np.ndarray:
    """Logarithmic scale axis in sampling-interval units."""
    scale_max = params.scale_max if params.scale_max is not None else n_samples / 4.0
    if params.scale_min >= scale_max:
        raise ValueError(
            f"scale_min {params.scale_min} must be below scale_max {scale_max}"
        )
    return np.geomspace(params.scale_min, scale_max, params.n_scales)


def cwt_coefficients(
    signal: np.ndarray, dt_sample: float, params: WaveletParams
) -> tuple[np.ndarray, np.ndarray]:
    """Complex transform coefficients, shape (n_scales, n_samples).

    Linear in the signal (no normalization); zero-padded edges via plain
    convolution.  Returns (scales, coefficients).
    """
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 1 or len(signal) < 16:
        raise ValueError("signal must be a 1-d array with at least 16 samples")
    if dt_sample <= 0:
        raise ValueError(f"dt_sample must be positive, got {dt_sample}")
    if params.detrend:
        signal = _detrend(signal, type="linear")
    scales = scale_grid(params, len(signal))
    coeffs = np.empty((len(scales), len(signal)), dtype=complex)
    for i, a in enumerate(scales):
        half = int(math.ceil(6.0 * a))
        offsets = np.arange(-half, half + 1) / a
        # psi*(-t) = psi(t), so the correlation kernel is psi itself.
        kernel = morlet(offsets, params.omega0) * (
            dt_sample / math.sqrt(a * dt_sample)
        )
        coeffs[i] = fftconvolve(signal, kernel, mode="same")
    return scales, coeffs


def cwt(signal: np.ndarray, dt_sample: float, params: WaveletParams) -> WaveletSpectrum:
    """Normalized scalogram of a uniformly sampled real signal."""
    scales, coeffs = cwt_coefficients(signal, dt_sample, params)
    power = np.abs(coeffs) ** 2
    peak = power.max()
    if peak > 0:
        power /= peak
    times = np.arange(len(signal)) * dt_sample
    return WaveletSpectrum(scales=scales, times=times, power=power)


def band_power(
    spectrum: WaveletSpectrum, scale_band: Sequence[float]
) -> np.ndarray:
    """Mean power over the scales inside [a_lo, a_hi], per time sample."""
    a_lo, a_hi = scale_band
    if a_lo > a_hi:
        raise ValueError(f"empty scale band ({a_lo}, {a_hi})")
    mask = (spectrum.scales >= a_lo) & (spectrum.scales <= a_hi)
    if not np.any(mask):
        raise ValueError(
            f"scale band ({a_lo:.3g}, {a_hi:.3g}) misses the scale axis "
            f"[{spectrum.scales[0]:.3g}, {spectrum.scales[-1]:.3g}]"
        )
    return spectrum.power[mask].mean(axis=0)


def detect_nodes(
    band_power_series: np.ndarray,
    times: np.ndarray,
    threshold_frac: float,
    min_separation: float,
) -> np.ndarray:
    """Times of local band-power maxima above threshold_frac * max.

    Maxima closer than ``min_separation`` (use twice the Rabi time to
    separate distinct collapse/revival events) are merged into the larger
    one.  An empty result is valid.
    """
    if not 0.0 < threshold_frac < 1.0:
        raise ValueError(f"threshold_frac must be in (0, 1), got {threshold_frac}")
    band_power_series = np.asarray(band_power_series, dtype=float)
    times = np.asarray(times, dtype=float)
    if band_power_series.shape != times.shape:
        raise ValueError("band power and time axes differ in length")
    peak = band_power_series.max()
    if peak <= 0:
        return np.array([])
    dt = times[1] - times[0] if len(times) > 1 else 1.0
    distance = max(1, int(math.ceil(min_separation / dt)))
    idx, _ = find_peaks(
        band_power_series, height=threshold_frac * peak, distance=distance
    )
    return times[idx]

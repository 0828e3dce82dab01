"""Scalar observables and envelope metrics of the collapse/revival signal."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .hilbert import (
    StateVector,
    all_ground_spin_index,
    assert_normalized,
    expectation,
    position_op,
)


def p_all_ground(state: StateVector) -> float:
    """Probability sum_n |<n| ⊗ <g...g|psi>|^2 of finding every qubit in |g>."""
    assert_normalized(state)
    space = state.space
    g_idx = all_ground_spin_index(space)
    p = float(np.sum(np.abs(state.amplitudes[g_idx :: space.spin_dim]) ** 2))
    return min(max(p, 0.0), 1.0)


def q_expectation(state: StateVector) -> float:
    """Field position quadrature <(a + a†)>/sqrt(2); real to 1e-10."""
    return expectation(state, position_op(state.space)).real


@dataclass
class EnvelopeMetric:
    """Sliding-window peak-to-peak amplitude of an oscillating series.

    The window should cover at least one Rabi cycle (>= 2 t_R) so the
    amplitude reflects the oscillation envelope rather than its phase.
    """

    window: float
    centers: np.ndarray
    amplitude: np.ndarray


def envelope_metric(
    times: np.ndarray, p_series: np.ndarray, window: float
) -> EnvelopeMetric:
    """Peak-to-peak amplitude of ``p_series`` over a sliding time window.

    The series must be uniformly sampled.  Windows slide one sample at a
    time; only full windows contribute, so centers span
    [t0 + window/2, tN - window/2].
    """
    times = np.asarray(times, dtype=float)
    p_series = np.asarray(p_series, dtype=float)
    if times.ndim != 1 or times.shape != p_series.shape:
        raise ValueError("times and p_series must be 1-d arrays of equal length")
    if len(times) < 2:
        raise ValueError("need at least two samples")
    steps = np.diff(times)
    dt = steps[0]
    if not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
        raise ValueError("series must be uniformly sampled")
    w = int(round(window / dt)) + 1
    if w < 2:
        raise ValueError(
            f"window {window:.3g} spans fewer than 2 samples at spacing {dt:.3g}"
        )
    if w > len(times):
        raise ValueError("window longer than the available series")
    views = sliding_window_view(p_series, w)
    amplitude = views.max(axis=1) - views.min(axis=1)
    centers = 0.5 * (times[: len(times) - w + 1] + times[w - 1 :])
    return EnvelopeMetric(window=window, centers=centers, amplitude=amplitude)


@dataclass
class RevivalStats:
    revival_time: float
    revival_amplitude: float
    collapse_floor: float


def revival_stats(
    metric: EnvelopeMetric, t_r1: float, t_c: float
) -> RevivalStats:
    """Locate the first revival and the collapse floor in an envelope.

    revival_time is the argmax of the window amplitude over
    (0.5 t_r1, 1.2 t_r1); collapse_floor is the minimum amplitude over the
    quiet band starting at 2 t_c and ending at 0.4 t_r1, extended by one
    window width whenever 2 t_c already exceeds that point (which happens
    once N > 0.89 sqrt(nbar)).
    """
    if t_r1 <= 0 or t_c <= 0:
        raise ValueError("t_r1 and t_c must be positive")
    centers = metric.centers
    if len(centers) == 0:
        raise ValueError("empty envelope metric")
    if centers[0] > 0.2 * t_r1 or centers[-1] < t_r1:
        raise ValueError(
            f"envelope centers [{centers[0]:.3g}, {centers[-1]:.3g}] do not "
            f"span the required [0.2, 1.0+] multiples of t_r1={t_r1:.3g}"
        )
    search = (centers > 0.5 * t_r1) & (centers < 1.2 * t_r1)
    if not np.any(search):
        raise ValueError("no envelope windows inside the revival search band")
    amp = metric.amplitude
    idx = np.flatnonzero(search)[np.argmax(amp[search])]
    lo = 2.0 * t_c
    hi = max(0.4 * t_r1, lo + metric.window)
    quiet = (centers > lo) & (centers < hi)
    if not np.any(quiet):
        raise ValueError("no envelope windows inside the collapse band")
    return RevivalStats(
        revival_time=float(centers[idx]),
        revival_amplitude=float(amp[idx]),
        collapse_floor=float(amp[quiet].min()),
    )


def initial_window_amplitude(metric: EnvelopeMetric) -> float:
    """Amplitude of the earliest full window (the pre-collapse oscillation)."""
    return float(metric.amplitude[0])

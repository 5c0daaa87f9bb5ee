"""Per-frame radar observables.

Two fidelity levels are provided:

* :func:`synth_beat_frame` builds the complex FMCW beat-signal samples of a
  point target for one frame (fast time x slow time), to be processed by
  :mod:`vsaradar.dsp`.
* :func:`measurement_channel` draws post-detection (range, radial velocity)
  pairs directly, with noise scaled like the Cramer-Rao bound and a
  multipath outlier process. This is the fast path used by Monte Carlo runs.

Radial velocity is positive for a receding target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .scenario import SPEED_OF_LIGHT, RadarNode, WaveformParams


class SignalError(ValueError):
    """Target geometry that a radar cannot observe."""


@dataclass(frozen=True)
class NoiseModel:
    """Measurement non-idealities.

    Parameters
    ----------
    snr_db : float
        Post-detection SNR. ``inf`` disables thermal noise.
    outlier_prob : float
        Probability that a radar's (range, velocity) pair is a multipath
        artefact instead of the target.
    outlier_range_span : float
        Excess path of a multipath echo is uniform on ``[0, span]`` (m).
    outlier_velocity_span : float
        Artefact radial velocity is uniform on ``[-span, span]`` (m/s).
    """

    snr_db: float = 10.0
    outlier_prob: float = 0.2
    outlier_range_span: float = 0.4
    outlier_velocity_span: float = 6.4

    def __post_init__(self):
        if not (0.0 <= self.outlier_prob <= 1.0):
            raise ValueError("outlier_prob must lie in [0, 1]")
        if self.outlier_range_span <= 0 or self.outlier_velocity_span <= 0:
            raise ValueError("outlier spans must be positive")
        if math.isnan(self.snr_db):
            raise ValueError("snr_db must be a number")

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)


@dataclass(frozen=True)
class RadarMeasurement:
    """One radar's post-detection measurement for one frame."""

    radar_id: int
    frame_time: float
    range: float
    radial_velocity: float
    is_outlier: bool = False


@dataclass(frozen=True)
class BeatFrame:
    """Complex beat samples of one frame, shape (samples_per_chirp, chirps_per_frame)."""

    radar_id: int
    frame_time: float
    samples: np.ndarray
    waveform: WaveformParams
    amplitude: float = 1.0
    initial_phase: float = 0.0


def range_sigma(waveform: WaveformParams, snr_db: float) -> float:
    """Range noise std ``dR / sqrt(2 SNR)``."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return waveform.range_resolution / math.sqrt(2.0 * 10.0 ** (snr_db / 10.0))


def velocity_sigma(waveform: WaveformParams, snr_db: float) -> float:
    """Radial-velocity noise std ``dv / sqrt(2 SNR)``."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return waveform.velocity_resolution / math.sqrt(2.0 * 10.0 ** (snr_db / 10.0))


def window(name: str, n: int) -> np.ndarray:
    """Periodic DFT window; ``rectangular`` is accepted for boxcar."""
    return get_window("boxcar" if name == "rectangular" else name, n, fftbins=True)


def _check_visible(radar: RadarNode, position: np.ndarray) -> float:
    d = position - radar.pos
    r = float(np.hypot(*d))
    wf = radar.waveform
    if r <= wf.range_resolution:
        raise SignalError(f"target within one range bin of radar {radar.id}")
    if radar.boresight is not None and float(np.dot(d, radar.boresight)) <= 0:
        raise SignalError(f"target behind radar {radar.id}")
    if r >= wf.max_range:
        raise SignalError(f"target beyond the unambiguous range of radar {radar.id}")
    return r


def synth_beat_frame(radar: RadarNode, target_position, target_radial_velocity: float,
                     noise: NoiseModel, rng: np.random.Generator, *, amplitude: float = 1.0,
                     windows: tuple[str, str] = ("hann", "hann"), frame_time: float = 0.0) -> BeatFrame:
    """Synthesize an analytic beat-signal frame for a point target.

    ``noise.snr_db`` sets the peak SNR of a single-chirp range profile
    computed with window ``windows[0]``; the slow-time FFT then adds the
    coherent integration gain of the ``L`` chirps. Outliers are not
    simulated at this level.
    """
    wf = radar.waveform
    p = np.asarray(target_position, dtype=float)
    r = _check_visible(radar, p)
    td = 2.0 * r / SPEED_OF_LIGHT
    k = wf.chirp_slope
    fd = 2.0 * target_radial_velocity / wf.wavelength
    phi0 = -2.0 * np.pi * wf.carrier_frequency * td - np.pi * k * td**2
    tn = np.arange(wf.samples_per_chirp) / wf.sample_rate
    l = np.arange(wf.chirps_per_frame)
    phase = (2.0 * np.pi * (k * td - fd) * tn)[:, None] + phi0 + (2.0 * np.pi * fd * wf.pri * l)[None, :]
    samples = 0.5 * amplitude * np.exp(1j * phase)

    if not (math.isinf(noise.snr_db) and noise.snr_db > 0):
        w1 = window(windows[0], wf.samples_per_chirp)
        peak = (0.5 * amplitude) ** 2 * w1.sum() ** 2
        var = peak / (np.sum(w1**2) * noise.snr_linear)
        shape = samples.shape
        samples = samples + math.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return BeatFrame(radar.id, frame_time, samples, wf, amplitude, float(phi0))


def measurement_channel(radar: RadarNode, truth, noise: NoiseModel, rng: np.random.Generator,
                        frame_time: float = 0.0, normals=None) -> RadarMeasurement:
    """Draw one radar's (range, radial velocity) measurement.

    ``truth`` is a ``(position, velocity)`` pair. Five variates are consumed
    per call regardless of the outcome so that streams stay aligned.
    ``normals`` optionally replaces the two standard-normal draws that
    scale the range and velocity noise (e.g. to impose correlation between
    frames); the stream still advances by five variates.
    """
    p = np.asarray(truth[0], dtype=float)
    v = np.asarray(truth[1], dtype=float)
    wf = radar.waveform
    d = p - radar.pos
    r_true = float(np.hypot(*d))
    if r_true == 0:
        raise SignalError("target coincides with the radar")
    vr_true = float(np.dot(v, d / r_true))

    n_r, n_v = rng.standard_normal(2)
    if normals is not None:
        n_r, n_v = normals
    u_out, u_r, u_v = rng.random(3)
    if u_out < noise.outlier_prob:
        r = r_true + u_r * noise.outlier_range_span
        vr = (2.0 * u_v - 1.0) * noise.outlier_velocity_span
        flag = True
    else:
        r = r_true + range_sigma(wf, noise.snr_db) * n_r
        vr = vr_true + velocity_sigma(wf, noise.snr_db) * n_v
        flag = False
    vmax = wf.max_radial_velocity
    r = min(max(r, 0.0), wf.max_range)
    vr = min(max(vr, -vmax), vmax)
    return RadarMeasurement(radar.id, frame_time, r, vr, flag)

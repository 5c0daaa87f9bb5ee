"""Range / range-Doppler processing and cell-averaging CFAR detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .scenario import SPEED_OF_LIGHT, WaveformParams
from .signal import BeatFrame, RadarMeasurement, window

WINDOWS = ("rectangular", "hann", "hamming")


class DetectionError(ValueError):
    """Raised when CFAR input is unusable or no target is found."""


class ProfileTooShortError(DetectionError):
    pass


class MapTooSmallError(DetectionError):
    pass


class NoDetectionError(DetectionError):
    """No CFAR cell crossed the threshold; the tracker treats the frame as missed."""


@dataclass(frozen=True)
class RangeProfile:
    magnitudes: np.ndarray
    bin_width: float


@dataclass(frozen=True)
class RangeDopplerMap:
    """Magnitude RDM of shape (N, L); column ``zero_velocity_index`` is v = 0."""

    magnitudes: np.ndarray
    range_bin_width: float
    velocity_bin_width: float
    zero_velocity_index: int

    def doppler_bins(self) -> np.ndarray:
        return np.arange(self.magnitudes.shape[1]) - self.zero_velocity_index


@dataclass(frozen=True)
class CfarParams:
    """CA-CFAR configuration.

    ``n_ref`` and ``n_guard`` count cells per side (1D) or the ring widths
    (2D). The threshold factor comes from ``pfa`` unless ``threshold_db``
    is given, in which case ``alpha = 10**(threshold_db/10)``.
    """

    n_ref: int = 4
    n_guard: int = 2
    pfa: float = 1e-3
    window: str = "hann"
    threshold_db: float | None = None

    def __post_init__(self):
        if self.n_ref < 1:
            raise ValueError("n_ref must be >= 1")
        if self.n_guard < 0:
            raise ValueError("n_guard must be >= 0")
        if not (0.0 < self.pfa < 1.0):
            raise ValueError("pfa must lie in (0, 1)")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}")

    def alpha(self, n_cells):
        """Threshold scale for ``n_cells`` reference cells (array-friendly)."""
        n = np.asarray(n_cells, dtype=float)
        if self.threshold_db is not None:
            return np.full_like(n, 10.0 ** (self.threshold_db / 10.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            return n * (self.pfa ** (-1.0 / n) - 1.0)


@dataclass(frozen=True)
class CellDetection:
    range_bin: int
    doppler_bin: int
    cell_power: float
    estimated_snr: float


def range_profile(frame: BeatFrame, window_name: str = "hann") -> RangeProfile:
    """Windowed fast-time DFT magnitude of the first chirp."""
    x = np.asarray(frame.samples)
    if x.size == 0:
        raise DetectionError("empty frame")
    chirp = x[:, 0]
    w = window(window_name, len(chirp))
    return RangeProfile(np.abs(np.fft.fft(w * chirp)), frame.waveform.range_resolution)


def range_doppler_map(frame: BeatFrame, windows: tuple[str, str] = ("hann", "hann")) -> RangeDopplerMap:
    """2D DFT magnitude, Doppler axis shifted so bin ``L//2`` is zero velocity."""
    x = np.asarray(frame.samples)
    wf = frame.waveform
    if x.shape != (wf.samples_per_chirp, wf.chirps_per_frame):
        raise DetectionError(f"frame shape {x.shape} does not match the waveform")
    n, l = x.shape
    w = window(windows[0], n)[:, None] * window(windows[1], l)[None, :]
    spec = np.fft.fftshift(np.fft.fft2(w * x), axes=1)
    return RangeDopplerMap(np.abs(spec), wf.range_resolution, wf.velocity_resolution, l // 2)


def _ca_cfar(power: np.ndarray, kernel: np.ndarray, params: CfarParams):
    sums = correlate(power, kernel, mode="constant", cval=0.0)
    counts = correlate(np.ones_like(power), kernel, mode="constant", cval=0.0)
    counts = np.rint(counts)
    z = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    thr = params.alpha(np.maximum(counts, 1)) * z
    hits = (power > thr) & (counts > 0)
    return hits, z


def _snr_db(power, z):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.where(z > 0, power / np.where(z > 0, z, 1.0), np.inf))


def cfar_1d(profile: RangeProfile, params: CfarParams) -> list[CellDetection]:
    """CA-CFAR over a range profile; edges use truncated (one-sided) windows."""
    mag = np.asarray(profile.magnitudes, dtype=float)
    g, r = params.n_guard, params.n_ref
    if mag.size <= 2 * (r + g) + 1:
        raise ProfileTooShortError(f"profile of {mag.size} cells too short for {r} ref + {g} guard per side")
    kernel = np.ones(2 * (g + r) + 1)
    kernel[r:r + 2 * g + 1] = 0.0
    power = mag**2
    hits, z = _ca_cfar(power, kernel, params)
    idx = np.flatnonzero(hits)
    snr = _snr_db(power[idx], z[idx])
    order = np.lexsort((idx, -power[idx]))
    return [CellDetection(int(idx[i]), 0, float(power[idx[i]]), float(snr[i])) for i in order]


def cfar_2d(rdm: RangeDopplerMap, params: CfarParams) -> list[CellDetection]:
    """CA-CFAR with a square reference ring around a square guard block.

    Detections are sorted by descending power, ties broken by lower range
    bin and then lower absolute Doppler bin.
    """
    mag = np.asarray(rdm.magnitudes, dtype=float)
    g, r = params.n_guard, params.n_ref
    side = 2 * (g + r) + 1
    if mag.ndim != 2 or min(mag.shape) <= side:
        raise MapTooSmallError(f"map {mag.shape} not larger than the {side}x{side} CFAR window")
    kernel = np.ones((side, side))
    kernel[r:r + 2 * g + 1, r:r + 2 * g + 1] = 0.0
    power = mag**2
    hits, z = _ca_cfar(power, kernel, params)
    m_idx, c_idx = np.nonzero(hits)
    p_idx = c_idx - rdm.zero_velocity_index
    pw = power[m_idx, c_idx]
    snr = _snr_db(pw, z[m_idx, c_idx])
    order = np.lexsort((np.abs(p_idx), m_idx, -pw))
    return [CellDetection(int(m_idx[i]), int(p_idx[i]), float(pw[i]), float(snr[i])) for i in order]


def bin_to_range(m: float, wf: WaveformParams) -> float:
    """Range of fast-time bin ``m``: ``c*m/(2B)``."""
    return SPEED_OF_LIGHT * m / (2.0 * wf.bandwidth)


def bin_to_velocity(p: float, wf: WaveformParams) -> float:
    """Radial velocity of signed Doppler bin ``p``: ``lambda*p/(2*L*T_PRI)``."""
    return wf.wavelength * p / (2.0 * wf.chirps_per_frame * wf.pri)


def detect_target(frame: BeatFrame, params: CfarParams = CfarParams(),
                  windows: tuple[str, str] | None = None) -> RadarMeasurement:
    """Strongest 2D-CFAR detection of a frame, converted to physical units."""
    wins = windows or (params.window, params.window)
    rdm = range_doppler_map(frame, wins)
    dets = cfar_2d(rdm, params)
    if not dets:
        raise NoDetectionError(f"no CFAR detection for radar {frame.radar_id} at t={frame.frame_time}")
    best = dets[0]
    wf = frame.waveform
    return RadarMeasurement(frame.radar_id, frame.frame_time,
                            bin_to_range(best.range_bin, wf), bin_to_velocity(best.doppler_bin, wf))


def quantisation_bound(wf: WaveformParams) -> tuple[float, float]:
    """Half-bin range and velocity errors of a bin-resolution detector."""
    return 0.5 * wf.range_resolution, 0.5 * wf.velocity_resolution


__all__ = [
    "CellDetection", "CfarParams", "DetectionError", "MapTooSmallError", "NoDetectionError",
    "ProfileTooShortError", "RangeDopplerMap", "RangeProfile", "bin_to_range", "bin_to_velocity",
    "cfar_1d", "cfar_2d", "detect_target", "quantisation_bound", "range_doppler_map", "range_profile",
]


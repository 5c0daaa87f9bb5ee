import math

import numpy as np
import pytest

from vsaradar.dsp import range_doppler_map, range_profile
from vsaradar.scenario import RadarNode, WaveformParams
from vsaradar.signal import (
    NoiseModel, SignalError, measurement_channel, range_sigma, synth_beat_frame, velocity_sigma, window,
)

RADAR = RadarNode(1, (0.0, 0.0), WaveformParams(), boresight=(0.0, 1.0))
NOISELESS = NoiseModel(snr_db=math.inf, outlier_prob=0.0)


def _rng(seed=0):
    return np.random.default_rng(seed)


def test_static_target_range_bin():
    f = synth_beat_frame(RADAR, (0.0, 3.0), 0.0, NOISELESS, _rng())
    assert f.samples.shape == (128, 256)
    assert int(np.argmax(range_profile(f).magnitudes)) == 30


def test_zero_velocity_doppler_bin():
    f = synth_beat_frame(RADAR, (0.0, 3.0), 0.0, NOISELESS, _rng())
    rdm = range_doppler_map(f)
    _, c = np.unravel_index(np.argmax(rdm.magnitudes), rdm.magnitudes.shape)
    assert c - rdm.zero_velocity_index == 0


def test_moving_target_doppler_bin():
    wf = RADAR.waveform
    assert wf.pri == pytest.approx(195.3125e-6)
    f = synth_beat_frame(RADAR, (0.0, 3.0), 0.5, NOISELESS, _rng())
    rdm = range_doppler_map(f)
    m, c = np.unravel_index(np.argmax(rdm.magnitudes), rdm.magnitudes.shape)
    assert (m, c - rdm.zero_velocity_index) == (30, 10)


def test_beat_frame_errors():
    with pytest.raises(SignalError):
        synth_beat_frame(RADAR, (0.0, -2.0), 0.0, NOISELESS, _rng())
    with pytest.raises(SignalError):
        synth_beat_frame(RADAR, (0.0, 0.0), 0.0, NOISELESS, _rng())


def test_beat_frame_deterministic():
    noise = NoiseModel(snr_db=10.0)
    a = synth_beat_frame(RADAR, (0.3, 2.2), 0.4, noise, _rng(5))
    b = synth_beat_frame(RADAR, (0.3, 2.2), 0.4, noise, _rng(5))
    assert np.array_equal(a.samples, b.samples)


def test_processing_gain():
    # snr_db is the single-chirp range-profile peak SNR; the slow-time FFT
    # adds the coherent gain (sum w)^2 / sum w^2 of the Doppler window
    snr_db = 10.0
    noise = NoiseModel(snr_db=snr_db)
    rng = _rng(11)
    peak, floor = [], []
    for _ in range(100):
        f = synth_beat_frame(RADAR, (0.0, 3.0), 0.5, noise, rng)
        pw = range_doppler_map(f).magnitudes ** 2
        peak.append(pw[30, 128 + 10])
        floor.append(np.mean(pw[60:, :]))
    w2 = window("hann", 256)
    gain_db = 10 * np.log10(w2.sum() ** 2 / np.sum(w2**2))
    measured = 10 * np.log10(np.mean(peak) / np.mean(floor))
    assert abs(measured - (snr_db + gain_db)) <= 1.5

    prof_peak, prof_floor = [], []
    for _ in range(100):
        f = synth_beat_frame(RADAR, (0.0, 3.0), 0.5, noise, rng)
        pw = range_profile(f).magnitudes ** 2
        prof_peak.append(pw[30])
        prof_floor.append(np.mean(pw[60:]))
    assert abs(10 * np.log10(np.mean(prof_peak) / np.mean(prof_floor)) - snr_db) <= 1.5


def test_channel_noiseless_is_exact():
    truth = (np.array([1.0, 3.0]), np.array([0.0, -1.0]))
    m = measurement_channel(RadarNode(1, (2.0, 0.0)), truth, NOISELESS, _rng())
    assert m.range == pytest.approx(math.sqrt(10), abs=1e-15)
    assert m.radial_velocity == pytest.approx(-3 / math.sqrt(10), abs=1e-15)
    assert not m.is_outlier


def test_channel_range_sigma():
    wf = WaveformParams()
    assert range_sigma(wf, 10.0) == pytest.approx(0.10 / math.sqrt(20))
    assert velocity_sigma(wf, 10.0) == pytest.approx(0.05 / math.sqrt(20))
    rng = _rng(3)
    noise = NoiseModel(snr_db=10.0, outlier_prob=0.0)
    truth = (np.array([1.0, 3.0]), np.array([0.0, -1.0]))
    r = np.array([measurement_channel(RADAR, truth, noise, rng).range for _ in range(10_000)])
    sig = range_sigma(wf, 10.0)
    assert abs(np.std(r - math.sqrt(10)) / sig - 1) <= 0.05


def test_channel_outlier_fraction():
    rng = _rng(4)
    noise = NoiseModel(snr_db=10.0, outlier_prob=0.2)
    truth = (np.array([1.0, 3.0]), np.array([0.0, -1.0]))
    flags = [measurement_channel(RADAR, truth, noise, rng).is_outlier for _ in range(10_000)]
    assert abs(np.mean(flags) - 0.20) <= 0.01


def test_channel_measurement_bounds_and_determinism():
    wf = WaveformParams()
    noise = NoiseModel(snr_db=0.0, outlier_prob=0.5)
    truth = (np.array([1.0, 3.0]), np.array([0.0, -1.0]))
    a = [measurement_channel(RADAR, truth, noise, _rng(9)) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    rng = _rng(1)
    for _ in range(2000):
        m = measurement_channel(RADAR, truth, noise, rng)
        assert 0.0 <= m.range <= wf.max_range
        assert abs(m.radial_velocity) <= wf.max_radial_velocity


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(outlier_prob=1.5)
    with pytest.raises(ValueError):
        NoiseModel(outlier_range_span=0.0)

import math

import numpy as np
import pytest

from vsaradar.dsp import (
    CfarParams, MapTooSmallError, NoDetectionError, ProfileTooShortError, RangeDopplerMap, RangeProfile,
    bin_to_range, bin_to_velocity, cfar_1d, cfar_2d, detect_target, range_doppler_map, range_profile,
)
from vsaradar.scenario import RadarNode, WaveformParams
from vsaradar.signal import BeatFrame, NoiseModel, synth_beat_frame

WF = WaveformParams()
RADAR = RadarNode(1, (0.0, 0.0), WF, boresight=(0.0, 1.0))
NOISELESS = NoiseModel(snr_db=math.inf, outlier_prob=0.0)


def _frame(r, v, noise=NOISELESS, seed=0):
    return synth_beat_frame(RADAR, (0.0, r), v, noise, np.random.default_rng(seed))


def test_zero_frame_gives_zero_profile():
    f = BeatFrame(1, 0.0, np.zeros((128, 256), complex), WF)
    assert not np.any(range_profile(f).magnitudes)


def test_profile_peak_bin_and_window_invariance():
    f = _frame(2.0, 0.0)
    assert int(np.argmax(range_profile(f, "hann").magnitudes)) == 20
    assert int(np.argmax(range_profile(f, "rectangular").magnitudes)) == 20
    assert int(np.argmax(range_profile(f, "hamming").magnitudes)) == 20


def test_profile_parseval_within_window_gain():
    f = _frame(2.0, 0.0, NoiseModel(snr_db=5.0), seed=2)
    chirp = f.samples[:, 0]
    rect = range_profile(f, "rectangular").magnitudes
    assert np.sum(rect**2) / len(chirp) == pytest.approx(np.sum(np.abs(chirp) ** 2), rel=1e-12)


def test_static_target_energy_in_zero_velocity_column():
    rdm = range_doppler_map(_frame(3.0, 0.0))
    col = rdm.magnitudes[:, rdm.zero_velocity_index] ** 2
    assert col.sum() / np.sum(rdm.magnitudes**2) > 0.5
    assert int(np.argmax(rdm.magnitudes.max(axis=0))) == rdm.zero_velocity_index


def test_rdm_peak_location():
    rdm = range_doppler_map(_frame(3.0, 0.5))
    m, c = np.unravel_index(np.argmax(rdm.magnitudes), rdm.magnitudes.shape)
    assert (m, c - rdm.zero_velocity_index) == (30, 10)


def test_real_input_gives_symmetric_doppler_spectrum():
    x = np.random.default_rng(1).standard_normal((128, 256)).astype(complex)
    rdm = range_doppler_map(BeatFrame(1, 0.0, x, WF), ("rectangular", "rectangular"))
    mag, z = rdm.magnitudes, rdm.zero_velocity_index
    for m in (0, 5, 77):
        for p in (-100, -3, 0, 1, 64, 127):
            assert mag[m, z + p] == pytest.approx(mag[(-m) % 128, z - p], rel=1e-9, abs=1e-9)


def test_rdm_linearity():
    f = _frame(2.3, -0.7, NoiseModel(snr_db=5.0), seed=3)
    g = BeatFrame(1, 0.0, 3.5 * f.samples, WF)
    assert np.allclose(range_doppler_map(g).magnitudes, 3.5 * range_doppler_map(f).magnitudes, rtol=1e-12)


def test_cfar_alpha_closed_form():
    p = CfarParams(n_ref=4, pfa=1e-3)
    assert p.alpha(8) == pytest.approx(8 * (1e-3 ** (-1 / 8) - 1))


def test_cfar_1d_direct_threshold():
    power = np.ones(64)
    power[20] = 4.0
    power[45] = 2.0
    params = CfarParams(n_ref=4, n_guard=2, threshold_db=10 * math.log10(3.0))
    hits = {d.range_bin for d in cfar_1d(RangeProfile(np.sqrt(power), 0.1), params)}
    assert 20 in hits and 45 not in hits


def test_cfar_1d_zero_profile_and_too_short():
    assert cfar_1d(RangeProfile(np.zeros(64), 0.1), CfarParams()) == []
    with pytest.raises(ProfileTooShortError):
        cfar_1d(RangeProfile(np.ones(13), 0.1), CfarParams(n_ref=4, n_guard=2))


def test_cfar_1d_edge_cells_use_one_sided_windows():
    power = np.ones(64)
    power[0] = 50.0
    hits = [d.range_bin for d in cfar_1d(RangeProfile(np.sqrt(power), 0.1), CfarParams(pfa=1e-3))]
    assert hits == [0]


def test_cfar_1d_false_alarm_rate():
    pfa = 1e-2
    power = np.random.default_rng(7).exponential(1.0, 100_000)
    n = len(cfar_1d(RangeProfile(np.sqrt(power), 0.1), CfarParams(n_ref=8, n_guard=2, pfa=pfa)))
    assert 0.5 * pfa <= n / power.size <= 2 * pfa


def _map(power):
    return RangeDopplerMap(np.sqrt(power), 0.1, 0.05, power.shape[1] // 2)


def test_cfar_2d_zero_map_and_too_small():
    assert cfar_2d(_map(np.zeros((64, 64))), CfarParams()) == []
    with pytest.raises(MapTooSmallError):
        cfar_2d(_map(np.ones((12, 40))), CfarParams(n_ref=4, n_guard=2))


def test_cfar_2d_single_peak():
    power = np.ones((64, 64))
    power[30, 40] = 100.0
    dets = cfar_2d(_map(power), CfarParams(pfa=1e-3))
    assert [(d.range_bin, d.doppler_bin) for d in dets] == [(30, 40 - 32)]


def test_cfar_2d_two_peaks_stronger_first():
    power = np.ones((64, 64))
    power[10, 10] = 200.0
    power[50, 50] = 400.0
    dets = cfar_2d(_map(power), CfarParams(pfa=1e-3))
    assert [(d.range_bin, d.doppler_bin) for d in dets] == [(50, 18), (10, -22)]


def test_bin_conversions():
    assert bin_to_range(0, WF) == 0.0
    assert bin_to_range(30, WF) == pytest.approx(3.0)
    assert bin_to_range(1, WF) == pytest.approx(0.10)
    assert bin_to_velocity(0, WF) == 0.0
    assert bin_to_velocity(1, WF) == pytest.approx(0.05)
    assert bin_to_velocity(-20, WF) == pytest.approx(-1.0)


def test_detect_target_noiseless_within_quantisation():
    m = detect_target(_frame(3.0, 0.5))
    assert abs(m.range - 3.0) <= WF.range_resolution / 2
    assert abs(m.radial_velocity - 0.5) <= WF.velocity_resolution / 2


@pytest.mark.parametrize("r,v", [(1.234, 0.321), (2.77, -0.61), (4.05, 1.1)])
def test_off_grid_quantisation_bound(r, v):
    m = detect_target(_frame(r, v))
    assert abs(m.range - r) <= WF.range_resolution / 2 + 1e-12
    assert abs(m.radial_velocity - v) <= WF.velocity_resolution / 2 + 1e-12


def test_detect_target_zero_frame():
    with pytest.raises(NoDetectionError):
        detect_target(BeatFrame(1, 0.0, np.zeros((128, 256), complex), WF))


def test_detection_rate_at_10_db():
    rng = np.random.default_rng(21)
    noise = NoiseModel(snr_db=10.0)
    hits = 0
    for _ in range(100):
        r = rng.uniform(1.0, 5.0)
        v = rng.uniform(-1.5, 1.5)
        try:
            m = detect_target(synth_beat_frame(RADAR, (0.0, r), v, noise, rng))
        except NoDetectionError:
            continue
        hits += abs(m.range - r) <= WF.range_resolution
    assert hits >= 99

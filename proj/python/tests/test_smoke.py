import numpy as np
import pytest

import vamix


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture(scope="module")
def pair():
    return vamix.synthetic_pair(3 * vamix.SAMPLE_RATE, seed=1)


def test_stft_shape_and_round_trip():
    x = np.random.default_rng(0).uniform(-0.5, 0.5, 262144)
    spec = vamix.stft(x)
    assert spec.shape == (512, 513)
    assert spec.dtype == np.complex128
    assert rel(vamix.istft(spec, x.size), x) < 1e-6


def test_identity_gains_reproduce_mixture(pair):
    a, b, mix = pair
    masks = vamix.ideal_binary_masks([a, b], ["low", "high"])
    assert masks.labels() == ["low", "high"]
    assert rel(vamix.remix(mix, masks, [0.0, 0.0]), mix) < 1e-6


def test_remix_matches_separate_and_add_on_partitions(pair):
    a, b, mix = pair
    masks = vamix.ideal_binary_masks([a, b])
    gains = [0.4, -0.8]
    assert rel(vamix.remix(mix, masks, gains), vamix.separate_and_add(mix, masks, gains)) < 1e-9


def test_ibm_separation_beats_random(pair):
    a, b, mix = pair
    ibm = vamix.ideal_binary_masks([a, b])
    est = [vamix.separate_source(mix, m) for m in ibm.masks]
    metrics = vamix.bss_eval(est, [a, b], filter_len=64, mixture=mix)
    assert all(m["nsdr"] > 5.0 for m in metrics)
    rbm = vamix.random_binary_mask(512, ibm.masks[0].shape[1], seed=3)
    assert vamix.sdr(vamix.separate_source(mix, rbm), a, 64) < metrics[0]["sdr"]


def test_zlbm_properties():
    m = vamix.random_binary_mask(64, 100, seed=2)
    assert m.kind == vamix.MaskKind.BINARY
    s = vamix.smooth_zlbm(m, 0.6)
    assert s.kind == vamix.MaskKind.SMOOTHED
    assert 0.0 <= s.data.min() and s.data.max() <= 1.0
    rev = vamix.Mask(m.data[:, ::-1].copy(), vamix.MaskKind.BINARY)
    assert np.allclose(vamix.smooth_zlbm(rev, 0.6).data[:, ::-1], s.data, atol=1e-12)
    with pytest.raises(vamix.VamixError, match="InvalidAlpha"):
        vamix.smooth_zlbm(m, 1.0)


def test_mask_file_round_trip(tmp_path, pair):
    a, b, _ = pair
    masks = vamix.ideal_ratio_masks([a, b], ["x", "y"])
    path = tmp_path / "m.tfmk"
    vamix.write_mask_set(path, masks)
    assert (tmp_path / "m.json").exists()
    back = vamix.read_mask_set(path)
    assert back.labels() == ["x", "y"]
    assert np.allclose(back[0].data, masks[0].data, atol=1e-7)


def test_wav_round_trip(tmp_path):
    x = np.linspace(-0.5, 0.5, 1000)
    vamix.write_wav(tmp_path / "x.wav", x)
    y, rate = vamix.read_wav(tmp_path / "x.wav")
    assert rate == 44100
    assert np.allclose(x, y, atol=1e-7)


def test_metrics_helpers():
    rng = np.random.default_rng(5)
    ref = rng.standard_normal(2000)
    assert vamix.snr_to_reference(0.9 * ref, ref) == pytest.approx(20.0)
    assert vamix.smoothing_gain(ref, 0.5 * ref, 0.9 * ref) == pytest.approx(20 * np.log10(5))
    assert vamix.slider_to_gain(0.5) == 0.0

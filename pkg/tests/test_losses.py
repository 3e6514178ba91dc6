import numpy as np
import pytest

from sefusion.dsp import StftConfig, Waveform, stft
from sefusion.errors import (
    DegenerateSignalError,
    SampleRateError,
    ShapeMismatchError,
)
from sefusion.losses import (
    LossReport,
    MstftConfig,
    complex_mse,
    fusion_loss,
    fusion_report,
    gen_loss,
    l1_loss,
    magnitude_mse,
    mstft_loss,
    null_scorer,
    perceptual_surrogate,
    regression_loss,
    regression_report,
    weighted_total,
)
from sefusion.rng import Rng

from conftest import fd_gradient, max_rel_err, random_wave

SMALL_MSTFT = MstftConfig(((256, 64), (512, 128)))


def complex_pair(rng, shape=(6, 9)):
    e = rng.uniform(shape, -1, 1) + 1j * rng.uniform(shape, -1, 1)
    r = rng.uniform(shape, -1, 1) + 1j * rng.uniform(shape, -1, 1)
    return e, r


def fd_complex(fn, est, coords, h=1e-7):
    """Finite differences over (re, im) parts of selected spectrogram bins."""
    base = fn(est)
    out = {}
    for c in coords:
        bumped = est.copy()
        bumped[c] += h
        out[(c, "re")] = (fn(bumped) - base) / h
        bumped = est.copy()
        bumped[c] += 1j * h
        out[(c, "im")] = (fn(bumped) - base) / h
    return out


class TestComplexMse:
    def test_zero_at_equality(self, rng):
        e, _ = complex_pair(rng)
        assert complex_mse(e, e)[0] == 0.0

    def test_single_bin_hand_value(self):
        value, grad = complex_mse(np.array([[1.0 + 0j]]), np.array([[0j]]))
        assert value == 1.0
        assert grad[0, 0] == 2.0 + 0j

    def test_gradient_fd(self, rng):
        worst = 0.0
        for trial in range(20):
            r = Rng(100 + trial)
            e, ref = complex_pair(r)
            _, grad = complex_mse(e, ref)
            numeric = fd_complex(lambda x: complex_mse(x, ref)[0], e, [(0, 0), (5, 8)])
            for (c, part), num in numeric.items():
                ana = grad[c].real if part == "re" else grad[c].imag
                worst = max(worst, abs(num - ana) / max(abs(num), 1e-12))
        assert worst < 1e-6

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatchError):
            complex_mse(np.zeros((2, 3), complex), np.zeros((3, 2), complex))


class TestMagnitudeMse:
    def test_phase_invariance(self, rng):
        _, ref = complex_pair(rng)
        est = ref * np.exp(1j * 0.7)
        assert magnitude_mse(est, ref)[0] == pytest.approx(0.0, abs=1e-28)

    def test_single_bin_hand_value(self):
        value, _ = magnitude_mse(np.array([[3.0 + 0j]]), np.array([[0 + 1.0j]]))
        assert value == pytest.approx(4.0, abs=1e-15)

    def test_gradient_fd_away_from_zero(self, rng):
        worst = 0.0
        for trial in range(20):
            r = Rng(300 + trial)
            e, ref = complex_pair(r)
            e += np.sign(e.real) * 0.5 + 1j * np.sign(e.imag) * 0.5  # keep |e| > 0
            _, grad = magnitude_mse(e, ref)
            numeric = fd_complex(lambda x: magnitude_mse(x, ref)[0], e, [(1, 2), (4, 7)])
            for (c, part), num in numeric.items():
                ana = grad[c].real if part == "re" else grad[c].imag
                worst = max(worst, abs(num - ana) / max(abs(num), 1e-12))
        assert worst < 1e-6

    def test_zero_magnitude_subgradient(self):
        _, grad = magnitude_mse(np.array([[0j]]), np.array([[1.0 + 0j]]))
        assert grad[0, 0] == 0j


class TestPerceptualSurrogate:
    def test_zero_at_equality(self, rng):
        wave = rng.uniform(1600, -1, 1)
        assert perceptual_surrogate(wave, wave)[0] == 0.0

    def test_doubling_gives_log4_squared(self, rng):
        # every band energy scales by 4 -> mean of (ln 4)^2 across bands
        ref = rng.uniform(1600, -1, 1)
        value, _ = perceptual_surrogate(2.0 * ref, ref)
        assert value == pytest.approx(np.log(4.0) ** 2, abs=1e-6)

    def test_gradient_fd(self, rng):
        worst = 0.0
        for trial in range(20):
            r = Rng(500 + trial)
            est = r.uniform(800, -1, 1)
            ref = r.uniform(800, -1, 1)
            _, grad = perceptual_surrogate(est, ref)
            coords = [int(c) for c in r.integers(4, 800)]
            numeric = fd_gradient(
                lambda x: perceptual_surrogate(x, ref)[0], est, coords
            )
            worst = max(worst, max_rel_err(grad, numeric))
        assert worst < 1e-5

    def test_requires_16k_waveforms(self, rng):
        est = random_wave(rng, 800, 8000)
        ref = random_wave(rng, 800, 8000)
        with pytest.raises(SampleRateError):
            perceptual_surrogate(est, ref)

    def test_symmetric(self, rng):
        a = rng.uniform(1000, -1, 1)
        b = rng.uniform(1000, -1, 1)
        assert perceptual_surrogate(a, b)[0] == pytest.approx(
            perceptual_surrogate(b, a)[0], rel=1e-12
        )


class TestRegressionLoss:
    def test_component_weights_exact(self):
        report = regression_report(1.0, 2.0, 3.0)
        assert report.total == 1.93

    def test_zero_at_equality(self, rng):
        wave = random_wave(rng, 3200, 16000)
        spec = stft(wave, StftConfig())
        report = regression_loss(spec, spec, wave, wave)
        assert report.total == 0.0

    def test_total_recomputes_bit_exactly(self, rng):
        report = regression_report(
            float(rng.uniform(1)[0]), float(rng.uniform(1)[0]), float(rng.uniform(1)[0])
        )
        assert report.total == report.recompute_total()


class TestGenLoss:
    def test_hand_value(self):
        report = gen_loss(1.3863, regression_report(1.0, 2.0, 3.0))
        assert report.total == pytest.approx(3.3163, abs=1e-12)

    def test_exact_sum(self):
        reg = regression_report(0.123, 4.56, 7.8)
        report = gen_loss(0.777, reg)
        assert report.total == 0.777 + reg.total

    def test_zero(self):
        assert gen_loss(0.0, regression_report(0.0, 0.0, 0.0)).total == 0.0

    def test_terms_preserved_by_name(self):
        report = gen_loss(1.0, regression_report(1.0, 1.0, 1.0))
        assert set(report.terms) == {"nll", "regression"}


class TestMstft:
    def test_zero_at_equality(self, rng):
        wave = rng.uniform(2000, -1, 1)
        assert mstft_loss(wave, wave, SMALL_MSTFT)[0] == 0.0

    def test_gradient_fd(self, rng):
        worst = 0.0
        for trial in range(20):
            r = Rng(700 + trial)
            est = r.uniform(1600, -1, 1)
            ref = r.uniform(1600, -1, 1)
            _, grad = mstft_loss(est, ref, SMALL_MSTFT)
            coords = [int(c) for c in r.integers(4, 1600)]
            numeric = fd_gradient(
                lambda x: mstft_loss(x, ref, SMALL_MSTFT)[0], est, coords
            )
            worst = max(worst, max_rel_err(grad, numeric))
        assert worst < 1e-4

    def test_monotone_in_noise_level(self, rng):
        ref = rng.uniform(1600, -1, 1)
        noise = rng.uniform(1600, -1, 1)
        values = [
            mstft_loss(ref + eps * noise, ref, SMALL_MSTFT)[0]
            for eps in (0.01, 0.1, 0.5)
        ]
        assert values[0] < values[1] < values[2]

    def test_silent_reference_raises(self, rng):
        with pytest.raises(DegenerateSignalError):
            mstft_loss(rng.uniform(1600, -1, 1), np.zeros(1600), SMALL_MSTFT)

    def test_config_validation(self):
        with pytest.raises(ShapeMismatchError):
            MstftConfig(((512, 128),))
        with pytest.raises(ShapeMismatchError):
            MstftConfig(((512, 512), (256, 64)))


class TestL1:
    def test_zero_at_equality(self, rng):
        wave = rng.uniform(500, -1, 1)
        assert l1_loss(wave, wave)[0] == 0.0

    def test_constant_offset(self):
        est = np.full(100, 0.75)
        ref = np.full(100, 0.25)
        value, _ = l1_loss(est, ref)
        assert value == pytest.approx(0.5, abs=1e-15)

    def test_gradient_fd_away_from_ties(self, rng):
        worst = 0.0
        for trial in range(20):
            r = Rng(900 + trial)
            ref = r.uniform(300, -1, 1)
            est = ref + np.where(r.uniform(300) > 0.5, 0.3, -0.3)
            _, grad = l1_loss(est, ref)
            coords = [int(c) for c in r.integers(4, 300)]
            numeric = fd_gradient(lambda x: l1_loss(x, ref)[0], est, coords)
            worst = max(worst, max_rel_err(grad, numeric))
        assert worst < 1e-6


class TestFusionLoss:
    def test_component_weights_exact(self):
        assert fusion_report(1.0, 2.0, 0.5).total == 2.5

    def test_null_scorer_total(self, rng):
        est = random_wave(rng, 2000, 16000)
        ref = random_wave(rng, 2000, 16000)
        report = fusion_loss(est, ref, cfg=SMALL_MSTFT)
        assert report.terms["sqa"] == 0.0
        expected = weighted_total(
            {"m": report.terms["mstft"], "l": report.terms["l1"]},
            {"m": 1.0, "l": 0.5},
        )
        assert report.total == pytest.approx(expected, abs=0)

    def test_zero_at_equality(self, rng):
        wave = random_wave(rng, 2000, 16000)
        assert fusion_loss(wave, wave, cfg=SMALL_MSTFT).total == 0.0

    def test_custom_scorer_term(self, rng):
        def scorer(wave):
            return 0.25, np.zeros(len(wave))

        est = random_wave(rng, 2000, 16000)
        report = fusion_loss(est, est, scorer=scorer, cfg=SMALL_MSTFT)
        assert report.terms["sqa"] == 0.25
        assert report.total == 0.25


class TestLossReport:
    def test_build_requires_matching_names(self):
        with pytest.raises(ShapeMismatchError):
            LossReport.build({"a": 1.0}, {"b": 1.0})

    def test_serialization_roundtrip_text(self):
        report = fusion_report(1.0, 2.0, 0.5)
        text = report.to_text()
        assert "total = 2.5" in text
        assert "mstft" in text and "l1" in text and "sqa" in text

    def test_null_scorer_contract(self):
        wave = Waveform(np.ones(10) * 0.1, 16000)
        score, grad = null_scorer(wave)
        assert score == 0.0
        assert grad.shape == (10,)
        assert np.all(grad == 0)


def test_every_loss_nonnegative_and_zero_at_equality(rng):
    wave = random_wave(rng, 2048, 16000)
    spec = stft(wave)
    assert complex_mse(spec, spec)[0] == 0.0
    assert magnitude_mse(spec, spec)[0] == 0.0
    assert perceptual_surrogate(wave, wave)[0] == 0.0
    assert mstft_loss(wave, wave, SMALL_MSTFT)[0] == 0.0
    assert l1_loss(wave, wave)[0] == 0.0
    other = random_wave(Rng(2), 2048, 16000)
    for value in (
        complex_mse(stft(other), spec)[0],
        magnitude_mse(stft(other), spec)[0],
        perceptual_surrogate(other, wave)[0],
        mstft_loss(other, wave, SMALL_MSTFT)[0],
        l1_loss(other, wave)[0],
    ):
        assert value > 0.0

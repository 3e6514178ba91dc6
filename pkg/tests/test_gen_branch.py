import numpy as np
import pytest

from sefusion.arlm import ArLm, ArLmConfig
from sefusion.dprnn import REFINER_STFT, RefinerConfig, SpectrumRefiner
from sefusion.dsp import StftConfig, Waveform, stft
from sefusion.errors import (
    FrameAlignmentError,
    SampleRateError,
    ShapeMismatchError,
)
from sefusion.nn import softmax_cross_entropy_with_grad
from sefusion.pipeline import EnhancerModels, PipelineConfig, gen_enhance, token_nll
from sefusion.rng import Rng
from sefusion.semantic import (
    SemanticConfig,
    SemanticEncoder,
    VectorQuantizer,
    extract_semantic,
)

from conftest import random_wave


@pytest.fixture(scope="module")
def encoder():
    return SemanticEncoder(SemanticConfig(), Rng(21))


@pytest.fixture(scope="module")
def models():
    return EnhancerModels.build(PipelineConfig(seed=3))


class TestSemantic:
    def test_one_second_gives_51_frames(self, encoder, rng):
        feats = extract_semantic(random_wave(rng, 16000, 16000), encoder)
        assert feats.shape == (51, 64)

    def test_silence_gives_constant_rows(self, encoder):
        feats = encoder.features(Waveform(np.zeros(4800), 16000))
        np.testing.assert_allclose(feats, feats[0][None, :], atol=1e-9)

    def test_deterministic_under_seed(self, rng):
        wave = random_wave(rng, 4800, 16000)
        a = SemanticEncoder(SemanticConfig(), Rng(5)).features(wave)
        b = SemanticEncoder(SemanticConfig(), Rng(5)).features(wave)
        np.testing.assert_array_equal(a, b)

    def test_wrong_rate_rejected(self, encoder, rng):
        with pytest.raises(SampleRateError):
            encoder.features(random_wave(rng, 4800, 8000))


class TestQuantizer:
    def test_identical_frames_identical_ids(self, rng):
        q = VectorQuantizer.init(Rng(3), feat_dim=8)
        frame = rng.uniform((1, 8), -1, 1)
        ids = q.quantize(np.repeat(frame, 5, axis=0))
        assert len(set(ids.tolist())) == 1

    def test_ids_in_codebook_range(self, rng):
        q = VectorQuantizer.init(Rng(3), feat_dim=8, n_codes=256)
        ids = q.quantize(rng.uniform((40, 8), -3, 3))
        assert ids.min() >= 0 and ids.max() < 256

    def test_exact_codeword_maps_to_its_id(self):
        # identity projection + a frame equal to codeword k -> id k
        q = VectorQuantizer.init(Rng(3), feat_dim=6, code_dim=6, n_codes=32)
        q.projection = np.eye(6)
        for k in (0, 7, 31):
            ids = q.quantize(q.codebook[k][None, :])
            assert ids[0] == k

    def test_nearest_codeword_matches_exhaustive_scan(self, rng):
        q = VectorQuantizer.init(Rng(9), feat_dim=8, code_dim=4, n_codes=64)
        feats = rng.uniform((30, 8), -2, 2)
        ids = q.quantize(feats)
        proj = feats @ q.projection
        for t in range(len(feats)):
            dists = [np.sum((proj[t] - c) ** 2) for c in q.codebook]
            assert ids[t] == int(np.argmin(dists))

    def test_dimension_mismatch(self, rng):
        q = VectorQuantizer.init(Rng(3), feat_dim=8)
        with pytest.raises(ShapeMismatchError):
            q.quantize(rng.uniform((5, 9), -1, 1))


class TestArLm:
    @pytest.fixture(scope="class")
    def lm(self):
        return ArLm.init(ArLmConfig(prefix_dim=12, hidden_dim=32, num_heads=4), Rng(8))

    def test_greedy_decode_deterministic(self, lm, rng):
        prefix = rng.uniform((9, 12), -1, 1)
        ids_a, hidden_a = lm.decode(prefix, max_len=9)
        ids_b, hidden_b = lm.decode(prefix, max_len=9)
        np.testing.assert_array_equal(ids_a, ids_b)
        np.testing.assert_array_equal(hidden_a, hidden_b)

    def test_hidden_shape(self, lm, rng):
        _, hidden = lm.decode(rng.uniform((5, 12), -1, 1), max_len=5)
        assert hidden.shape == (5, 32)

    def test_ids_in_codebook(self, lm, rng):
        ids, _ = lm.decode(rng.uniform((7, 12), -1, 1), max_len=7)
        assert ids.min() >= 0 and ids.max() < lm.config.codebook_size

    def test_causal_mask_prefix_extension(self, lm, rng):
        # appending positions must not change earlier hidden states
        embeds = rng.uniform((10, 32), -1, 1)
        short = lm.forward_hidden(embeds[:6])
        full = lm.forward_hidden(embeds)
        np.testing.assert_allclose(short, full[:6], atol=1e-12)

    def test_empty_prefix_rejected(self, lm):
        with pytest.raises(ShapeMismatchError):
            lm.decode(np.zeros((0, 12)), max_len=3)

    def test_teacher_forced_logits_shape_and_range_check(self, lm, rng):
        prefix = rng.uniform((4, 12), -1, 1)
        tokens = Rng(2).integers(4, lm.config.codebook_size)
        logits = lm.token_logits(prefix, tokens)
        assert logits.shape == (4, lm.config.codebook_size)
        with pytest.raises(IndexError):
            lm.token_logits(prefix, np.array([0, 1, 2, lm.config.codebook_size]))


class TestRefiner:
    @pytest.fixture(scope="class")
    def refiner(self):
        return SpectrumRefiner.init(RefinerConfig(), Rng(10))

    def spec16(self, rng, n_samples=3200):
        return stft(random_wave(rng, n_samples, 16000), REFINER_STFT)

    def test_output_shape_matches_input(self, refiner, rng):
        spec = self.spec16(rng)
        hidden = rng.uniform((spec.n_frames, 64), -1, 1)
        out = refiner.refine(spec, hidden)
        assert out.data.shape == spec.data.shape
        assert out.config == REFINER_STFT

    def test_zero_decoder_gives_zero_output(self, rng):
        refiner = SpectrumRefiner.init(RefinerConfig(), Rng(10))
        refiner.zero_decoder()
        spec = self.spec16(rng)
        hidden = rng.uniform((spec.n_frames, 64), -1, 1)
        out = refiner.refine(spec, hidden)
        assert np.all(out.data == 0)

    def test_mask_magnitude_capped_at_two(self, refiner, rng):
        spec = self.spec16(rng)
        hidden = rng.uniform((spec.n_frames, 64), -1, 1)
        mask = refiner.estimate_mask(spec, hidden)
        assert np.max(np.abs(mask)) <= 2.0

    def test_frame_misalignment_raises(self, refiner, rng):
        spec = self.spec16(rng)
        with pytest.raises(FrameAlignmentError):
            refiner.refine(spec, rng.uniform((spec.n_frames + 1, 64), -1, 1))

    def test_wrong_stft_config_rejected(self, refiner, rng):
        spec = stft(random_wave(rng, 3200, 16000), StftConfig())
        with pytest.raises(ShapeMismatchError):
            refiner.refine(spec, rng.uniform((spec.n_frames, 64), -1, 1))


class TestGenEnhance:
    def test_48k_input_emits_16k(self, models, rng):
        out = gen_enhance(random_wave(rng, 12000, 48000), models)
        assert out.sample_rate_hz == 16000

    def test_duration_within_one_hop(self, models, rng):
        wave = random_wave(rng, 12000, 48000)  # 0.25 s
        out = gen_enhance(wave, models)
        expected = round(len(wave) * 16000 / 48000)
        assert abs(len(out) - expected) <= 320

    def test_deterministic(self, models, rng):
        wave = random_wave(rng, 4800, 16000)
        np.testing.assert_array_equal(
            gen_enhance(wave, models).samples, gen_enhance(wave, models).samples
        )

    def test_semantic_hop_aligns_with_refiner_frames(self, models, rng):
        # 20 ms x 16 kHz = 320 samples: feature frames == spectrogram frames
        for n in (3200, 4801, 7039):
            wave = random_wave(rng, n, 16000)
            feats = models.semantic.features(wave)
            spec = stft(wave, REFINER_STFT)
            assert feats.shape[0] == spec.n_frames


class TestTokenNllConsistency:
    def test_nll_finite_and_matches_cross_entropy(self, models, rng):
        wave = random_wave(rng, 3200, 16000)
        value = token_nll(wave, models)
        assert np.isfinite(value)
        # independent recomputation: same logits through a hand-rolled NLL
        prefix = models.semantic.features(wave)
        tokens = models.quantizer.quantize(prefix)
        logits = models.arlm.token_logits(prefix, tokens)
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        by_hand = -np.mean(log_probs[np.arange(len(tokens)), tokens])
        assert value == pytest.approx(by_hand, abs=1e-12)
        ce, _ = softmax_cross_entropy_with_grad(logits, tokens)
        assert value == pytest.approx(ce, abs=0)

import numpy as np
import pytest

from sefusion.dsp import ComplexSpectrogram, StftConfig
from sefusion.errors import DataValidationError
from sefusion.gridnet import GridNetConfig, GridNetModel, disc_enhance, grid_block
from sefusion.rng import Rng

from conftest import random_spec


@pytest.fixture
def model():
    return GridNetModel.init(GridNetConfig(), Rng(7))


def test_shape_rate_config_preserved(rng, model):
    spec = random_spec(rng, 101)
    out = disc_enhance(spec, model)
    assert out.data.shape == (101, 161)
    assert out.sample_rate_hz == 16000
    assert out.config == spec.config


def test_same_seed_same_output(rng):
    spec = random_spec(rng, 21)
    out_a = disc_enhance(spec, GridNetModel.init(GridNetConfig(), Rng(3)))
    out_b = disc_enhance(spec, GridNetModel.init(GridNetConfig(), Rng(3)))
    np.testing.assert_array_equal(out_a.data, out_b.data)


def test_zeroed_projections_exact_identity(rng):
    model = GridNetModel.identity(GridNetConfig(), Rng(9))
    spec = random_spec(rng, 17)
    out = disc_enhance(spec, model)
    np.testing.assert_array_equal(out.data, spec.data)


def test_one_model_serves_every_rate(rng, model):
    # rate independence: the same parameters process any bin count
    for rate in (8000, 16000, 48000):
        spec = random_spec(rng, 9, rate=rate)
        out = disc_enhance(spec, model)
        assert out.data.shape == spec.data.shape


def test_nonfinite_input_rejected():
    data = np.zeros((5, 161), dtype=complex)
    data[2, 3] = np.nan
    with pytest.raises(DataValidationError):
        ComplexSpectrogram(data, 16000, StftConfig())


class TestGridBlock:
    def test_zero_projection_identity(self, rng):
        from sefusion.gridnet import GridBlockParams

        params = GridBlockParams.init(Rng(2), 16, 32)
        params.zero_projections()
        feats = rng.uniform((7, 33, 16), -1, 1)
        np.testing.assert_array_equal(grid_block(feats, params), feats)

    def test_single_frame(self, rng):
        from sefusion.gridnet import GridBlockParams

        params = GridBlockParams.init(Rng(2), 16, 32)
        feats = rng.uniform((1, 33, 16), -1, 1)
        assert grid_block(feats, params).shape == (1, 33, 16)

    def test_bin_count_agnostic(self, rng):
        from sefusion.gridnet import GridBlockParams

        params = GridBlockParams.init(Rng(2), 16, 32)
        for bins in (81, 161):
            feats = rng.uniform((5, bins, 16), -1, 1)
            assert grid_block(feats, params).shape == (5, bins, 16)

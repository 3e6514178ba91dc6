"""Built-in verification suite behind ``sefusion selftest``.

Each check returns (ok, detail); the CLI prints one row per check and exits
nonzero if anything fails.  The gradient subset runs alone with --grad-only.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from . import fusion as fusion_mod
from .config import RunConfig
from .dsp import (
    SUPPORTED_RATES,
    ComplexSpectrogram,
    StftConfig,
    Waveform,
    frequency_bin_count,
    istft,
    stft,
)
from .errors import TensorFormatError
from .gridnet import GridNetModel, disc_enhance
from .losses import (
    MstftConfig,
    complex_mse,
    fusion_report,
    l1_loss,
    magnitude_mse,
    mstft_loss,
    perceptual_surrogate,
    regression_report,
)
from .nn import softmax_cross_entropy_with_grad
from .pipeline import EnhancerModels, hybrid_enhance
from .rng import Rng
from .tensorio import load_tensors, save_tensors

Check = tuple[str, bool, str]


def _roundtrip_config(rate: int) -> StftConfig:
    # 22.05 kHz cannot host a 10 ms hop (220.5 samples); use 40/20 there
    return StftConfig(40.0, 20.0) if rate == 22050 else StftConfig()


def check_stft_roundtrip() -> Check:
    worst = 0.0
    rng = Rng(11)
    for rate in SUPPORTED_RATES:
        wave = Waveform(rng.uniform(rate // 2, -1, 1), rate)
        cfg = _roundtrip_config(rate)
        rec = istft(stft(wave, cfg))
        n = len(rec)
        err = np.linalg.norm(rec.samples - wave.samples[:n]) / np.linalg.norm(
            wave.samples[:n]
        )
        worst = max(worst, err)
    return "stft_roundtrip", worst < 1e-10, f"worst relative L2 {worst:.3e}"


def check_sfi_bins() -> Check:
    expected = {8000: 81, 16000: 161, 32000: 321, 48000: 481}
    ok = all(frequency_bin_count(r) == b for r, b in expected.items())
    spacing = {r: r / StftConfig().window_samples(r) for r in SUPPORTED_RATES}
    ok = ok and all(abs(s - 50.0) < 1e-9 for s in spacing.values())
    return "sfi_bin_law", ok, "bins 81/161/321/481; spacing 50 Hz at every rate"


def _fd(f, x, grad, coords, h=1e-6):
    worst = 0.0
    for c in coords:
        xp = x.copy()
        xp[c] += h
        xm = x.copy()
        xm[c] -= h
        num = (f(xp) - f(xm)) / (2 * h)
        worst = max(
            worst, abs(num - grad[c]) / max(abs(num), abs(grad[c]), 1e-12)
        )
    return worst


def check_gradients() -> list[Check]:
    rng = Rng(23)
    checks: list[Check] = []

    est = rng.uniform(1600, -1, 1)
    ref = rng.uniform(1600, -1, 1)
    cfg = MstftConfig(((256, 64), (512, 128)))
    _, grad = mstft_loss(est, ref, cfg)
    worst = _fd(lambda x: mstft_loss(x, ref, cfg)[0], est, grad, rng.integers(6, 1600))
    checks.append(("grad_mstft", worst < 1e-4, f"fd rel err {worst:.2e}"))

    _, grad = l1_loss(est, ref)
    worst = _fd(lambda x: l1_loss(x, ref)[0], est, grad, rng.integers(6, 1600))
    checks.append(("grad_l1", worst < 1e-4, f"fd rel err {worst:.2e}"))

    _, grad = perceptual_surrogate(est, ref)
    worst = _fd(
        lambda x: perceptual_surrogate(x, ref)[0], est, grad, rng.integers(6, 1600)
    )
    checks.append(("grad_perceptual", worst < 1e-4, f"fd rel err {worst:.2e}"))

    spec_e = rng.uniform((6, 33), -1, 1) + 1j * rng.uniform((6, 33), -1, 1)
    spec_r = rng.uniform((6, 33), -1, 1) + 1j * rng.uniform((6, 33), -1, 1)
    worst = 0.0
    for fn in (complex_mse, magnitude_mse):
        _, grad = fn(spec_e, spec_r)
        for i, j in [(0, 0), (3, 17), (5, 32)]:
            for direction in (1.0, 1.0j):
                shifted = spec_e.copy()
                shifted[i, j] += 1e-6 * direction
                num = (fn(shifted, spec_r)[0] - fn(spec_e, spec_r)[0]) / 1e-6
                ana = grad[i, j].real if direction == 1.0 else grad[i, j].imag
                worst = max(worst, abs(num - ana) / max(abs(num), 1e-12))
    checks.append(("grad_spectral_mse", worst < 1e-4, f"fd rel err {worst:.2e}"))

    logits = rng.uniform((12, 7), -2, 2)
    targets = rng.integers(12, 7)
    _, grad = softmax_cross_entropy_with_grad(logits, targets)
    worst = 0.0
    for i, j in [(0, 0), (5, 3), (11, 6)]:
        shifted = logits.copy()
        shifted[i, j] += 1e-6
        other = logits.copy()
        other[i, j] -= 1e-6
        num = (
            softmax_cross_entropy_with_grad(shifted, targets)[0]
            - softmax_cross_entropy_with_grad(other, targets)[0]
        ) / 2e-6
        worst = max(worst, abs(num - grad[i, j]) / max(abs(num), 1e-12))
    checks.append(("grad_cross_entropy", worst < 1e-6, f"fd rel err {worst:.2e}"))

    checks.append(_check_fusion_gradient(rng))
    return checks


def _check_fusion_gradient(rng: Rng) -> Check:
    cfg16 = StftConfig()
    specs = []
    for _ in range(3):
        specs.append(
            ComplexSpectrogram(
                rng.uniform((7, 161), -1, 1) + 1j * rng.uniform((7, 161), -1, 1),
                16000,
                cfg16,
            )
        )
    example = [tuple(specs)]
    net = fusion_mod.FusionNet.init(rng.fork(77))
    mcfg = MstftConfig(((128, 32), (256, 64)))
    _, grads = fusion_mod.fusion_objective_with_grads(net, example, cfg=mcfg)
    worst = 0.0
    for name in ("w1", "w2", "w3"):
        arr = getattr(net, name)
        flat_idx = int(rng.integers(1, arr.size)[0])
        idx = np.unravel_index(flat_idx, arr.shape)
        h = 1e-6
        arr[idx] += h
        up = fusion_mod.fusion_objective_with_grads(net, example, cfg=mcfg)[0].total
        arr[idx] -= 2 * h
        down = fusion_mod.fusion_objective_with_grads(net, example, cfg=mcfg)[0].total
        arr[idx] += h
        num = (up - down) / (2 * h)
        ana = grads[name][idx]
        worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-12))
    return "grad_fusion_net", worst < 1e-4, f"fd rel err {worst:.2e}"


def check_fusion_endpoints() -> Check:
    rng = Rng(5)
    cfg = StftConfig()
    shape = (9, 161)
    disc = ComplexSpectrogram(
        rng.uniform(shape, -1, 1) + 1j * rng.uniform(shape, -1, 1), 16000, cfg
    )
    gen = ComplexSpectrogram(
        rng.uniform(shape, -1, 1) + 1j * rng.uniform(shape, -1, 1), 16000, cfg
    )
    ones = fusion_mod.FusionMask(np.ones(shape))
    zeros = fusion_mod.FusionMask(np.zeros(shape))
    ok = np.array_equal(fusion_mod.fuse(disc, gen, ones).data, disc.data)
    ok = ok and np.array_equal(fusion_mod.fuse(disc, gen, zeros).data, gen.data)
    return "fusion_endpoints", ok, "mask 1 -> disc, mask 0 -> gen, bit-equal"


def check_oracle_dominance() -> Check:
    rng = Rng(6)
    cfg = StftConfig()
    ok = True
    for _ in range(20):
        mats = [
            rng.uniform((5, 161), -1, 1) + 1j * rng.uniform((5, 161), -1, 1)
            for _ in range(3)
        ]
        disc, gen, clean = (ComplexSpectrogram(m, 16000, cfg) for m in mats)
        mask = fusion_mod.oracle_mask(disc, gen, clean)
        fused = fusion_mod.fuse(disc, gen, mask)
        err_f = np.linalg.norm(fused.data - clean.data)
        err_d = np.linalg.norm(disc.data - clean.data)
        err_g = np.linalg.norm(gen.data - clean.data)
        ok = ok and err_f <= min(err_d, err_g) + 1e-12
    return "oracle_dominance", ok, "oracle-fused error <= min branch error"


def check_loss_weights() -> Check:
    ok = regression_report(1.0, 2.0, 3.0).total == 1.93
    ok = ok and fusion_report(1.0, 2.0, 0.5).total == 2.5
    return "loss_weights", ok, "0.1/0.9/0.01 -> 1.93 and 1/0.5/1 -> 2.5, exact"


def check_determinism(config: RunConfig) -> Check:
    models_a = EnhancerModels.build(config.pipeline())
    models_b = EnhancerModels.build(config.pipeline())
    wave = Waveform(Rng(9).uniform(8000, -0.5, 0.5), 16000)
    out_a = hybrid_enhance(wave, models_a)
    out_b = hybrid_enhance(wave, models_b)
    ok = np.array_equal(out_a.samples, out_b.samples)
    return "determinism", ok, "two fresh model builds give identical output"


def check_residual_identity(config: RunConfig) -> Check:
    model = GridNetModel.identity(config.pipeline().disc, Rng(1))
    rng = Rng(2)
    spec = ComplexSpectrogram(
        rng.uniform((11, 161), -1, 1) + 1j * rng.uniform((11, 161), -1, 1),
        16000,
        StftConfig(),
    )
    out = disc_enhance(spec, model)
    ok = np.array_equal(out.data, spec.data)
    return "residual_identity", ok, "zeroed projections make enhancement exact identity"


def check_tensor_format() -> Check:
    rng = Rng(3)
    tensors = {"a": rng.uniform((3, 4), -1, 1), "b": rng.uniform(7, -1, 1)}
    fd, path = tempfile.mkstemp(suffix=".tensors")
    os.close(fd)
    try:
        save_tensors(path, tensors)
        loaded = load_tensors(path)
        ok = all(np.array_equal(loaded[k], tensors[k]) for k in tensors)
        with open(path, "r+b") as fh:
            fh.seek(0)
            fh.write(b"XX")
        try:
            load_tensors(path)
            ok = False
            detail = "corrupt file was not rejected"
        except TensorFormatError as exc:
            detail = f"roundtrip exact; corruption rejected ({exc.__class__.__name__})"
    finally:
        os.remove(path)
    return "tensor_format", ok, detail


def run_selftest(config: RunConfig | None = None, grad_only: bool = False) -> list[Check]:
    config = config or RunConfig()
    checks: list[Check] = []
    checks.extend(check_gradients())
    if grad_only:
        return checks
    checks.append(check_stft_roundtrip())
    checks.append(check_sfi_bins())
    checks.append(check_fusion_endpoints())
    checks.append(check_oracle_dominance())
    checks.append(check_loss_weights())
    checks.append(check_residual_identity(config))
    checks.append(check_tensor_format())
    checks.append(check_determinism(config))
    return checks

"""Run configuration: INI-style key = value text with strict validation.

Sections and keys (all optional; defaults shown by ``default_config_text``):

    [run]      seed, mode (disc|gen|hybrid), workers, identity_disc
    [stft]     window_ms, hop_ms
    [disc]     num_blocks, embed_dim, lstm_hidden
    [gen]      codebook_size, lm_layers, lm_hidden, lm_heads,
               dprnn_blocks, dprnn_channels, semantic_dim
    [fusion]   hidden, train_steps, learning_rate
    [recipe:NAME]  steps, seed

Unknown sections or keys are rejected outright.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .arlm import ArLmConfig
from .dprnn import RefinerConfig
from .dsp import StftConfig
from .errors import ConfigurationError
from .gridnet import GridNetConfig
from .pipeline import PipelineConfig
from .semantic import SemanticConfig
from .simulate import DegradationRecipe, parse_steps

MODES = ("disc", "gen", "hybrid")

_SCHEMA: dict[str, set[str]] = {
    "run": {"seed", "mode", "workers", "identity_disc"},
    "stft": {"window_ms", "hop_ms"},
    "disc": {"num_blocks", "embed_dim", "lstm_hidden"},
    "gen": {
        "codebook_size",
        "lm_layers",
        "lm_hidden",
        "lm_heads",
        "dprnn_blocks",
        "dprnn_channels",
        "semantic_dim",
    },
    "fusion": {"hidden", "train_steps", "learning_rate"},
}
_RECIPE_KEYS = {"steps", "seed"}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    mode: str = "hybrid"
    workers: int = 1
    identity_disc: bool = False
    window_ms: float = 20.0
    hop_ms: float = 10.0
    disc_blocks: int = 2
    disc_embed: int = 16
    disc_hidden: int = 32
    codebook_size: int = 256
    lm_layers: int = 2
    lm_hidden: int = 64
    lm_heads: int = 4
    dprnn_blocks: int = 2
    dprnn_channels: int = 32
    semantic_dim: int = 64
    fusion_hidden: int = 16
    fusion_train_steps: int = 200
    fusion_learning_rate: float = 0.05
    recipes: tuple[DegradationRecipe, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            seed=self.seed,
            stft=StftConfig(window_ms=self.window_ms, hop_ms=self.hop_ms),
            disc=GridNetConfig(
                num_blocks=self.disc_blocks,
                embed_dim=self.disc_embed,
                lstm_hidden=self.disc_hidden,
            ),
            semantic=SemanticConfig(feat_dim=self.semantic_dim),
            arlm=ArLmConfig(
                num_layers=self.lm_layers,
                hidden_dim=self.lm_hidden,
                num_heads=self.lm_heads,
                codebook_size=self.codebook_size,
                prefix_dim=self.semantic_dim,
            ),
            refiner=RefinerConfig(
                num_blocks=self.dprnn_blocks,
                channels=self.dprnn_channels,
                lm_dim=self.lm_hidden,
            ),
            fusion_hidden=self.fusion_hidden,
            identity_disc=self.identity_disc,
        )


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def load_config(path: str | Path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return parse_config(parser, source=str(path))


def parse_config(parser: configparser.ConfigParser, source: str = "<config>") -> RunConfig:
    values: dict = {}
    recipes: list[DegradationRecipe] = []
    for section in parser.sections():
        if section.startswith("recipe:"):
            name = section.split(":", 1)[1]
            keys = set(parser[section])
            unknown = keys - _RECIPE_KEYS
            if unknown:
                raise ConfigurationError(
                    f"{source}: unknown recipe keys {sorted(unknown)} in [{section}]"
                )
            if "steps" not in keys:
                raise ConfigurationError(f"{source}: [{section}] needs a steps entry")
            recipes.append(
                DegradationRecipe(
                    name=name,
                    steps=parse_steps(parser[section]["steps"]),
                    seed=int(parser[section].get("seed", "0")),
                )
            )
            continue
        if section not in _SCHEMA:
            raise ConfigurationError(f"{source}: unknown section [{section}]")
        unknown = set(parser[section]) - _SCHEMA[section]
        if unknown:
            raise ConfigurationError(
                f"{source}: unknown keys {sorted(unknown)} in [{section}]"
            )

    def get(section: str, key: str, cast, default):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                return cast(raw)
            except (ValueError, ConfigurationError) as exc:
                raise ConfigurationError(
                    f"{source}: bad value for {section}.{key}: {raw!r} ({exc})"
                ) from exc
        return default

    values["seed"] = get("run", "seed", int, 0)
    values["mode"] = get("run", "mode", str, "hybrid")
    values["workers"] = get("run", "workers", int, 1)
    values["identity_disc"] = get("run", "identity_disc", _parse_bool, False)
    values["window_ms"] = get("stft", "window_ms", float, 20.0)
    values["hop_ms"] = get("stft", "hop_ms", float, 10.0)
    values["disc_blocks"] = get("disc", "num_blocks", int, 2)
    values["disc_embed"] = get("disc", "embed_dim", int, 16)
    values["disc_hidden"] = get("disc", "lstm_hidden", int, 32)
    values["codebook_size"] = get("gen", "codebook_size", int, 256)
    values["lm_layers"] = get("gen", "lm_layers", int, 2)
    values["lm_hidden"] = get("gen", "lm_hidden", int, 64)
    values["lm_heads"] = get("gen", "lm_heads", int, 4)
    values["dprnn_blocks"] = get("gen", "dprnn_blocks", int, 2)
    values["dprnn_channels"] = get("gen", "dprnn_channels", int, 32)
    values["semantic_dim"] = get("gen", "semantic_dim", int, 64)
    values["fusion_hidden"] = get("fusion", "hidden", int, 16)
    values["fusion_train_steps"] = get("fusion", "train_steps", int, 200)
    values["fusion_learning_rate"] = get("fusion", "learning_rate", float, 0.05)
    values["recipes"] = tuple(recipes)
    return RunConfig(**values)


def default_config_text() -> str:
    return """\
[run]
seed = 0
mode = hybrid
workers = 1

[stft]
window_ms = 20
hop_ms = 10

[disc]
num_blocks = 2
embed_dim = 16
lstm_hidden = 32

[gen]
codebook_size = 256
lm_layers = 2
lm_hidden = 64
lm_heads = 4
dprnn_blocks = 2
dprnn_channels = 32
semantic_dim = 64

[fusion]
hidden = 16
train_steps = 200
learning_rate = 0.05

[recipe:noisy10]
steps = additive_noise(snr_db=10)
seed = 7
"""

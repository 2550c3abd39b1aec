"""Line-oriented pipeline configuration.

The on-disk format is one `section.key = value` assignment per line,
with '#' comments; every key has a default, so an empty file is valid.
Values are typed from the dataclass fields they override. The parser
remembers which keys were set explicitly so the pipeline can keep
noise-dependent defaults for untouched sections.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .denoise import Bm3dProfile, default_profile
from .enhance import EnhanceConfig
from .levelset import LevelSetConfig
from .sfcm import SfcmConfig
from .cnn.network import NetworkConfig
from .cnn.train import TrainConfig


@dataclass(frozen=True)
class PipelineSection:
    sigma: float = 25.0             # assumed noise std, 8-bit scale
    seed: int = 0


@dataclass(frozen=True)
class NetworkSection:
    input_size: int = 256
    desk: bool = False              # quarter-width channels, 64x64 input


@dataclass(frozen=True)
class PipelineConfig:
    pipeline: PipelineSection = PipelineSection()
    denoise: Bm3dProfile = Bm3dProfile()
    enhance: EnhanceConfig = EnhanceConfig()
    sfcm: SfcmConfig = SfcmConfig()
    levelset: LevelSetConfig = LevelSetConfig()
    network: NetworkSection = NetworkSection()
    train: TrainConfig = TrainConfig()
    touched: frozenset = frozenset()

    def denoise_profile(self) -> Bm3dProfile:
        """Explicit block-match settings win; otherwise pick by sigma."""
        if any(key.startswith("denoise.") for key in self.touched):
            return self.denoise
        return default_profile(self.pipeline.sigma)

    def network_config(self) -> NetworkConfig:
        if self.network.desk:
            size = self.network.input_size
            if "network.input_size" not in self.touched:
                size = 64
            return NetworkConfig(input_size=size, channel_scale=4)
        return NetworkConfig(input_size=self.network.input_size)

    def sfcm_config(self) -> SfcmConfig:
        cfg = self.sfcm
        if "sfcm.seed" not in self.touched:
            cfg = dataclasses.replace(cfg, seed=self.pipeline.seed)
        return cfg

    def train_config(self) -> TrainConfig:
        cfg = self.train
        if "train.seed" not in self.touched:
            cfg = dataclasses.replace(cfg, seed=self.pipeline.seed)
        return cfg


_SECTIONS = ("pipeline", "denoise", "enhance", "sfcm", "levelset", "network", "train")


def _coerce(current, text: str):
    if isinstance(current, bool):
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    return text


def apply_assignments(config: PipelineConfig, assignments) -> PipelineConfig:
    """Apply `section.key = value` pairs on top of a config."""
    sections = {name: getattr(config, name) for name in _SECTIONS}
    touched = set(config.touched)
    for dotted, text in assignments:
        if "." not in dotted:
            raise ValueError(f"expected section.key, got {dotted!r}")
        section_name, key = dotted.split(".", 1)
        if section_name not in sections:
            raise ValueError(f"unknown config section {section_name!r}")
        section = sections[section_name]
        if key not in {f.name for f in dataclasses.fields(section)} or key == "layers":
            raise ValueError(f"unknown config key {dotted!r}")
        value = _coerce(getattr(section, key), text)
        sections[section_name] = dataclasses.replace(section, **{key: value})
        touched.add(dotted)
    return PipelineConfig(**sections, touched=frozenset(touched))


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    config = base if base is not None else PipelineConfig()
    assignments = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        dotted, value = (part.strip() for part in line.split("=", 1))
        assignments.append((dotted, value))
    return apply_assignments(config, assignments)


def format_config(config: PipelineConfig) -> str:
    """Render every effective value in the on-disk format."""
    lines = []
    for name in _SECTIONS:
        section = getattr(config, name)
        for field in dataclasses.fields(section):
            if field.name == "layers":
                continue
            lines.append(f"{name}.{field.name} = {getattr(section, field.name)}")
    return "\n".join(lines) + "\n"

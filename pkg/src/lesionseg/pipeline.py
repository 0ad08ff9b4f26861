"""End-to-end processing of one image: downscale, hair removal, segmentation
by the requested methods and feature extraction.

The configuration is a small tree of frozen dataclasses that can be read
from a plain ``key=value`` file with dotted section names::

    max_pixels = 12000
    methods = b_otsu, psm, mam
    psm.c_max = 15
    chanvese.iterations = 1000
"""
from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import read_image, read_mask
from .features import LesionSample, extract_features
from .imgcore import downscale, downscale_mask, extract_channel
from .preprocess import HairRemovalConfig, dull_razor
from .psm import PsmConfig, mam_segment, psm_segment
from .segment import (
    ChanVeseConfig,
    PostprocessConfig,
    segment_b_otsu,
    segment_canny_fill,
    segment_chan_vese,
)

METHODS = ("canny", "b_otsu", "chan_vese", "psm", "mam", "expert")
SECTIONS = ("psm", "chanvese", "post", "hair")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    max_pixels: int = 12000
    psm: PsmConfig = field(default_factory=PsmConfig)
    chanvese: ChanVeseConfig = field(default_factory=ChanVeseConfig)
    post: PostprocessConfig = field(default_factory=PostprocessConfig)
    hair: HairRemovalConfig = field(default_factory=HairRemovalConfig)
    delta: float = 0.1
    methods: tuple = ("canny", "b_otsu", "chan_vese", "psm", "mam")
    grid_step: float = 0.05
    seed: int = 0
    remove_hair: bool = True
    # wall-clock columns make otherwise identical runs differ byte-wise
    record_timing: bool = True

    def __post_init__(self):
        if self.max_pixels < 1:
            raise ConfigError("max_pixels must be >= 1")
        if not self.methods:
            raise ConfigError("methods must not be empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must not repeat")
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")


def _coerce(raw: str, like, where: str):
    raw = raw.strip()
    try:
        if isinstance(like, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            return tuple(p.strip() for p in raw.split(",") if p.strip())
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {type(like).__name__}") from None


def parse_config(text: str, source: str = "<config>", base: PipelineConfig | None = None) -> PipelineConfig:
    """Apply ``key=value`` lines to ``base`` (defaults if omitted)."""
    base = base or PipelineConfig()
    top: dict = {}
    sections: dict = {name: {} for name in SECTIONS}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        where = f"{source}:{lineno}"
        if not sep:
            raise ConfigError(f"{where}: expected key=value")
        key = key.strip()
        section, dot, name = key.partition(".")
        if dot:
            if section not in SECTIONS:
                raise ConfigError(f"{where}: unknown section {section!r}")
            sub = getattr(base, section)
            if name not in {f.name for f in dataclasses.fields(sub)}:
                raise ConfigError(f"{where}: unknown key {key!r}")
            sections[section][name] = _coerce(value, getattr(sub, name), where)
        else:
            if key in SECTIONS or key not in {f.name for f in dataclasses.fields(base)}:
                raise ConfigError(f"{where}: unknown key {key!r}")
            top[key] = _coerce(value, getattr(base, key), where)
    try:
        for section, values in sections.items():
            if values:
                top[section] = dataclasses.replace(getattr(base, section), **values)
        return dataclasses.replace(base, **top)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


# --------------------------------------------------------------------------
# per-image work

def prepare(img, expert=None, cfg: PipelineConfig = PipelineConfig()):
    """Downscale the image (and the expert mask to the same grid), then remove hair."""
    img = np.asarray(img)
    if expert is not None and np.asarray(expert).shape != img.shape[:2]:
        raise ValueError(f"expert mask {np.asarray(expert).shape} does not match image {img.shape[:2]}")
    small = downscale(img, cfg.max_pixels)
    if expert is not None:
        expert = downscale_mask(expert, small.shape[1], small.shape[0])
    if cfg.remove_hair:
        small = dull_razor(small, cfg.hair)
    return small, expert


@dataclass
class Segmentation:
    method: str
    mask: np.ndarray
    chosen_c: float | None = None
    mam_winner: str | None = None
    wall_time_ms: float | None = None


def segment(method: str, img, expert=None, cfg: PipelineConfig = PipelineConfig()) -> Segmentation:
    """Run one method on a prepared image."""
    t0 = time.perf_counter()
    chosen_c = winner = None
    if method == "canny":
        mask = segment_canny_fill(img, cfg.post)
    elif method == "b_otsu":
        mask = segment_b_otsu(img, cfg.post)
    elif method == "chan_vese":
        mask = segment_chan_vese(img, cfg.chanvese, cfg.post)
    elif method == "psm":
        res = psm_segment(extract_channel(img, "B"), cfg.psm, cfg.post)
        mask, chosen_c = res.mask, res.chosen_c
    elif method == "mam":
        res = mam_segment(img, cfg.psm, cfg.post)
        mask, chosen_c, winner = res.mask, res.chosen_c, res.winner
    elif method == "expert":
        if expert is None:
            raise ValueError("no expert mask for this image")
        mask = np.asarray(expert, dtype=bool)
    else:
        raise ValueError(f"unknown method {method!r}")
    elapsed = (time.perf_counter() - t0) * 1000.0
    return Segmentation(method, mask, chosen_c, winner, elapsed)


def features_for(img, seg: Segmentation, mm_per_pixel=None):
    return extract_features(LesionSample(img, seg.mask, mm_per_pixel))


@dataclass
class ImageResult:
    id: str
    image: np.ndarray | None
    expert: np.ndarray | None
    segmentations: dict
    errors: dict


def process_image(sample_id, img, expert, cfg: PipelineConfig, methods=None) -> ImageResult:
    """Prepare once and run every method; a failing method is recorded, not raised."""
    methods = tuple(methods or cfg.methods)
    try:
        small, small_expert = prepare(img, expert, cfg)
    except Exception as exc:  # noqa: BLE001 - isolate per-image failures
        return ImageResult(sample_id, None, None, {}, {m: f"{type(exc).__name__}: {exc}" for m in methods})
    segs, errors = {}, {}
    for m in methods:
        try:
            segs[m] = segment(m, small, small_expert, cfg)
        except Exception as exc:  # noqa: BLE001
            errors[m] = f"{type(exc).__name__}: {exc}"
    return ImageResult(sample_id, small, small_expert, segs, errors)


def process_entry(entry, cfg: PipelineConfig, methods=None) -> ImageResult:
    """Load a corpus entry from disk and process it."""
    methods = tuple(methods or cfg.methods)
    try:
        img = read_image(entry.image_path)
        expert = read_mask(entry.mask_path) if entry.mask_path is not None else None
    except Exception as exc:  # noqa: BLE001
        return ImageResult(entry.id, None, None, {}, {m: f"{type(exc).__name__}: {exc}" for m in methods})
    return process_image(entry.id, img, expert, cfg, methods)

"""The three augmentation techniques and their batch combination.

Every emitted variant is keyed by its sample's identity (source_page,
line_index) rather than its list position, so reordering the input changes
nothing: each sample always receives the same random sub-stream for each
technique under a fixed config seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from inkline import config as cfgmod
from inkline.errors import ConfigError
from inkline.imaging import GrayImage, StructuringElement, binarize, erode, pad, resize_bilinear
from inkline.segmentation import LineRoi


class NoiseKind(Enum):
    SALT_PEPPER = "salt_pepper"
    GAUSSIAN = "gaussian"


class TagKind(Enum):
    ORIGINAL = "original"
    THINNED = "thinned"
    NOISED = "noised"
    STRETCHED = "stretched"


# technique name -> sub-stream label, in canonical emission order
TECHNIQUES = ("thickness", "noise", "stretch")


@dataclass(frozen=True)
class AugmentConfig:
    """All augmentation tunables."""

    seed: int = 0
    thickness_iterations: int = 1
    thickness_se: StructuringElement = field(
        default_factory=lambda: StructuringElement.cross(3, 3)
    )
    thickness_floor: float = 0.2  # min surviving-foreground fraction
    noise_kind: NoiseKind = NoiseKind.SALT_PEPPER
    noise_density: float = 0.02
    gaussian_sigma: float = 10.0
    stretch_min: float = -0.9
    stretch_max: float = 0.1
    min_width: int = 8

    def __post_init__(self):
        if not -1.0 < self.stretch_min <= self.stretch_max:
            raise ConfigError(
                f"stretch bounds must satisfy -1 < min <= max, got "
                f"{self.stretch_min}/{self.stretch_max}"
            )
        if not 0.0 <= self.noise_density <= 1.0:
            raise ConfigError(f"noise_density must be in [0,1], got {self.noise_density}")
        if not 0.0 <= self.thickness_floor <= 1.0:
            raise ConfigError(f"thickness_floor must be in [0,1], got {self.thickness_floor}")
        if self.thickness_iterations < 1:
            raise ConfigError(
                f"thickness_iterations must be >= 1, got {self.thickness_iterations}"
            )
        if self.min_width < 1:
            raise ConfigError(f"min_width must be >= 1, got {self.min_width}")
        if self.gaussian_sigma < 0:
            raise ConfigError(f"gaussian_sigma must be >= 0, got {self.gaussian_sigma}")

    _KEYS = (
        "seed",
        "thickness_iterations",
        "thickness_se",
        "thickness_floor",
        "noise_kind",
        "noise_density",
        "gaussian_sigma",
        "stretch_min",
        "stretch_max",
        "min_width",
    )

    def to_section(self) -> dict:
        return {
            "seed": self.seed,
            "thickness_iterations": self.thickness_iterations,
            "thickness_se": self.thickness_se,
            "thickness_floor": self.thickness_floor,
            "noise_kind": self.noise_kind.value,
            "noise_density": self.noise_density,
            "gaussian_sigma": self.gaussian_sigma,
            "stretch_min": self.stretch_min,
            "stretch_max": self.stretch_max,
            "min_width": self.min_width,
        }

    @classmethod
    def from_raw(cls, raw: cfgmod.RawConfig) -> "AugmentConfig":
        section = raw.get(cfgmod.SECTION_AUGMENT, {})
        cfgmod.reject_unknown(section, cls._KEYS, cfgmod.SECTION_AUGMENT)
        out = cls()
        for key, (value, line_no) in section.items():
            if key == "seed":
                out = replace(out, seed=cfgmod.parse_int(value, line_no, key))
            elif key == "thickness_iterations":
                out = replace(out, thickness_iterations=cfgmod.parse_int(value, line_no, key))
            elif key == "thickness_se":
                out = replace(out, thickness_se=cfgmod.parse_se(value, line_no, key))
            elif key == "thickness_floor":
                out = replace(out, thickness_floor=cfgmod.parse_float(value, line_no, key))
            elif key == "noise_kind":
                try:
                    out = replace(out, noise_kind=NoiseKind(value))
                except ValueError:
                    raise ConfigError(
                        f"line {line_no}: noise_kind must be one of "
                        f"{[m.value for m in NoiseKind]}, got {value!r}"
                    ) from None
            elif key == "noise_density":
                out = replace(out, noise_density=cfgmod.parse_float(value, line_no, key))
            elif key == "gaussian_sigma":
                out = replace(out, gaussian_sigma=cfgmod.parse_float(value, line_no, key))
            elif key == "stretch_min":
                out = replace(out, stretch_min=cfgmod.parse_float(value, line_no, key))
            elif key == "stretch_max":
                out = replace(out, stretch_max=cfgmod.parse_float(value, line_no, key))
            elif key == "min_width":
                out = replace(out, min_width=cfgmod.parse_int(value, line_no, key))
        return out


@dataclass(frozen=True)
class AugmentationTag:
    """Which technique produced a sample, plus the realized parameter.

    Canonical string forms (used in manifests): `original`, `thinned:ok`,
    `thinned:floored`, `noised:off=<int>`, `stretched:f=<float repr>`.
    """

    kind: TagKind
    param: Optional[str] = None

    def __post_init__(self):
        if self.kind is TagKind.ORIGINAL and self.param is not None:
            raise ValueError("original samples carry no parameter")
        if self.kind is not TagKind.ORIGINAL and not self.param:
            raise ValueError(f"{self.kind.value} tag requires a parameter")

    def encode(self) -> str:
        return self.kind.value if self.param is None else f"{self.kind.value}:{self.param}"

    @classmethod
    def parse(cls, token: str) -> "AugmentationTag":
        kind_token, sep, param = token.partition(":")
        try:
            kind = TagKind(kind_token)
        except ValueError:
            raise ValueError(f"unknown augmentation tag {token!r}") from None
        if kind is TagKind.ORIGINAL:
            if sep:
                raise ValueError(f"original tag carries no parameter, got {token!r}")
            return cls(kind)
        if kind is TagKind.THINNED and param not in ("ok", "floored"):
            raise ValueError(f"thinned tag parameter must be ok|floored, got {token!r}")
        if kind is TagKind.NOISED:
            if not param.startswith("off="):
                raise ValueError(f"noised tag parameter must be off=<int>, got {token!r}")
            int(param[4:])  # raises ValueError on garbage
        if kind is TagKind.STRETCHED:
            if not param.startswith("f="):
                raise ValueError(f"stretched tag parameter must be f=<float>, got {token!r}")
            float(param[2:])
        return cls(kind, param)


ORIGINAL_TAG = AugmentationTag(TagKind.ORIGINAL)


# ---------------------------------------------------------------------------
# Random sub-streams


def derive_stream(seed: int, *parts) -> np.random.Generator:
    """Independent generator for one (sample identity, technique) pair."""
    return np.random.default_rng([seed] + list(_stream_words(*parts)))


def _stream_words(*parts) -> list[int]:
    token = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(token).digest()
    return [int(w) for w in np.frombuffer(digest[:16], dtype=np.uint32)]


# ---------------------------------------------------------------------------
# Techniques


def reduce_thickness(img: GrayImage, cfg: AugmentConfig) -> tuple[GrayImage, bool]:
    """Erode the stroke mask and keep original intensities on what survives.

    Removed pixels become white. If fewer than thickness_floor of the
    foreground pixels would survive, the original image is returned
    unchanged and the second element is True ("floored").
    """
    binary = binarize(img)
    if binary.foreground_count == 0:
        return img, False
    eroded = binary
    for _ in range(cfg.thickness_iterations):
        eroded = erode(eroded, cfg.thickness_se)
    if eroded.foreground_count < cfg.thickness_floor * binary.foreground_count:
        return img, True
    out = np.where(eroded.pixels, img.pixels, np.uint8(255))
    return GrayImage(out), False


def add_noise(img: GrayImage, cfg: AugmentConfig, stream: np.random.Generator) -> GrayImage:
    """Salt-and-pepper (each hit pixel becomes 0 or 255, equal odds) or
    additive clamped Gaussian noise. Deterministic given the stream."""
    shape = img.pixels.shape
    if cfg.noise_kind is NoiseKind.SALT_PEPPER:
        # both draws happen regardless of density, keeping streams aligned
        hit = stream.random(shape) < cfg.noise_density
        salt = stream.random(shape) < 0.5
        values = np.where(salt, np.uint8(255), np.uint8(0))
        return GrayImage(np.where(hit, values, img.pixels))
    noise = stream.normal(0.0, cfg.gaussian_sigma, shape)
    out = np.clip(np.rint(img.pixels.astype(np.float64) + noise), 0, 255)
    return GrayImage(out.astype(np.uint8))


def apply_stretch(img: GrayImage, factor: float, cfg: AugmentConfig) -> GrayImage:
    """Resize horizontally by (1 + factor), then restore the original width
    by center-padding with white (narrowed) or center-cropping (widened)."""
    new_w = max(cfg.min_width, int(np.rint(img.width * (1.0 + factor))))
    if new_w == img.width:
        return img
    resized = resize_bilinear(img, new_w, img.height)
    if new_w < img.width:
        missing = img.width - new_w
        return pad(resized, 0, 0, missing // 2, missing - missing // 2, fill=255)
    start = (new_w - img.width) // 2
    return GrayImage(resized.pixels[:, start : start + img.width])


def random_stretch(
    img: GrayImage, cfg: AugmentConfig, stream: np.random.Generator
) -> tuple[GrayImage, float]:
    """Stretch by a factor drawn uniformly from [stretch_min, stretch_max]."""
    factor = float(stream.uniform(cfg.stretch_min, cfg.stretch_max))
    return apply_stretch(img, factor, cfg), factor


# ---------------------------------------------------------------------------
# Batch


def _identity(sample: LineRoi) -> tuple[str, int]:
    return (sample.source_page, sample.line_index)


def augment_all(
    samples: Sequence[LineRoi],
    cfg: AugmentConfig,
    techniques: Sequence[str] = TECHNIQUES,
) -> list[tuple[LineRoi, AugmentationTag]]:
    """Emit the original plus one variant per enabled technique per sample.

    With all three techniques the output is exactly 4x the input; thickness
    only gives 2x, thickness+noise 3x. Output is grouped per sample in input
    order, but each variant depends only on (cfg.seed, sample identity,
    technique), never on position.
    """
    unknown = [t for t in techniques if t not in TECHNIQUES]
    if unknown:
        raise ValueError(f"unknown techniques: {unknown}; expected subset of {TECHNIQUES}")
    enabled = [t for t in TECHNIQUES if t in techniques]

    out: list[tuple[LineRoi, AugmentationTag]] = []
    for sample in samples:
        out.append((sample, ORIGINAL_TAG))
        identity = _identity(sample)
        if "thickness" in enabled:
            thin, floored = reduce_thickness(sample.image, cfg)
            tag = AugmentationTag(TagKind.THINNED, "floored" if floored else "ok")
            out.append((replace(sample, image=thin), tag))
        if "noise" in enabled:
            offset = _stream_words(*identity, "noise")[0]
            noisy = add_noise(sample.image, cfg, derive_stream(cfg.seed, *identity, "noise"))
            out.append((replace(sample, image=noisy), AugmentationTag(TagKind.NOISED, f"off={offset}")))
        if "stretch" in enabled:
            stretched, factor = random_stretch(
                sample.image, cfg, derive_stream(cfg.seed, *identity, "stretch")
            )
            tag = AugmentationTag(TagKind.STRETCHED, f"f={factor!r}")
            out.append((replace(sample, image=stretched), tag))
    return out

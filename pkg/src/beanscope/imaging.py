"""Raster types, PPM codec and threshold segmentation of bean snapshots."""

from __future__ import annotations

import enum
import os
import re
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import CorruptImage, RegionOutOfBounds, UnsupportedFormat

DEFAULT_THRESHOLD = 163


class Channel(enum.IntEnum):
    RED = 0
    GREEN = 1
    BLUE = 2

    @property
    def letter(self) -> str:
        return "rgb"[self.value]

    @classmethod
    def parse(cls, text: str) -> "Channel":
        key = text.strip().lower()
        for ch in cls:
            if key in (ch.letter, ch.name.lower()):
                return ch
        raise ValueError(f"unknown channel {text!r}")


class Pixel(NamedTuple):
    r: int
    g: int
    b: int


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _as_u8(values, what: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError(f"{what} values must lie in [0, 255]")
        if np.issubdtype(arr.dtype, np.floating) and not np.array_equal(arr, np.round(arr)):
            raise ValueError(f"{what} values must be integers")
    return np.array(arr, dtype=np.uint8)


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Row-major RGB raster; ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = _as_u8(self.pixels, "pixel")
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a (height, width, 3) array, got shape {arr.shape}")
        object.__setattr__(self, "pixels", _frozen(arr))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def pixel(self, x: int, y: int) -> Pixel:
        r, g, b = (int(v) for v in self.pixels[y, x])
        return Pixel(r, g, b)

    def __eq__(self, other):
        return isinstance(other, RgbImage) and np.array_equal(self.pixels, other.pixels)

    @classmethod
    def from_pixels(cls, width: int, height: int, pixels) -> "RgbImage":
        flat = list(pixels)
        if len(flat) != width * height:
            raise ValueError(f"expected {width * height} pixels, got {len(flat)}")
        return cls(np.array(flat, dtype=np.int64).reshape(height, width, 3))


@dataclass(frozen=True, eq=False)
class GrayscaleImage:
    values: np.ndarray
    channel: Channel

    def __post_init__(self):
        arr = _as_u8(self.values, "intensity")
        if arr.ndim != 2:
            raise ValueError("grayscale values must be a 2-d grid")
        object.__setattr__(self, "values", _frozen(arr))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SegmentationConfig:
    threshold: int = DEFAULT_THRESHOLD
    min_region_pixels: int = 200
    max_region_pixels: int = 20000
    connectivity: int = 8

    def __post_init__(self):
        if not 0 <= self.threshold <= 255:
            raise ValueError("threshold must lie in [0, 255]")
        if not 0 < self.min_region_pixels < self.max_region_pixels:
            raise ValueError("need 0 < min_region_pixels < max_region_pixels")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass(frozen=True, eq=False)
class BeanRegion:
    bounding_box: tuple[int, int, int, int]  # x0, y0, width, height
    mask: np.ndarray
    source_image_id: str = ""
    pixel_count: int = field(init=False)

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        _, _, w, h = self.bounding_box
        if mask.shape != (h, w):
            raise ValueError(f"mask shape {mask.shape} does not match box {w}x{h}")
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "pixel_count", int(mask.sum()))


@dataclass(frozen=True, eq=False)
class MaskedBean:
    """A cropped bean raster; only pixels where ``mask`` is true belong to the bean."""

    image: RgbImage
    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.shape != (self.image.height, self.image.width):
            raise ValueError("mask shape must match the image")
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def pixel_count(self) -> int:
        return int(self.mask.sum())

    def masked_values(self, channel: Channel) -> np.ndarray:
        return self.image.pixels[..., int(channel)][self.mask]

    @classmethod
    def full(cls, image: RgbImage) -> "MaskedBean":
        return cls(image, np.ones((image.height, image.width), dtype=bool))


# --- codec -----------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _parse_ppm(data: bytes, path) -> RgbImage:
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise CorruptImage(f"{path}: truncated PPM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P6":
        raise UnsupportedFormat(f"{path}: not a binary PPM (magic {tokens[0][:8]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise CorruptImage(f"{path}: non-numeric PPM header field") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise CorruptImage(f"{path}: invalid PPM header {width}x{height} maxval {maxval}")
    if maxval > 255:
        raise UnsupportedFormat(f"{path}: 16-bit PPM (maxval {maxval}) is not supported")
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: PPM maxval must be 255, got {maxval}")
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise CorruptImage(f"{path}: missing whitespace after PPM header")
    payload = data[pos + 1:]
    need = width * height * 3
    if len(payload) < need:
        raise CorruptImage(f"{path}: PPM payload has {len(payload)} bytes, expected {need}")
    arr = np.frombuffer(payload[:need], dtype=np.uint8).reshape(height, width, 3)
    return RgbImage(arr.copy())


def decode_ppm(data: bytes, path="<bytes>") -> RgbImage:
    return _parse_ppm(data, path)


def encode_ppm(img: RgbImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def save_ppm(img: RgbImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ppm(img))


def _load_with_pillow(path) -> RgbImage:
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover - pillow is an optional extra
        raise UnsupportedFormat(f"{path}: PNG/JPEG support needs Pillow installed") from None
    try:
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I;16L", "I", "RGB;16", "RGBA;16") or \
                    im.info.get("bitdepth", 8) > 8:
                raise UnsupportedFormat(f"{path}: 16-bit images are not supported")
            rgb = np.asarray(im.convert("RGB"))
    except UnsupportedFormat:
        raise
    except OSError as exc:
        raise CorruptImage(f"{path}: {exc}") from None
    return RgbImage(rgb)


def load_image(path) -> RgbImage:
    """Decode a PPM P6 (or, with Pillow, PNG/JPEG) file into an RgbImage."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{path}: no such image file")
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"P6":
        return _parse_ppm(data, path)
    if data[:2] in (b"P1", b"P2", b"P3", b"P4", b"P5"):
        raise UnsupportedFormat(f"{path}: only binary RGB PPM (P6) is supported")
    if data[:8] == b"\x89PNG\r\n\x1a\n" or data[:3] == b"\xff\xd8\xff":
        return _load_with_pillow(path)
    if not data:
        raise CorruptImage(f"{path}: empty file")
    raise UnsupportedFormat(f"{path}: unrecognised image format")


# --- segmentation ----------------------------------------------------------

def extract_channel(img: RgbImage, channel: Channel) -> GrayscaleImage:
    return GrayscaleImage(img.pixels[..., int(channel)], Channel(channel))


def is_background(p, threshold: int = DEFAULT_THRESHOLD) -> bool:
    """Background iff every channel is strictly brighter than ``threshold``."""
    r, g, b = p
    return r > threshold and g > threshold and b > threshold


def segment_mask(img: RgbImage, cfg: SegmentationConfig = SegmentationConfig()) -> np.ndarray:
    """Boolean grid, true where the pixel belongs to a bean."""
    return ~np.all(img.pixels > cfg.threshold, axis=2)


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    return ndimage.generate_binary_structure(2, 1)


def find_bean_regions(img: RgbImage, cfg: SegmentationConfig = SegmentationConfig(),
                      image_id: str = "") -> list[BeanRegion]:
    mask = segment_mask(img, cfg)
    labels, _ = ndimage.label(mask, structure=_structure(cfg.connectivity))
    regions = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        sub = labels[sl] == idx
        count = int(sub.sum())
        if not cfg.min_region_pixels <= count <= cfg.max_region_pixels:
            continue
        ys, xs = sl
        box = (xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start)
        regions.append(BeanRegion(box, sub, image_id))
    regions.sort(key=lambda r: (r.bounding_box[1], r.bounding_box[0]))
    return regions


def crop_bean(img: RgbImage, region: BeanRegion) -> MaskedBean:
    x0, y0, w, h = region.bounding_box
    if x0 < 0 or y0 < 0 or w < 1 or h < 1 or x0 + w > img.width or y0 + h > img.height:
        raise RegionOutOfBounds(
            f"region {region.bounding_box} exceeds {img.width}x{img.height} image")
    return MaskedBean(RgbImage(img.pixels[y0:y0 + h, x0:x0 + w]), region.mask)


def whiten_unmasked(bean: MaskedBean, level: int = 255) -> RgbImage:
    """Paint non-bean pixels of a crop with a background colour, for export."""
    out = np.array(bean.image.pixels)
    out[~bean.mask] = level
    return RgbImage(out)

"""Per-channel grayscale distribution curves and the three feature schemes.

Scheme ``two-<c>`` is the (mean, std) pair of one channel, ``six`` stacks the
three means followed by the three stds, and ``hist768`` concatenates the
normalised red, green and blue value frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegion
from .imaging import Channel, MaskedBean

N_LEVELS = 256


@dataclass(frozen=True)
class FeatureScheme:
    kind: str  # "two" | "six" | "hist768"
    channel: Channel | None = None

    def __post_init__(self):
        if self.kind not in ("two", "six", "hist768"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if (self.kind == "two") != (self.channel is not None):
            raise ValueError("only the two-stat scheme carries a channel")

    @property
    def dimension(self) -> int:
        return {"two": 2, "six": 6, "hist768": 3 * N_LEVELS}[self.kind]

    @property
    def name(self) -> str:
        if self.kind == "two":
            return f"two-{self.channel.letter}"
        return self.kind

    def __str__(self):
        return self.name

    @classmethod
    def parse(cls, name: str) -> "FeatureScheme":
        name = name.strip().lower()
        if name.startswith("two-"):
            return cls("two", Channel.parse(name[4:]))
        if name in ("six", "hist768"):
            return cls(name)
        raise ValueError(f"unknown feature scheme {name!r}; "
                         "expected two-r|two-g|two-b|six|hist768")


SIX = FeatureScheme("six")
HIST768 = FeatureScheme("hist768")


def two(channel: Channel) -> FeatureScheme:
    return FeatureScheme("two", Channel(channel))


@dataclass(frozen=True, eq=False)
class ChannelHistogram:
    channel: Channel
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (N_LEVELS,) or (counts < 0).any():
            raise ValueError("histogram needs 256 non-negative counts")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        return self.counts / self.total


@dataclass(frozen=True)
class GaussianFit:
    mean: float
    std: float


@dataclass(frozen=True, eq=False)
class FeatureVector:
    scheme: FeatureScheme
    values: np.ndarray
    bean_id: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.scheme.dimension,):
            raise ValueError(f"scheme {self.scheme} needs {self.scheme.dimension} "
                             f"components, got {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("feature components must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)


def histogram(bean: MaskedBean, channel: Channel) -> ChannelHistogram:
    values = bean.masked_values(channel)
    if values.size == 0:
        raise EmptyRegion("bean has no masked pixels")
    return ChannelHistogram(Channel(channel), np.bincount(values, minlength=N_LEVELS))


def fit_gaussian_mle(h: ChannelHistogram) -> GaussianFit:
    """Mean and divide-by-n standard deviation of the histogram's pixel values."""
    total = h.total
    if total == 0:
        raise EmptyRegion("cannot fit an empty histogram")
    levels = np.arange(N_LEVELS, dtype=np.float64)
    mean = float(levels @ h.counts) / total
    var = float(h.counts @ (levels - mean) ** 2) / total
    return GaussianFit(mean, math.sqrt(var))


def extract_two(bean: MaskedBean, channel: Channel, bean_id: str = "") -> FeatureVector:
    fit = fit_gaussian_mle(histogram(bean, channel))
    return FeatureVector(two(channel), [fit.mean, fit.std], bean_id)


def extract_six(bean: MaskedBean, bean_id: str = "") -> FeatureVector:
    fits = [fit_gaussian_mle(histogram(bean, ch)) for ch in Channel]
    return FeatureVector(SIX, [f.mean for f in fits] + [f.std for f in fits], bean_id)


def extract_hist768(bean: MaskedBean, bean_id: str = "") -> FeatureVector:
    parts = [histogram(bean, ch).frequencies() for ch in Channel]
    return FeatureVector(HIST768, np.concatenate(parts), bean_id)


def extract(bean: MaskedBean, scheme: FeatureScheme, bean_id: str = "") -> FeatureVector:
    if scheme.kind == "two":
        return extract_two(bean, scheme.channel, bean_id)
    if scheme.kind == "six":
        return extract_six(bean, bean_id)
    return extract_hist768(bean, bean_id)


def histogram_distance(a: MaskedBean, b: MaskedBean) -> float:
    """Total-variation distance between two beans' value frequencies, averaged over channels.

    0 means identical distribution curves, 1 means disjoint support.
    """
    return float(np.mean([0.5 * np.abs(histogram(a, ch).frequencies()
                                       - histogram(b, ch).frequencies()).sum()
                          for ch in Channel]))

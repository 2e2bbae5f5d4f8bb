"""Seeded synthetic bean snapshots.

Qualified beans of a site draw every channel from one truncated normal, so
their distribution curves are unimodal and nearly identical. Defective beans
draw pixels from a per-bean mixture of 2-4 colour modes, giving polymodal
curves that differ from bean to bean.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .classifier import DEFECTIVE, QUALIFIED
from .errors import LayoutOverflow
from .imaging import DEFAULT_THRESHOLD, MaskedBean, RgbImage
from .seeding import derive_seed

Range = tuple[float, float]


@dataclass(frozen=True)
class SiteProfile:
    site_id: str
    channel_means: tuple[float, float, float]
    channel_stds: tuple[float, float, float]
    bean_axes: tuple[Range, Range] = ((20, 24), (15, 19))

    def __post_init__(self):
        if len(self.channel_means) != 3 or len(self.channel_stds) != 3:
            raise ValueError("site profiles need three channel means and stds")
        if not all(0 <= m <= 255 for m in self.channel_means):
            raise ValueError("channel means must lie in [0, 255]")
        if not all(s > 0 for s in self.channel_stds):
            raise ValueError("channel stds must be positive")
        if min(self.channel_means) > 140:
            raise ValueError("at least one channel mean must be <= 140 so beans "
                             "stand out from the white background")
        _check_axes(self.bean_axes)


@dataclass(frozen=True)
class DefectProfile:
    mode_count_range: tuple[int, int] = (2, 4)
    mode_mean_range: tuple[Range, Range, Range] = ((40, 190), (30, 165), (15, 120))
    mode_std_range: Range = (4, 14)
    per_bean_seed_mix: bool = True
    bean_axes: tuple[Range, Range] = ((20, 24), (15, 19))
    min_mode_separation: float = 70.0  # Euclidean RGB distance between mode centres

    def __post_init__(self):
        lo, hi = self.mode_count_range
        if lo < 2 or hi < lo:
            raise ValueError("defective beans need at least two colour modes")
        if len(self.mode_mean_range) != 3:
            raise ValueError("mode_mean_range needs one interval per channel")
        if not 0 < self.mode_std_range[0] <= self.mode_std_range[1]:
            raise ValueError("mode_std_range must be a positive interval")
        _check_axes(self.bean_axes)


def _check_axes(axes):
    (a_lo, a_hi), (b_lo, b_hi) = axes
    if not (0 < a_lo <= a_hi and 0 < b_lo <= b_hi and b_hi <= a_hi):
        raise ValueError(f"invalid bean axes {axes}")


@dataclass(frozen=True)
class Mode:
    means: tuple[float, float, float]
    stds: tuple[float, float, float]
    weight: float


@dataclass(frozen=True)
class SnapshotSpec:
    grid: tuple[int, int] = (8, 8)
    labels: tuple[str, ...] = ()
    bean_spacing: int = 4
    background_level: int = 250
    background_noise: int = 3
    seed: int = 0
    canvas: tuple[int, int] | None = None  # (width, height); None sizes it to fit

    def __post_init__(self):
        rows, cols = self.grid
        if rows < 1 or cols < 1:
            raise ValueError("grid needs at least one row and column")
        if len(self.labels) > rows * cols:
            raise LayoutOverflow(f"{len(self.labels)} beans do not fit a {rows}x{cols} grid")
        if self.bean_spacing < 2:
            raise ValueError("bean_spacing must be at least 2 pixels")
        if self.background_level - self.background_noise <= DEFAULT_THRESHOLD:
            raise ValueError("background_level - background_noise must exceed 163")
        if self.background_level + self.background_noise > 255:
            raise ValueError("background_level + background_noise must not exceed 255")


# --- rendering -------------------------------------------------------------

def ellipse_mask(semi_major: float, semi_minor: float, angle: float) -> np.ndarray:
    r = int(math.ceil(semi_major))
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
    c, s = math.cos(angle), math.sin(angle)
    u = (xx * c + yy * s) / semi_major
    v = (-xx * s + yy * c) / semi_minor
    mask = u * u + v * v <= 1.0
    ys, xs = np.nonzero(mask)
    return mask[ys.min():ys.max() + 1, xs.min():xs.max() + 1]


def _shape(axes, rng) -> np.ndarray:
    (a_lo, a_hi), (b_lo, b_hi) = axes
    a = rng.uniform(a_lo, a_hi)
    b = min(rng.uniform(b_lo, b_hi), a)
    return ellipse_mask(a, b, rng.uniform(0.0, math.pi))


def truncated_normal(rng, mean: float, std: float, size: int) -> np.ndarray:
    """Normal(mean, std) draws restricted to [0, 255] by resampling, then rounded."""
    out = rng.normal(mean, std, size)
    bad = (out < 0) | (out > 255)
    while bad.any():
        out[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = (out < 0) | (out > 255)
    return np.rint(out)


def _paint(mask: np.ndarray, values: np.ndarray, fill: int = 255) -> MaskedBean:
    pixels = np.full(mask.shape + (3,), fill, dtype=np.uint8)
    pixels[mask] = values.astype(np.uint8)
    return MaskedBean(RgbImage(pixels), mask)


def gen_qualified_bean(profile: SiteProfile, seed: int) -> MaskedBean:
    rng = np.random.default_rng(seed)
    mask = _shape(profile.bean_axes, rng)
    n = int(mask.sum())
    values = np.stack([truncated_normal(rng, m, s, n)
                       for m, s in zip(profile.channel_means, profile.channel_stds)], axis=1)
    return _paint(mask, values)


def draw_modes(profile: DefectProfile, rng) -> list[Mode]:
    lo, hi = profile.mode_count_range
    k = int(rng.integers(lo, hi + 1))
    weights = rng.dirichlet(np.full(k, 2.0))
    lows = np.array([a for a, _ in profile.mode_mean_range], dtype=np.float64)
    highs = np.array([b for _, b in profile.mode_mean_range], dtype=np.float64)
    centres: list[np.ndarray] = []
    while len(centres) < k:
        # bounded rejection keeps generation finite for cramped mean ranges
        for _ in range(100):
            cand = rng.uniform(lows, highs)
            if all(np.linalg.norm(cand - c) >= profile.min_mode_separation for c in centres):
                break
        centres.append(cand)
    modes = []
    for wgt, centre in zip(weights, centres):
        stds = tuple(float(rng.uniform(*profile.mode_std_range)) for _ in range(3))
        modes.append(Mode(tuple(float(m) for m in centre), stds, float(wgt)))
    return modes


def gen_defective_bean(profile: DefectProfile, seed: int, modes=None) -> MaskedBean:
    """Bean whose pixels come from a mixture of colour modes.

    ``modes`` overrides the per-bean random mixture drawn from ``profile``.
    """
    rng = np.random.default_rng(seed)
    mask = _shape(profile.bean_axes, rng)
    if modes is None:
        modes = draw_modes(profile, rng)
    n = int(mask.sum())
    weights = np.array([m.weight for m in modes], dtype=np.float64)
    which = rng.choice(len(modes), size=n, p=weights / weights.sum())
    values = np.empty((n, 3))
    for k, mode in enumerate(modes):
        sel = which == k
        cnt = int(sel.sum())
        for ch in range(3):
            values[sel, ch] = truncated_normal(rng, mode.means[ch], mode.stds[ch], cnt)
    return _paint(mask, values)


def gen_bean(label: str, site: SiteProfile, defect: DefectProfile, seed: int) -> MaskedBean:
    if label == QUALIFIED:
        return gen_qualified_bean(site, seed)
    if label == DEFECTIVE:
        return gen_defective_bean(defect, seed)
    raise ValueError(f"unknown bean label {label!r}")


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    bounding_box: tuple[int, int, int, int]  # x0, y0, width, height
    label: str
    site: str
    region_index: int = -1  # position in (y0, x0) scan order


def _cell_size(site: SiteProfile, defect: DefectProfile) -> int:
    a_max = max(site.bean_axes[0][1], defect.bean_axes[0][1])
    return 2 * int(math.ceil(a_max)) + 1


def gen_snapshot(spec: SnapshotSpec, site: SiteProfile, defect: DefectProfile):
    """Render beans on a noisy white board; returns (image, records in scan order)."""
    rows, cols = spec.grid
    cell = _cell_size(site, defect)
    pitch = cell + spec.bean_spacing
    width = cols * pitch + spec.bean_spacing
    height = rows * pitch + spec.bean_spacing
    if spec.canvas is not None:
        if spec.canvas[0] < width or spec.canvas[1] < height:
            raise LayoutOverflow(f"{rows}x{cols} grid needs a {width}x{height} canvas, "
                                 f"got {spec.canvas[0]}x{spec.canvas[1]}")
        width, height = spec.canvas
    rng = np.random.default_rng(derive_seed(spec.seed, 0))
    noise = rng.integers(-spec.background_noise, spec.background_noise + 1,
                         size=(height, width, 3))
    canvas = (spec.background_level + noise).astype(np.uint8)
    records = []
    for slot, label in enumerate(spec.labels):
        bean = gen_bean(label, site, defect, derive_seed(spec.seed, 1, slot))
        h, w = bean.mask.shape
        r, c = divmod(slot, cols)
        x0 = spec.bean_spacing + c * pitch + (cell - w) // 2
        y0 = spec.bean_spacing + r * pitch + (cell - h) // 2
        patch = canvas[y0:y0 + h, x0:x0 + w]
        patch[bean.mask] = bean.image.pixels[bean.mask]
        records.append(SlotRecord(slot, (x0, y0, w, h), label, site.site_id))
    ordered = sorted(records, key=lambda rec: (rec.bounding_box[1], rec.bounding_box[0]))
    records = [SlotRecord(rec.slot, rec.bounding_box, rec.label, rec.site, k)
               for k, rec in enumerate(ordered)]
    return RgbImage(canvas), records


# --- datasets --------------------------------------------------------------

@dataclass
class Snapshot:
    file: str
    image: RgbImage
    records: list[SlotRecord] = field(default_factory=list)


def render_dataset(sites, defect: DefectProfile, counts, seed: int,
                   grid: tuple[int, int] = (8, 8)) -> list[Snapshot]:
    """In-memory dataset: ``counts`` maps site_id to (n_qualified, n_defective)."""
    rows, cols = grid
    per_snap = rows * cols
    snapshots = []
    for si, site in enumerate(sites):
        n_q, n_d = counts[site.site_id]
        if n_q < 0 or n_d < 0 or n_q + n_d < 1:
            raise ValueError(f"site {site.site_id} needs at least one bean")
        labels = np.array([QUALIFIED] * n_q + [DEFECTIVE] * n_d, dtype=object)
        labels = labels[np.random.default_rng(derive_seed(seed, si)).permutation(len(labels))]
        for k in range(0, len(labels), per_snap):
            chunk = tuple(labels[k:k + per_snap])
            spec = SnapshotSpec(grid, chunk, seed=derive_seed(seed, si, k // per_snap + 1))
            image, records = gen_snapshot(spec, site, defect)
            name = f"{site.site_id}_snap{k // per_snap:03d}.ppm"
            snapshots.append(Snapshot(name, image, records))
    return snapshots


def gen_dataset(sites, defect: DefectProfile, counts, seed: int, out_dir,
                grid: tuple[int, int] = (8, 8)) -> list:
    """Write snapshots and ``manifest.csv`` into ``out_dir``; returns manifest records."""
    from .imaging import save_ppm
    from .store import ManifestRecord, write_manifest

    os.makedirs(out_dir, exist_ok=True)
    manifest = []
    for snap in render_dataset(sites, defect, counts, seed, grid):
        save_ppm(snap.image, os.path.join(out_dir, snap.file))
        for rec in snap.records:
            x0, y0, w, h = rec.bounding_box
            manifest.append(ManifestRecord(snap.file, rec.region_index, x0, y0, w, h,
                                           rec.site, rec.label))
    write_manifest(manifest, os.path.join(out_dir, "manifest.csv"))
    return manifest

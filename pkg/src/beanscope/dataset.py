"""Bind segmented beans to their ground-truth labels and turn them into samples."""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import BeanscopeError
from .features import FeatureScheme, extract
from .imaging import (MaskedBean, RgbImage, SegmentationConfig, crop_bean, find_bean_regions,
                      load_image)
from .store import FeatureRecord, ManifestRecord


@dataclass(frozen=True)
class LabeledBean:
    bean_id: str
    bean: MaskedBean
    label: str
    site: str


def bean_id(image_id: str, index: int) -> str:
    return f"{image_id}_bean{index}"


def _overlaps(a, b) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


def label_regions(image: RgbImage, records, image_id: str,
                  cfg: SegmentationConfig = SegmentationConfig()) -> list[LabeledBean]:
    """Segment ``image`` and attach each region to the one manifest box it overlaps."""
    regions = find_bean_regions(image, cfg, image_id)
    if len(regions) != len(records):
        raise BeanscopeError(f"{image_id}: segmentation found {len(regions)} beans, "
                             f"manifest lists {len(records)}")
    out = []
    for k, region in enumerate(regions):
        hits = [r for r in records if _overlaps(region.bounding_box, r.bounding_box)]
        if len(hits) != 1:
            raise BeanscopeError(f"{image_id}: region {k} at {region.bounding_box} overlaps "
                                 f"{len(hits)} manifest boxes")
        out.append(LabeledBean(bean_id(image_id, k), crop_bean(image, region),
                               hits[0].label, hits[0].site))
    return out


def load_labeled_beans(manifest: list[ManifestRecord], root,
                       cfg: SegmentationConfig = SegmentationConfig()) -> list[LabeledBean]:
    by_file: dict[str, list[ManifestRecord]] = {}
    for rec in manifest:
        by_file.setdefault(rec.file, []).append(rec)
    beans = []
    for name in sorted(by_file):
        image = load_image(os.path.join(root, name))
        beans += label_regions(image, by_file[name], os.path.splitext(name)[0], cfg)
    return beans


def snapshot_beans(snapshots, cfg: SegmentationConfig = SegmentationConfig()):
    """Labelled beans straight from in-memory synthetic snapshots."""
    beans = []
    for snap in snapshots:
        beans += label_regions(snap.image, snap.records, os.path.splitext(snap.file)[0], cfg)
    return beans


def feature_records(beans, scheme: FeatureScheme) -> list[FeatureRecord]:
    return [FeatureRecord(extract(b.bean, scheme, b.bean_id), b.label, b.site) for b in beans]


def samples(records, by: str = "label"):
    return [r.sample(by) for r in records]

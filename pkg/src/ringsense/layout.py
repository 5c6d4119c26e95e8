"""Geometric model of the fiducial layout on the sensing plate.

The default layout carries 35 tags of 2 mm edge length with a 0.2 mm white
border: a 3x3 central grid (2.6 mm pitch) surrounded by a ring of 26 tags.
The ring is realized as two interleaved circles at ``ring_radius +- ring_spread``
(13 tags each, radially aligned yaw) so that every footprint clears the
non-overlap bound while all corners stay inside a 22 mm diameter disc.

Corners are enumerated counter-clockwise starting at the bottom-left of the
tag's local frame, matching common fiducial-detector conventions. All tags
are coplanar at z = 0 in the plate reference frame. Tag ids are opaque
integers; rendering and payload decoding are out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LayoutOverlap, TooFewTagsVisible, UnknownTagId, ValidationFailure

# Local corner order: counter-clockwise from bottom-left, unit half-size.
_CORNER_SIGNS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class TagPlacement:
    """One tag: id, center in the plate plane (mm), in-plane yaw (rad)."""

    tag_id: int
    center: tuple[float, float]
    yaw: float


@dataclass(frozen=True)
class TagLayout:
    """A set of coplanar tags with shared edge length and border width."""

    tags: tuple[TagPlacement, ...]
    tag_size: float = 2.0
    border: float = 0.2

    def __post_init__(self) -> None:
        if self.tag_size <= 0 or self.border < 0:
            raise ValidationFailure("tag_size must be positive and border non-negative")
        ids = [t.tag_id for t in self.tags]
        if len(ids) != len(set(ids)):
            raise ValidationFailure("tag ids must be unique within a layout")
        self._check_overlap()

    def _check_overlap(self) -> None:
        # Non-overlap bound: footprint squares of side tag_size + 2*border
        # cannot overlap if centers are farther apart than that side.
        bound = self.footprint
        centers = np.array([t.center for t in self.tags])
        for i in range(len(self.tags)):
            d = np.linalg.norm(centers[i + 1 :] - centers[i], axis=1)
            if d.size and np.min(d) <= bound:
                j = i + 1 + int(np.argmin(d))
                raise LayoutOverlap(
                    f"tags {self.tags[i].tag_id} and {self.tags[j].tag_id} are "
                    f"{np.min(d):.4f} mm apart, within the {bound:.4f} mm footprint bound"
                )

    @property
    def footprint(self) -> float:
        return self.tag_size + 2.0 * self.border

    @property
    def tag_ids(self) -> tuple[int, ...]:
        return tuple(t.tag_id for t in self.tags)

    def __len__(self) -> int:
        return len(self.tags)

    def to_dict(self) -> dict:
        return {
            "tag_size_mm": self.tag_size,
            "border_mm": self.border,
            "tags": [
                {"id": t.tag_id, "center_mm": [t.center[0], t.center[1]], "yaw_rad": t.yaw}
                for t in self.tags
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TagLayout":
        tags = tuple(
            TagPlacement(
                tag_id=int(t["id"]),
                center=(float(t["center_mm"][0]), float(t["center_mm"][1])),
                yaw=float(t["yaw_rad"]),
            )
            for t in data["tags"]
        )
        return cls(tags=tags, tag_size=float(data["tag_size_mm"]), border=float(data["border_mm"]))


def default_layout(
    tag_size: float = 2.0,
    border: float = 0.2,
    grid_pitch: float = 2.6,
    ring_radius: float = 8.0,
    ring_spread: float = 1.0,
    ring_count: int = 26,
) -> TagLayout:
    """Deterministic 35-tag layout: 3x3 grid plus a 26-tag surrounding ring.

    Ring tags sit on two interleaved circles at ``ring_radius +- ring_spread``
    with radially aligned yaw. Raises :class:`LayoutOverlap` if the requested
    parameters crowd any pair of footprints.
    """
    tags: list[TagPlacement] = []
    tag_id = 0
    for gy in (-grid_pitch, 0.0, grid_pitch):
        for gx in (-grid_pitch, 0.0, grid_pitch):
            tags.append(TagPlacement(tag_id, (gx, gy), 0.0))
            tag_id += 1
    inner_count = ring_count // 2
    outer_count = ring_count - inner_count
    for k in range(inner_count):
        angle = 2.0 * math.pi * k / inner_count
        r = ring_radius - ring_spread
        tags.append(TagPlacement(tag_id, (r * math.cos(angle), r * math.sin(angle)), angle))
        tag_id += 1
    for k in range(outer_count):
        angle = 2.0 * math.pi * k / outer_count + math.pi / outer_count
        r = ring_radius + ring_spread
        tags.append(TagPlacement(tag_id, (r * math.cos(angle), r * math.sin(angle)), angle))
        tag_id += 1
    return TagLayout(tags=tuple(tags), tag_size=tag_size, border=border)


def corners_ref(layout: TagLayout, tag_id: int) -> np.ndarray:
    """Four plate-frame corners (mm) of one tag, shape (4, 3), z = 0.

    Counter-clockwise starting at the bottom-left corner of the tag's
    local frame, rotated by yaw and translated to the tag center.
    """
    for tag in layout.tags:
        if tag.tag_id == tag_id:
            break
    else:
        raise UnknownTagId(f"tag id {tag_id} not in layout")
    half = layout.tag_size / 2.0
    c, s = math.cos(tag.yaw), math.sin(tag.yaw)
    rot = np.array([[c, -s], [s, c]])
    xy = _CORNER_SIGNS * half @ rot.T + np.array(tag.center)
    corners = np.zeros((4, 3))
    corners[:, :2] = xy
    return corners


def all_corners(layout: TagLayout) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Corner table for the whole layout.

    Returns (tag_ids, corner_indices, points) with shapes (4n,), (4n,), (4n, 3),
    ordered by tag then corner index.
    """
    ids = np.repeat([t.tag_id for t in layout.tags], 4)
    idx = np.tile(np.arange(4), len(layout.tags))
    pts = np.concatenate([corners_ref(layout, t.tag_id) for t in layout.tags], axis=0)
    return ids, idx, pts


def visible_subset(layout: TagLayout, occlusion_mask: set[int]) -> TagLayout:
    """Layout with masked tags removed.

    Raises:
        TooFewTagsVisible: if fewer than 2 tags remain (the multi-tag
        solve minimum; single-tag operation is a documented degraded mode
        of the pose estimator, not of layouts).
    """
    remaining = tuple(t for t in layout.tags if t.tag_id not in occlusion_mask)
    if len(remaining) < 2:
        raise TooFewTagsVisible(
            f"only {len(remaining)} tag(s) remain after masking; at least 2 required"
        )
    return TagLayout(tags=remaining, tag_size=layout.tag_size, border=layout.border)

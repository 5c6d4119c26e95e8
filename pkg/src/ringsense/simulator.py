"""Compliant-ring ground-truth oracle.

Models the ring as a linear 6-D compliance: an applied wrench maps to a
plate deformation through ``delta_L = C @ F`` (plus an optional cubic
softening term, off by default). Frames are synthesized by deforming the
reference pose, projecting all visible tag corners, and perturbing them
with i.i.d. Gaussian pixel noise; whole tags drop out with a configurable
occlusion probability.

The default compliance is diagonal and reverse-engineered so that the
reference minimum-detectable-pose floor maps exactly onto the reference
minimum-detectable-wrench vector, which turns the sensitivity analysis
into an end-to-end closed-loop check. It is synthetic, not a measured
property of any physical ring.

Determinism: every frame derives its RNG from (seed, stream index) by
stable hashing, so identical inputs yield bit-identical datasets and
parallel generation with per-task simulators is safe.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CornerOutOfImage,
    DeformationLimitExceeded,
    ValidationFailure,
)
from .geometry import (
    DeformationVector,
    PinholeCamera,
    RigidTransform,
    apply_delta,
    project_points,
)
from .layout import TagLayout, corners_ref, visible_subset
from .pnp import Correspondence, CorrespondenceSet

WRENCH_AXES = ("fx", "fy", "fz", "tx", "ty", "tz")

# Reference sensitivity floor (mm, rad) and wrench floor (mN, mN*m) that the
# default compliance is constructed from: C_ii = floor_pose_i / floor_wrench_i.
_POSE_FLOOR = (0.0135, 0.0135, 0.0135, 0.0136, 0.0136, 0.0136)
_WRENCH_FLOOR = (4.30, 4.22, 9.93, 0.32, 0.13, 8.55)


@dataclass(frozen=True)
class Wrench:
    """Forces in mN and torques in mN*m (identically N*mm)."""

    fx: float
    fy: float
    fz: float
    tx: float
    ty: float
    tz: float

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.as_array())):
            raise ValidationFailure("wrench components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.fz, self.tx, self.ty, self.tz])

    @classmethod
    def from_array(cls, values) -> "Wrench":
        v = np.asarray(values, dtype=np.float64)
        if v.shape != (6,):
            raise ValidationFailure(f"wrench must have 6 components, got {v.shape}")
        return cls(*(float(x) for x in v))

    @classmethod
    def single_axis(cls, axis: int, magnitude: float) -> "Wrench":
        if not 0 <= axis <= 5:
            raise ValidationFailure(f"axis must be 0..5, got {axis}")
        v = np.zeros(6)
        v[axis] = magnitude
        return cls.from_array(v)


@dataclass(frozen=True)
class ComplianceModel:
    """Linear map from wrench to deformation, with per-component limits.

    ``compliance`` rows are deformation components (mm then rad), columns
    wrench components (mN then mN*m). ``cubic_softening`` adds an
    elementwise ``s * L**3`` term to the linear deformation ``L`` (default
    off; when off the model is exactly linear and superposable).
    """

    compliance: np.ndarray
    deformation_limit: np.ndarray
    cubic_softening: float = 0.0

    def __post_init__(self) -> None:
        c = np.asarray(self.compliance, dtype=np.float64)
        lim = np.asarray(self.deformation_limit, dtype=np.float64)
        if c.shape != (6, 6):
            raise ValidationFailure(f"compliance must be 6x6, got {c.shape}")
        if lim.shape != (6,) or np.any(lim <= 0):
            raise ValidationFailure("deformation_limit must be 6 positive components")
        if np.max(np.abs(c - c.T)) >= 1e-9:
            raise ValidationFailure("compliance must be symmetric within 1e-9")
        if np.min(np.linalg.eigvalsh((c + c.T) / 2.0)) <= 0:
            raise ValidationFailure("compliance must be positive definite")
        if self.cubic_softening < 0:
            raise ValidationFailure("cubic_softening must be non-negative")
        c = c.copy()
        lim = lim.copy()
        c.setflags(write=False)
        lim.setflags(write=False)
        object.__setattr__(self, "compliance", c)
        object.__setattr__(self, "deformation_limit", lim)


def default_compliance(cubic_softening: float = 0.0) -> ComplianceModel:
    """Diagonal compliance matched to the reference sensitivity vectors.

    Limits default to 1.0 mm per translation and 0.15 rad per rotation.
    """
    diag = np.array([p / w for p, w in zip(_POSE_FLOOR, _WRENCH_FLOOR)])
    return ComplianceModel(
        compliance=np.diag(diag),
        deformation_limit=np.array([1.0, 1.0, 1.0, 0.15, 0.15, 0.15]),
        cubic_softening=cubic_softening,
    )


@dataclass(frozen=True)
class NoiseModel:
    """Observation noise: corner jitter in px, per-tag dropout, RNG seed.

    Noise lives purely in image space; ground-truth poses are exact.
    """

    corner_sigma: float = 0.25
    occlusion_probability: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.corner_sigma < 0:
            raise ValidationFailure("corner_sigma must be non-negative")
        if not 0.0 <= self.occlusion_probability < 1.0:
            raise ValidationFailure("occlusion_probability must be in [0, 1)")


def derive_seed(seed: int, index: int | str) -> int:
    """Stable child seed for stream ``index`` (hash-based, order-free)."""
    digest = hashlib.sha256(f"{seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def deform(model: ComplianceModel, wrench: Wrench) -> DeformationVector:
    """Deformation produced by ``wrench``; linear unless softening is set.

    Raises:
        DeformationLimitExceeded: if any component exceeds its limit.
    """
    linear = model.compliance @ wrench.as_array()
    delta = linear + model.cubic_softening * linear**3
    if np.any(np.abs(delta) > model.deformation_limit):
        worst = int(np.argmax(np.abs(delta) - model.deformation_limit))
        raise DeformationLimitExceeded(
            f"component {worst} deformation {delta[worst]:.4f} exceeds limit "
            f"{model.deformation_limit[worst]:.4f}"
        )
    return DeformationVector.from_array(delta)


def default_reference_pose(standoff_mm: float = 10.0) -> RigidTransform:
    """No-contact plate pose: axis-aligned, ``standoff_mm`` in front of the camera."""
    return RigidTransform(np.eye(3), np.array([0.0, 0.0, standoff_mm]))


def project_layout(
    camera: PinholeCamera, layout: TagLayout, pose: RigidTransform
) -> CorrespondenceSet:
    """Exact projection of every corner of ``layout`` under ``pose``.

    No noise, no occlusion, no bounds check; building block for the
    synthesizer and for closed-form test oracles.
    """
    entries = []
    for tag in layout.tags:
        corners = corners_ref(layout, tag.tag_id)
        cams = pose.apply(corners)
        if np.any(cams[:, 2] <= 0):
            raise CornerOutOfImage(f"tag {tag.tag_id} has corners behind the camera")
        uv = project_points(camera, cams)
        for k in range(4):
            entries.append(
                Correspondence(
                    tag_id=tag.tag_id,
                    corner_index=k,
                    point_ref=tuple(float(x) for x in corners[k]),
                    point_img=(float(uv[k, 0]), float(uv[k, 1])),
                )
            )
    return CorrespondenceSet(entries=tuple(entries))


def synthesize_frame(
    camera: PinholeCamera,
    layout: TagLayout,
    reference_pose: RigidTransform,
    wrench: Wrench,
    compliance: ComplianceModel,
    noise: NoiseModel,
) -> tuple[CorrespondenceSet, RigidTransform]:
    """One observed frame plus its ground-truth pose.

    Occlusion is drawn first (whole tags), then corner noise for the
    surviving corners, so the failure mode with too few tags is decided
    before any noise is consumed.

    Raises:
        DeformationLimitExceeded, TooFewTagsVisible, CornerOutOfImage.
    """
    rng = np.random.default_rng(noise.seed)
    ground_truth = apply_delta(reference_pose, deform(compliance, wrench))

    visible = layout
    if noise.occlusion_probability > 0:
        drop = rng.random(len(layout)) < noise.occlusion_probability
        mask = {t.tag_id for t, d in zip(layout.tags, drop) if d}
        visible = visible_subset(layout, mask)

    exact = project_layout(camera, layout=visible, pose=ground_truth)
    img = exact.img_points()
    if noise.corner_sigma > 0:
        img = img + rng.normal(0.0, noise.corner_sigma, size=img.shape)
    entries = []
    for e, uv in zip(exact.entries, img):
        if not camera.contains(uv):
            raise CornerOutOfImage(
                f"tag {e.tag_id} corner {e.corner_index} at ({uv[0]:.1f}, {uv[1]:.1f}) "
                f"is outside the {camera.image_width:.0f}x{camera.image_height:.0f} image"
            )
        entries.append(replace(e, point_img=(float(uv[0]), float(uv[1]))))
    return CorrespondenceSet(entries=tuple(entries)), ground_truth


@dataclass(frozen=True)
class SweepSample:
    """One sweep row: applied wrench, true deformation, observed corners."""

    axis: int
    magnitude: float
    wrench: Wrench
    deformation: DeformationVector
    correspondences: CorrespondenceSet


def axis_magnitudes(
    compliance: ComplianceModel, axis: int, count: int, span_fraction: float = 0.8
) -> np.ndarray:
    """Symmetric magnitude grid filling ``span_fraction`` of the linear range."""
    if not 0 < span_fraction <= 1:
        raise ValidationFailure("span_fraction must be in (0, 1]")
    col = np.abs(compliance.compliance[:, axis])
    active = col > 0
    limit = np.min(compliance.deformation_limit[active] / col[active])
    return np.linspace(-span_fraction * limit, span_fraction * limit, count)


def sweep_dataset(
    axis: int,
    magnitudes,
    camera: PinholeCamera,
    layout: TagLayout,
    reference_pose: RigidTransform,
    compliance: ComplianceModel,
    noise: NoiseModel,
    stream_offset: int = 0,
) -> list[SweepSample]:
    """Single-axis sweep: one synthesized frame per magnitude, input order.

    Per-frame seeds derive from (noise.seed, stream_offset + index), so
    repeated magnitudes share ground truth but draw distinct noise.
    """
    samples = []
    for i, magnitude in enumerate(magnitudes):
        wrench = Wrench.single_axis(axis, float(magnitude))
        frame_noise = replace(noise, seed=derive_seed(noise.seed, stream_offset + i))
        corrs, _ = synthesize_frame(
            camera, layout, reference_pose, wrench, compliance, frame_noise
        )
        samples.append(
            SweepSample(
                axis=axis,
                magnitude=float(magnitude),
                wrench=wrench,
                deformation=deform(compliance, wrench),
                correspondences=corrs,
            )
        )
    return samples

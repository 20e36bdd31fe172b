"""Synthetic phantoms and noisy predictor stand-ins for end-to-end testing.

A phantom is a set of nested ellipsoids (WT ⊃ TC ⊃ ET) rendered into a label
map plus a matching intensity volume, all deterministic per seed so fixtures
and golden files stay stable. ``corrupt_labels`` and ``noisy_probmap``
simulate imperfect raters and soft model outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RadiiDontFit
from .volume import BRATS_LABELS, LabelMap, ProbMap, Volume

__all__ = ["PhantomSpec", "make_phantom", "corrupt_labels", "noisy_probmap"]

# label value -> channel index, and per channel the three other labels.
_LABEL_TO_INDEX = np.zeros(5, dtype=np.int64)
for _i, _lbl in enumerate(BRATS_LABELS):
    _LABEL_TO_INDEX[_lbl] = _i
_OTHER_LABELS = np.array(
    [[l for l in BRATS_LABELS if l != lbl] for lbl in BRATS_LABELS], dtype=np.uint8
)


@dataclass(frozen=True)
class PhantomSpec:
    """Nested-ellipsoid phantom layout; radii are in voxels, WT > TC > ET."""

    shape: tuple[int, int, int] = (48, 48, 48)
    seed: int = 0
    wt_radii: tuple[float, float, float] = (16.0, 14.0, 15.0)
    tc_radii: tuple[float, float, float] = (10.0, 9.0, 9.0)
    et_radii: tuple[float, float, float] = (5.0, 5.0, 4.0)
    center_jitter_frac: float = 0.02
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for outer, inner in ((self.wt_radii, self.tc_radii), (self.tc_radii, self.et_radii)):
            if not all(o > i for o, i in zip(outer, inner)):
                raise ValueError("radii must strictly decrease WT > TC > ET")
        if not all(r > 0 for r in self.et_radii):
            raise ValueError("radii must be positive")
        if not 0.0 <= self.center_jitter_frac < 0.5:
            raise ValueError("center_jitter_frac must lie in [0, 0.5)")


def _ellipsoid(shape, center, radii) -> np.ndarray:
    grids = np.meshgrid(*(np.arange(n, dtype=np.float64) for n in shape), indexing="ij")
    acc = np.zeros(shape, dtype=np.float64)
    for g, c, r in zip(grids, center, radii):
        acc += ((g - c) / r) ** 2
    return acc <= 1.0


def make_phantom(spec: PhantomSpec) -> tuple[LabelMap, Volume]:
    """Render ground-truth labels and a matching intensity volume.

    Labels: 2 on WT∖TC (edema), 1 on TC∖ET (necrosis), 4 on ET. Intensity is
    a label-dependent base plus seeded Gaussian noise, nonzero over a "brain"
    ellipsoid slightly larger than WT, zero outside (skull-stripped look).
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    shape = spec.shape
    base_center = tuple((n - 1) / 2.0 for n in shape)
    jitter = rng.uniform(-spec.center_jitter_frac, spec.center_jitter_frac, size=3)
    center = tuple(c + j * n for c, j, n in zip(base_center, jitter, shape))
    for c, r, n in zip(center, spec.wt_radii, shape):
        if c - r < 0 or c + r > n - 1:
            raise RadiiDontFit(
                f"WT ellipsoid (center {center}, radii {spec.wt_radii}) "
                f"exceeds volume shape {shape}"
            )
    wt = _ellipsoid(shape, center, spec.wt_radii)
    tc = _ellipsoid(shape, center, spec.tc_radii)
    et = _ellipsoid(shape, center, spec.et_radii)
    labels = np.zeros(shape, dtype=np.uint8)
    labels[wt] = 2
    labels[tc] = 1
    labels[et] = 4
    gt = LabelMap(labels, spec.spacing)

    # Brain tissue extends beyond the tumor but is clipped to the volume.
    brain_radii = tuple(
        min(1.5 * r, max(c, n - 1 - c)) for r, c, n in zip(spec.wt_radii, center, shape)
    )
    brain = _ellipsoid(shape, center, brain_radii) | wt
    base = np.zeros(shape, dtype=np.float64)
    base[brain] = 1.0
    base[labels == 2] = 1.4
    base[labels == 1] = 1.8
    base[labels == 4] = 2.2
    noise = rng.normal(0.0, 0.05, size=shape)
    intensity = np.where(brain, base + noise, 0.0)
    return gt, Volume(intensity, spec.spacing)


def corrupt_labels(gt: LabelMap, rate: float, seed: int) -> LabelMap:
    """Resample each voxel to a uniformly random *different* label with
    probability ``rate``; deterministic per seed."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    flip = rng.random(gt.shape) < rate
    pick = rng.integers(0, 3, size=gt.shape)
    idx = _LABEL_TO_INDEX[gt.data]
    replacement = _OTHER_LABELS[idx, pick]
    data = np.where(flip, replacement, gt.data).astype(np.uint8)
    return LabelMap(data, gt.spacing, gt.origin)


def noisy_probmap(gt: LabelMap, temperature: float, seed: int) -> ProbMap:
    """One-hot ground truth blended with seeded uniform noise, renormalized.

    As temperature goes to 0 the map approaches one-hot; for temperature
    below 1 the argmax always stays equal to the ground-truth label.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2]))
    onehot = np.stack([(gt.data == lbl).astype(np.float64) for lbl in BRATS_LABELS])
    noise = rng.random(onehot.shape)
    p = onehot + temperature * noise
    p /= p.sum(axis=0, keepdims=True)
    return ProbMap(np.clip(p, 0.0, 1.0), gt.spacing, gt.origin)

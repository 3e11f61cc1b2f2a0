"""Cloud fusion, stochastic input discard, and density reporting.

``fuse`` concatenates the real scan with its cleaned pseudo counterpart
without touching any per-point field.  ``stvd_discard`` is the stochastic
baseline it is compared against: each point is kept with probability
1 - rate, decided by a counter-based generator so the decision for point i
depends only on (seed, i), never on iteration order.  ``discard_sweep``
reuses one seed across rates, which makes kept counts exactly
non-increasing along the sweep.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, InvariantError
from .kitti_io import LabeledPointCloud


class FusionResult:
    """Fused cloud plus the real/pseudo bookkeeping derived from it."""

    def __init__(self, cloud: LabeledPointCloud):
        self.cloud = cloud
        self.pseudo_count = cloud.pseudo_count
        self.real_count = cloud.real_count

    @property
    def total(self) -> int:
        return self.real_count + self.pseudo_count

    def as_dict(self) -> dict:
        return {"real": self.real_count, "pseudo": self.pseudo_count,
                "total": self.total}

    def __repr__(self) -> str:
        return (f"FusionResult(real={self.real_count}, "
                f"pseudo={self.pseudo_count})")


def fuse(real: LabeledPointCloud, pseudo: LabeledPointCloud) -> FusionResult:
    """Concatenate real points followed by pseudo points, fields untouched."""
    if real.label_names != pseudo.label_names:
        raise ContractError(
            "label maps differ between real and pseudo clouds: "
            f"{sorted(real.label_names.items())} vs {sorted(pseudo.label_names.items())}"
        )
    cloud = LabeledPointCloud(
        np.concatenate([real.xyz, pseudo.xyz]),
        np.concatenate([real.intensity, pseudo.intensity]),
        np.concatenate([real.class_id, pseudo.class_id]),
        np.concatenate([real.pseudo, pseudo.pseudo]),
        real.label_names,
    )
    return FusionResult(cloud)


class DiscardSpec:
    """Stochastic discard parameters: drop probability and generator seed."""

    def __init__(self, rate: float, seed: int):
        rate = float(rate)
        if not (0.0 <= rate <= 1.0):
            raise InvariantError(f"DiscardSpec: rate must be in [0, 1], got {rate}")
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise InvariantError(f"DiscardSpec: seed must be unsigned 64-bit, got {seed}")
        self.rate = rate
        self.seed = seed

    def __repr__(self) -> str:
        return f"DiscardSpec(rate={self.rate}, seed={self.seed})"


def _keep_mask(n: int, spec: DiscardSpec) -> np.ndarray:
    # counter-based generator: draw i is a pure function of (seed, i)
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    return rng.random(n) >= spec.rate


def stvd_discard(cloud: LabeledPointCloud, spec: DiscardSpec) -> LabeledPointCloud:
    """Drop each point independently with probability ``spec.rate``.

    Deterministic: the same (cloud, spec) always yields the same
    subsequence.  rate 0 returns the input unchanged; rate 1 empties it.
    """
    keep = _keep_mask(len(cloud), spec)
    return LabeledPointCloud(cloud.xyz[keep], cloud.intensity[keep],
                             cloud.class_id[keep], cloud.pseudo[keep],
                             cloud.label_names)


def discard_sweep(cloud: LabeledPointCloud, rates, seed: int) -> list[dict]:
    """One row per rate: kept count and fraction under a shared seed."""
    rows = []
    n = len(cloud)
    for rate in rates:
        spec = DiscardSpec(rate, seed)
        kept = int(_keep_mask(n, spec).sum())
        rows.append({
            "rate": float(rate),
            "kept_count": kept,
            "kept_fraction": kept / n if n else 0.0,
        })
    return rows


def _class_histogram(cloud: LabeledPointCloud) -> dict:
    ids, counts = np.unique(cloud.class_id, return_counts=True)
    return {cloud.label_names.get(int(i), str(int(i))): int(c)
            for i, c in zip(ids, counts)}


class DensityReport:
    """Point counts before/after a density-changing stage."""

    def __init__(self, before: LabeledPointCloud, after: LabeledPointCloud):
        self.points_before = len(before)
        self.points_after = len(after)
        self.class_counts_before = _class_histogram(before)
        self.class_counts_after = _class_histogram(after)

    @property
    def reduction_fraction(self) -> float:
        if self.points_before == 0:
            return 0.0
        return 1.0 - self.points_after / self.points_before

    def as_dict(self) -> dict:
        return {
            "points_before": self.points_before,
            "points_after": self.points_after,
            "reduction_fraction": self.reduction_fraction,
            "class_counts_before": self.class_counts_before,
            "class_counts_after": self.class_counts_after,
        }

    def __repr__(self) -> str:
        return (f"DensityReport({self.points_before} -> {self.points_after}, "
                f"reduction={self.reduction_fraction:.3f})")


def density_report(before: LabeledPointCloud, after: LabeledPointCloud) -> DensityReport:
    """Measure how much a stage thinned the cloud, with per-class detail."""
    return DensityReport(before, after)

"""Ensemble combination: softmax averaging, majority vote, and STAPLE.

STAPLE treats each input mask as a rater with unknown sensitivity p and
specificity q, and alternates:

* E-step (log-space, so products over up to 64 raters cannot underflow to
  0/0): ``a_i = prior * prod_j p_j^D_ij (1-p_j)^(1-D_ij)``,
  ``b_i = (1-prior) * prod_j (1-q_j)^D_ij q_j^(1-D_ij)``,
  ``W_i = a_i / (a_i + b_i)``.
* M-step: ``p_j = sum_i W_i D_ij / sum_i W_i``,
  ``q_j = sum_i (1-W_i)(1-D_ij) / sum_i (1-W_i)``, with p and q clamped into
  [1e-7, 1 - 1e-7] to avoid absorbing states.

Iteration stops when the posterior changes by less than ``tol`` in max-norm
or after ``max_iters`` update cycles. The returned parameters are the
(clamped) M-step of the returned posterior, so they satisfy the fixed-point
identities exactly. Multi-label fusion runs binary STAPLE per nested region
and recomposes the label map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyList, GeometryMismatch
from .regions import Region, RegionMask, recompose_labels, region_mask
from .volume import LabelMap, ProbMap, require_same_geometry

__all__ = [
    "StapleParams",
    "StapleResult",
    "average_probs",
    "argmax_labels",
    "majority_vote",
    "staple_binary",
    "staple_multilabel",
    "staple_multilabel_detailed",
    "default_staple_params",
]

PARAM_CLAMP = 1e-7
DEFAULT_INIT_PQ = 0.99999
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 100


def average_probs(maps: list[ProbMap]) -> ProbMap:
    """Voxelwise, channelwise arithmetic mean of probability maps."""
    if not maps:
        raise EmptyList("average_probs needs at least one probability map")
    require_same_geometry(*maps)
    acc = np.zeros(maps[0].data.shape, dtype=np.float64)
    for m in maps:  # fixed input order: deterministic, reproducible sums
        acc += m.data
    acc /= len(maps)
    return ProbMap(np.clip(acc, 0.0, 1.0), maps[0].spacing, maps[0].origin)


def argmax_labels(p: ProbMap) -> LabelMap:
    """Most probable class per voxel; ties break toward the later channel.

    Channel order is (0, 1, 2, 4), so a tie prefers tumor over background.
    """
    rev = p.data[::-1]
    idx = len(p.channels) - 1 - np.argmax(rev, axis=0)
    labels = np.array(p.channels, dtype=np.uint8)[idx]
    return LabelMap(labels, p.spacing, p.origin)


def majority_vote(maps: list[LabelMap]) -> LabelMap:
    """Most frequent label per voxel; ties break by priority 4 > 1 > 2 > 0."""
    if not maps:
        raise EmptyList("majority_vote needs at least one label map")
    require_same_geometry(*maps)
    priority = (4, 1, 2, 0)
    counts = np.stack(
        [sum((m.data == lbl).astype(np.int32) for m in maps) for lbl in priority]
    )
    winner = np.argmax(counts, axis=0)  # first max in priority order
    labels = np.array(priority, dtype=np.uint8)[winner]
    return LabelMap(labels, maps[0].spacing, maps[0].origin)


@dataclass(frozen=True)
class StapleParams:
    """Per-rater sensitivity/specificity plus the EM control knobs."""

    p: tuple[float, ...]
    q: tuple[float, ...]
    prior: float
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if len(self.p) != len(self.q):
            raise ValueError("p and q must have one entry per rater")
        for val in (*self.p, *self.q, self.prior):
            if not 0.0 < val < 1.0:
                raise ValueError(f"probabilities must lie strictly in (0,1), got {val}")
        if self.max_iters < 1 or self.tol <= 0:
            raise ValueError("max_iters must be >= 1 and tol > 0")


@dataclass(frozen=True)
class StapleResult:
    mask: RegionMask
    posterior: np.ndarray
    final_params: StapleParams
    iterations: int
    converged: bool

    def to_json_dict(self) -> dict:
        return {
            "p": list(self.final_params.p),
            "q": list(self.final_params.q),
            "prior": self.final_params.prior,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _clamp(x: np.ndarray) -> np.ndarray:
    return np.clip(x, PARAM_CLAMP, 1.0 - PARAM_CLAMP)


def default_staple_params(
    n_raters: int,
    prior: float,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> StapleParams:
    """Near-perfect rater prior: p = q = 0.99999 for every rater."""
    pq = (DEFAULT_INIT_PQ,) * n_raters
    return StapleParams(pq, pq, float(_clamp(np.asarray(prior))), max_iters, tol)


def _e_step(d: np.ndarray, p: np.ndarray, q: np.ndarray, prior: float) -> np.ndarray:
    # log a - log b, evaluated through a sigmoid: stable for any rater count.
    log_a = np.log(prior) + d.T @ np.log(p) + (1.0 - d.T) @ np.log1p(-p)
    log_b = np.log1p(-prior) + d.T @ np.log1p(-q) + (1.0 - d.T) @ np.log(q)
    return 1.0 / (1.0 + np.exp(log_b - log_a))


def _m_step(d: np.ndarray, w: np.ndarray, p_prev: np.ndarray, q_prev: np.ndarray):
    w_sum = w.sum()
    not_w_sum = (1.0 - w).sum()
    p = (d @ w) / w_sum if w_sum > 0 else p_prev
    q = ((1.0 - d) @ (1.0 - w)) / not_w_sum if not_w_sum > 0 else q_prev
    return _clamp(p), _clamp(q)


def staple_binary(
    masks: list[RegionMask],
    init: StapleParams | None = None,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> StapleResult:
    """Fuse binary rater masks by expectation-maximization.

    When ``init`` is None the default parameters are used (``tol`` and
    ``max_iters`` then apply), with the foreground prior set to the global
    mean foreground rate over all raters and voxels (clamped into (0,1)).
    The output mask thresholds the posterior at W >= 0.5 (ties go to
    foreground).
    """
    if not masks:
        raise EmptyList("staple_binary needs at least one rater mask")
    require_same_geometry(*masks)
    region = masks[0].region
    for m in masks[1:]:
        if m.region is not region:
            raise GeometryMismatch("rater masks disagree on the region tag")
    shape = masks[0].shape
    d = np.stack([m.data.reshape(-1) for m in masks]).astype(np.float64)  # (J, N)
    if init is None:
        init = default_staple_params(
            len(masks), prior=float(d.mean()), max_iters=max_iters, tol=tol
        )
    elif len(init.p) != len(masks):
        raise ValueError(f"init has {len(init.p)} raters, got {len(masks)} masks")
    p = np.asarray(init.p, dtype=np.float64)
    q = np.asarray(init.q, dtype=np.float64)
    prior = float(init.prior)

    w = _e_step(d, p, q, prior)
    iterations = 0
    converged = False
    while iterations < init.max_iters:
        p, q = _m_step(d, w, p, q)
        w_new = _e_step(d, p, q, prior)
        iterations += 1
        delta = np.abs(w_new - w).max()
        w = w_new
        if delta < init.tol:
            converged = True
            break
    # Re-estimate from the final posterior so the returned parameters are the
    # exact M-step fixed point of the returned W.
    p, q = _m_step(d, w, p, q)

    posterior = w.reshape(shape)
    mask = RegionMask(region, posterior >= 0.5, masks[0].spacing, masks[0].origin)
    final = StapleParams(
        tuple(float(x) for x in p),
        tuple(float(x) for x in q),
        prior,
        init.max_iters,
        init.tol,
    )
    return StapleResult(mask, posterior, final, iterations, converged)


def staple_multilabel_detailed(
    maps: list[LabelMap],
    init: StapleParams | None = None,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> tuple[LabelMap, dict[str, StapleResult]]:
    """Per-region binary STAPLE plus recomposition; also returns diagnostics."""
    if not maps:
        raise EmptyList("staple_multilabel needs at least one rater map")
    require_same_geometry(*maps)
    results = {}
    fused_masks = {}
    for r in (Region.ET, Region.TC, Region.WT):
        rater_masks = [region_mask(m, r) for m in maps]
        res = staple_binary(rater_masks, init, tol=tol, max_iters=max_iters)
        results[r.value] = res
        fused_masks[r] = res.mask
    labels = recompose_labels(
        fused_masks[Region.ET], fused_masks[Region.TC], fused_masks[Region.WT]
    )
    return labels, results


def staple_multilabel(
    maps: list[LabelMap],
    init: StapleParams | None = None,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> LabelMap:
    """Fuse rater label maps region by region (ET, TC, WT) with STAPLE."""
    labels, _ = staple_multilabel_detailed(maps, init, tol=tol, max_iters=max_iters)
    return labels

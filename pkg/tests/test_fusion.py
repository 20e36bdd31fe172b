import numpy as np
import pytest

from bratsfuse.errors import EmptyList, GeometryMismatch
from bratsfuse.fusion import (
    StapleParams,
    argmax_labels,
    average_probs,
    default_staple_params,
    majority_vote,
    staple_binary,
    staple_multilabel,
    staple_multilabel_detailed,
)
from bratsfuse.regions import Region, RegionMask, recompose_labels, region_mask
from bratsfuse.synth import PhantomSpec, corrupt_labels, make_phantom
from bratsfuse.volume import LabelMap, ProbMap

from .conftest import random_labelmap, random_mask, random_probmap
from .oracles import staple_em_reference


def probmap_from_rows(rows):
    """Build a ProbMap from per-voxel channel vectors (one voxel per row)."""
    arr = np.array(rows, dtype=np.float64).T.reshape(4, len(rows), 1, 1)
    return ProbMap(arr)


class TestAverageProbs:
    def test_identical_maps(self, rng):
        pm = random_probmap(rng, (3, 3, 3))
        out = average_probs([pm, pm, pm])
        assert np.abs(out.data - pm.data).max() < 1e-12

    def test_two_one_hots(self):
        a = probmap_from_rows([[1, 0, 0, 0]])
        b = probmap_from_rows([[0, 1, 0, 0]])
        out = average_probs([a, b])
        assert out.data.reshape(4).tolist() == [0.5, 0.5, 0.0, 0.0]

    def test_three_map_mean(self):
        maps = [probmap_from_rows([[v, 1 - v, 0, 0]]) for v in (0.2, 0.5, 0.8)]
        out = average_probs(maps)
        assert out.data[0, 0, 0, 0] == pytest.approx(0.5)

    def test_permutation_invariant(self, rng):
        maps = [random_probmap(rng, (2, 2, 2)) for _ in range(4)]
        a = average_probs(maps)
        b = average_probs(maps[::-1])
        assert np.abs(a.data - b.data).max() < 1e-15

    def test_errors(self, rng):
        with pytest.raises(EmptyList):
            average_probs([])
        with pytest.raises(GeometryMismatch):
            average_probs([random_probmap(rng, (2, 2, 2)), random_probmap(rng, (3, 2, 2))])


class TestArgmax:
    def test_one_hot(self):
        out = argmax_labels(probmap_from_rows([[0, 0, 0, 1]]))
        assert out.data.reshape(-1).tolist() == [4]

    def test_uniform_tie_prefers_later_channel(self):
        out = argmax_labels(probmap_from_rows([[0.25, 0.25, 0.25, 0.25]]))
        assert out.data.reshape(-1).tolist() == [4]

    def test_background_wins(self):
        out = argmax_labels(probmap_from_rows([[0.4, 0.3, 0.2, 0.1]]))
        assert out.data.reshape(-1).tolist() == [0]


class TestMajorityVote:
    def maps(self, *columns):
        return [
            LabelMap(np.array(col, dtype=np.uint8).reshape(len(col), 1, 1))
            for col in columns
        ]

    def test_majority(self):
        out = majority_vote(self.maps([2], [2], [0]))
        assert out.data.reshape(-1).tolist() == [2]

    def test_tie_priority(self):
        out = majority_vote(self.maps([4], [1]))
        assert out.data.reshape(-1).tolist() == [4]
        out = majority_vote(self.maps([2], [0]))
        assert out.data.reshape(-1).tolist() == [2]
        out = majority_vote(self.maps([1], [2]))
        assert out.data.reshape(-1).tolist() == [1]

    def test_single_rater(self, rng):
        m = random_labelmap(rng, (3, 3, 3))
        assert np.array_equal(majority_vote([m]).data, m.data)

    def test_empty_raises(self):
        with pytest.raises(EmptyList):
            majority_vote([])


def rater_masks(columns):
    arr = np.array(columns, dtype=bool)  # (J, N)
    return [RegionMask(Region.WT, row.reshape(arr.shape[1], 1, 1)) for row in arr]


class TestStapleBinary:
    def test_unanimous_fixed_point(self):
        data = np.zeros((4, 4, 1), dtype=bool)
        data[1:3, 1:3, 0] = True
        masks = [RegionMask(Region.WT, data) for _ in range(3)]
        res = staple_binary(masks)
        assert np.array_equal(res.mask.data, data)
        assert all(p >= 1 - 1e-6 for p in res.final_params.p)
        assert all(q >= 1 - 1e-6 for q in res.final_params.q)

    def test_single_rater_near_one_init(self, rng):
        mask = random_mask(rng, (4, 4, 4), density=0.3)
        res = staple_binary([mask])
        assert np.array_equal(res.mask.data, mask.data)

    def test_against_reference_on_spec_instance(self):
        # 1x1x4 volume, 3 raters voting per voxel: (1,1,0),(1,0,0),(1,1,1),(0,0,0)
        d = np.array([[1, 1, 1, 0], [1, 0, 1, 0], [0, 0, 1, 0]], dtype=np.float64)
        masks = rater_masks(d.astype(bool).reshape(3, 4))
        res = staple_binary(masks)
        init = default_staple_params(3, prior=float(d.mean()))
        w_ref, p_ref, q_ref, iters_ref, conv_ref = staple_em_reference(
            d, init.p, init.q, init.prior, init.tol, init.max_iters
        )
        assert np.abs(res.posterior.reshape(-1) - w_ref).max() < 1e-6
        assert np.abs(np.array(res.final_params.p) - p_ref).max() < 1e-6
        assert np.abs(np.array(res.final_params.q) - q_ref).max() < 1e-6
        assert res.iterations == iters_ref
        assert res.converged == conv_ref

    def test_mask_matches_thresholded_posterior(self, rng):
        masks = [random_mask(rng, (4, 4, 4), density=0.4) for _ in range(3)]
        res = staple_binary(masks)
        assert np.array_equal(res.mask.data, res.posterior >= 0.5)
        assert res.posterior.min() >= 0.0 and res.posterior.max() <= 1.0

    def test_mstep_fixed_point_identities(self, rng):
        masks = [random_mask(rng, (5, 4, 3), density=0.5) for _ in range(4)]
        res = staple_binary(masks)
        d = np.stack([m.data.reshape(-1) for m in masks]).astype(np.float64)
        w = res.posterior.reshape(-1)
        p_expected = np.clip((d @ w) / w.sum(), 1e-7, 1 - 1e-7)
        q_expected = np.clip(((1 - d) @ (1 - w)) / (1 - w).sum(), 1e-7, 1 - 1e-7)
        assert np.abs(np.array(res.final_params.p) - p_expected).max() < 1e-8
        assert np.abs(np.array(res.final_params.q) - q_expected).max() < 1e-8

    def test_rater_permutation_invariance(self, rng):
        masks = [random_mask(rng, (4, 4, 4), density=0.4) for _ in range(4)]
        a = staple_binary(masks)
        b = staple_binary(masks[::-1])
        assert np.array_equal(a.mask.data, b.mask.data)
        assert np.abs(a.posterior - b.posterior).max() < 1e-12
        assert np.abs(np.array(a.final_params.p) - np.array(b.final_params.p[::-1])).max() < 1e-12

    def test_unanimity_preserved_on_realistic_raters(self):
        gt, _ = make_phantom(PhantomSpec(shape=(20, 20, 20), seed=11))
        raters = [corrupt_labels(gt, 0.15, seed=100 + k) for k in range(4)]
        masks = [region_mask(r, Region.WT) for r in raters]
        res = staple_binary(masks)
        stacked = np.stack([m.data for m in masks])
        all_fg = stacked.all(axis=0)
        all_bg = ~stacked.any(axis=0)
        assert res.mask.data[all_fg].all()
        assert not res.mask.data[all_bg].any()

    def test_no_underflow_with_64_raters(self, rng):
        mask = random_mask(rng, (3, 3, 3), density=0.5)
        res = staple_binary([mask] * 64)
        assert np.isfinite(res.posterior).all()

    def test_param_validation(self):
        with pytest.raises(ValueError):
            StapleParams((0.5,), (0.5,), prior=1.0)
        with pytest.raises(ValueError):
            StapleParams((0.5,), (0.5, 0.5), prior=0.5)
        with pytest.raises(ValueError):
            StapleParams((0.5,), (0.5,), prior=0.5, max_iters=0)


class TestStapleMultilabel:
    def test_identical_maps(self, rng):
        m = random_labelmap(rng, (4, 4, 4))
        out = staple_multilabel([m, m, m])
        assert np.array_equal(out.data, m.data)

    def test_single_rater(self, rng):
        m = random_labelmap(rng, (4, 4, 4))
        out = staple_multilabel([m])
        assert np.array_equal(out.data, m.data)

    def test_compositional_equivalence_with_per_region_path(self):
        gt, _ = make_phantom(PhantomSpec(shape=(24, 24, 24), seed=7))
        raters = [corrupt_labels(gt, 0.10, seed=700 + k) for k in range(3)]
        fused, details = staple_multilabel_detailed(raters)
        per_region = {}
        for r in (Region.ET, Region.TC, Region.WT):
            res = staple_binary([region_mask(m, r) for m in raters])
            per_region[r] = res.mask
            assert np.array_equal(res.mask.data, details[r.value].mask.data)
        recomposed = recompose_labels(
            per_region[Region.ET], per_region[Region.TC], per_region[Region.WT]
        )
        assert np.array_equal(fused.data, recomposed.data)
        # For this seed the per-region masks are nested, so the fused map
        # decomposes back to exactly the per-region STAPLE outputs.
        for r in (Region.ET, Region.TC, Region.WT):
            assert np.array_equal(region_mask(fused, r).data, per_region[r].data)

import numpy as np
import pytest

from hfomkit import imgcore
from hfomkit.features import FeatureVector, extract_features
from hfomkit.hfom import (
    Hfom,
    HfomConfig,
    OrientationMap,
    STAGE_NAMES,
    FingerStack,
    assemble_hfom,
    block_orientation_field,
    common_pixel_count,
    hfom_pipeline,
    min_rotate_max_flow,
    orientation_map,
    refine_blocks,
    select_best_standard,
    ssim,
    sub_blocks,
    subblock_orientation,
)
from hfomkit.synth import synth_image


def binary_img(rng, side):
    return (rng.integers(0, 2, (side, side)) * 255).astype(np.uint8)


def fv(mu, sigma2=0.0, rvr=0.0):
    return FeatureVector(mu, sigma2, 0.0, 0.0, rvr, 0.0)


class TestSelection:
    def test_lexicographic_order(self):
        pool = [
            ("a", None, fv(3.0)),
            ("b", None, fv(1.0, sigma2=5.0)),
            ("c", None, fv(1.0, sigma2=2.0)),
            ("d", None, fv(2.0)),
        ]
        chosen = select_best_standard(pool, 4)
        assert [item[0] for item in chosen] == ["c", "b", "d", "a"]

    def test_third_key_breaks_remaining_ties(self):
        pool = [
            ("x", None, fv(1.0, 1.0, rvr=0.9)),
            ("y", None, fv(1.0, 1.0, rvr=0.1)),
            ("z", None, fv(1.0, 1.0, rvr=0.5)),
            ("w", None, fv(9.0)),
        ]
        assert [i[0] for i in select_best_standard(pool, 4)] == ["y", "z", "x", "w"]

    def test_pool_too_small(self):
        with pytest.raises(ValueError, match="insufficient"):
            select_best_standard([("a", None, fv(1.0))] * 3, 4)

    def test_n_below_four(self):
        with pytest.raises(ValueError):
            select_best_standard([("a", None, fv(1.0))] * 8, 3)


class TestCommonCount:
    def test_identical_stack(self):
        rng = np.random.default_rng(70)
        img = binary_img(rng, 12)
        assert common_pixel_count([img, img.copy(), img.copy()]) == 144

    def test_single_image(self):
        img = np.zeros((5, 5), dtype=np.uint8)
        assert common_pixel_count([img]) == 25

    def test_matches_brute_force(self):
        rng = np.random.default_rng(71)
        imgs = [binary_img(rng, 9) for _ in range(4)]
        count = 0
        for i in range(9):
            for j in range(9):
                if all(int(m[i, j]) == int(imgs[0][i, j]) for m in imgs):
                    count += 1
        assert common_pixel_count(imgs) == count

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            common_pixel_count(
                [np.zeros((4, 4), dtype=np.uint8), np.zeros((5, 5), dtype=np.uint8)]
            )


class TestAlignment:
    def test_recovers_known_rotation(self):
        rng = np.random.default_rng(72)
        base = binary_img(rng, 16)
        stack = FingerStack([base, imgcore.rotate_quarter(base, 90)], [0, 0])
        aligned = min_rotate_max_flow(stack)
        assert np.array_equal(aligned.images[1], base)
        assert aligned.angles == [0, 270]
        assert aligned.p_count() == 256

    def test_reference_image_fixed(self):
        rng = np.random.default_rng(73)
        imgs = [binary_img(rng, 12) for _ in range(4)]
        aligned = min_rotate_max_flow(FingerStack(imgs, [0] * 4))
        assert np.array_equal(aligned.images[0], imgs[0])
        assert aligned.angles[0] == 0

    def test_never_decreases_count(self):
        rng = np.random.default_rng(74)
        imgs = [binary_img(rng, 12) for _ in range(5)]
        before = common_pixel_count(imgs)
        aligned = min_rotate_max_flow(FingerStack(imgs, [0] * 5))
        assert aligned.p_count() >= before

    def test_idempotent(self):
        rng = np.random.default_rng(75)
        imgs = [binary_img(rng, 12) for _ in range(4)]
        once = min_rotate_max_flow(FingerStack(imgs, [0] * 4))
        twice = min_rotate_max_flow(FingerStack(once.images, once.angles))
        assert twice.p_count() == once.p_count()
        for a, b in zip(once.images, twice.images):
            assert np.array_equal(a, b)


class TestSubBlocks:
    @pytest.mark.parametrize("b_s", [3, 9, 15])
    def test_coverage_and_shared_center(self, b_s):
        block = np.arange(b_s * b_s, dtype=np.int32).reshape(b_s, b_s)
        quads = sub_blocks(block)
        h = (b_s + 1) // 2
        seen = set()
        center = block[b_s // 2, b_s // 2]
        for q, ref in quads:
            assert q.shape == (h, h)
            assert q[ref] == center  # reference corner is the parent center
            seen.update(q.ravel().tolist())
        assert seen == set(range(b_s * b_s))  # quadrants cover every pixel

    def test_even_side_rejected(self):
        with pytest.raises(ValueError):
            sub_blocks(np.zeros((4, 4), dtype=np.uint8))


class TestSubblockOrientation:
    def make(self, h=8):
        return np.full((h, h), 255, dtype=np.uint8)

    def test_horizontal_line(self):
        q = self.make()
        q[0, :] = 0
        assert subblock_orientation(q, (0, 0)) == 0

    def test_vertical_line(self):
        q = self.make()
        q[:, 0] = 0
        assert subblock_orientation(q, (0, 0)) == 90

    def test_diagonal_line(self):
        q = self.make()
        np.fill_diagonal(q, 0)
        assert subblock_orientation(q, (0, 0)) == 45

    def test_orientation_is_corner_relative(self):
        # the same physical horizontal line reads as 0 from any corner
        q = self.make()
        q[7, :] = 0
        assert subblock_orientation(q, (7, 7)) == 0
        assert subblock_orientation(q, (7, 0)) == 0

    def test_quarter_turn_swaps_axes(self):
        q = self.make()
        q[:, 7] = 0  # vertical line through the (0, 7) corner
        assert subblock_orientation(q, (0, 7)) == 90

    def test_too_few_pixels(self):
        q = self.make()
        q[0, 0] = 0  # a single black pixel lies on all three lines
        assert subblock_orientation(q, (0, 0)) is None

    def test_blank(self):
        assert subblock_orientation(self.make(), (0, 0)) is None

    def test_bad_reference(self):
        with pytest.raises(ValueError):
            subblock_orientation(self.make(), (3, 3))


class TestBlockField:
    def block(self):
        return np.full((15, 15), 255, dtype=np.uint8)

    def test_center_row_votes_horizontal(self):
        b = self.block()
        b[7, :] = 0
        rendered, angle = block_orientation_field(b)
        assert angle == 0
        assert (rendered[7] == 0).all()
        assert (np.delete(rendered, 7, axis=0) == 255).all()

    def test_center_column_votes_vertical(self):
        b = self.block()
        b[:, 7] = 0
        rendered, angle = block_orientation_field(b)
        assert angle == 90
        assert (rendered[:, 7] == 0).all()

    def test_cross_tie_takes_smaller_angle(self):
        b = self.block()
        b[7, :] = 0
        b[:, 7] = 0
        _, angle = block_orientation_field(b)
        assert angle == 0

    def test_blank_block_stays_blank(self):
        rendered, angle = block_orientation_field(self.block())
        assert angle is None
        assert (rendered == 255).all()

    def test_diagonal(self):
        b = self.block()
        np.fill_diagonal(b, 0)
        rendered, angle = block_orientation_field(b)
        assert angle == 45
        # rendered 45-degree line runs corner to corner the other way up
        assert rendered[7, 7] == 0 and rendered[14, 0] == 0 and rendered[0, 14] == 0


class TestOrientationMap:
    def test_horizontal_stripes(self):
        img = np.full((45, 45), 255, dtype=np.uint8)
        img[2::5, :] = 0  # block-center rows 7, 22, 37 are black
        omap = orientation_map(img, 15)
        assert (omap.angles == 0).all()
        for k in range(3):
            assert (omap.image[15 * k + 7] == 0).all()

    def test_vertical_stripes(self):
        img = np.full((45, 45), 255, dtype=np.uint8)
        img[:, 2::5] = 0
        omap = orientation_map(img, 15)
        assert (omap.angles == 90).all()

    def test_blank_image(self):
        omap = orientation_map(np.full((30, 30), 255, dtype=np.uint8), 15)
        assert (omap.angles == -1).all()
        assert (omap.image == 255).all()

    def test_unpadded_rejected(self):
        with pytest.raises(ValueError, match="padded"):
            orientation_map(np.full((40, 40), 255, dtype=np.uint8), 15)

    def test_output_is_line_renders_only(self):
        rng = np.random.default_rng(76)
        img = imgcore.pad_to_blocks(binary_img(rng, 45), 15)
        omap = orientation_map(img, 15)
        # every block is blank or a 1-pixel-wide line: 15 or 0 black pixels
        for k in range(3):
            for l in range(3):
                block = omap.image[15 * k : 15 * k + 15, 15 * l : 15 * l + 15]
                assert int((block == 0).sum()) in (0, 15)


class TestRefine:
    def one_block_map(self, angle):
        block = np.full((15, 15), 255, dtype=np.uint8)
        if angle == 0:
            block[7, :] = 0
        elif angle == 90:
            block[:, 7] = 0
        return OrientationMap(block, np.array([[angle]], dtype=np.int16), 15)

    def test_aligns_crossed_blocks(self):
        refined = refine_blocks([self.one_block_map(0), self.one_block_map(90)])
        assert np.array_equal(refined[0].image, refined[1].image)
        assert refined[1].angles[0, 0] == 0
        assert common_pixel_count([m.image for m in refined]) == 225

    def test_reference_map_unchanged(self):
        a, b = self.one_block_map(0), self.one_block_map(90)
        refined = refine_blocks([a, b])
        assert np.array_equal(refined[0].image, a.image)

    def test_never_decreases_count(self):
        rng = np.random.default_rng(77)
        maps = [
            orientation_map(imgcore.pad_to_blocks(binary_img(rng, 45), 15), 15)
            for _ in range(4)
        ]
        before = common_pixel_count([m.image for m in maps])
        refined = refine_blocks(maps)
        assert common_pixel_count([m.image for m in refined]) >= before

    def test_angle_grid_tracks_rotation(self):
        refined = refine_blocks([self.one_block_map(0), self.one_block_map(90)])
        # the rendered line and the recorded angle agree after refinement
        assert (refined[1].image[7] == 0).all()

    def test_grid_mismatch(self):
        a = self.one_block_map(0)
        b = OrientationMap(np.full((30, 30), 255, dtype=np.uint8),
                           np.full((2, 2), -1, dtype=np.int16), 15)
        with pytest.raises(ValueError):
            refine_blocks([a, b])


class TestAssemble:
    def maps(self, n=4, side=16, seed=78):
        rng = np.random.default_rng(seed)
        return [
            OrientationMap(binary_img(rng, side), np.zeros((1, 1), np.int16), side)
            for _ in range(n)
        ]

    def test_identity_assignment(self):
        maps = self.maps()
        h = assemble_hfom(maps)
        assert h.provenance == [(1, 0), (2, 1), (3, 2), (4, 3)]
        assert np.array_equal(h.image[:8, :8], maps[0].image[:8, :8])
        assert np.array_equal(h.image[:8, 8:], maps[1].image[:8, 8:])
        assert np.array_equal(h.image[8:, :8], maps[2].image[8:, :8])
        assert np.array_equal(h.image[8:, 8:], maps[3].image[8:, 8:])

    def test_identical_maps_reassemble_to_same_image(self):
        rng = np.random.default_rng(79)
        img = binary_img(rng, 16)
        maps = [OrientationMap(img.copy(), np.zeros((1, 1), np.int16), 16)] * 4
        h = assemble_hfom(maps, assignment_seed=5)
        assert np.array_equal(h.image, img)

    def test_seeded_permutation_properties(self):
        maps = self.maps(n=6)
        seen = set()
        for seed in range(10):
            h = assemble_hfom(maps, assignment_seed=seed)
            sources = tuple(z for _, z in h.provenance)
            assert sorted(sources) == [0, 1, 2, 3]  # always 4 distinct maps
            seen.add(sources)
        assert len(seen) > 1  # the seed actually permutes

    def test_odd_side_padded_white(self):
        maps = self.maps(side=15, seed=80)
        h = assemble_hfom(maps)
        assert h.image.shape == (16, 16)
        assert (h.image[15, 8:] == 255).all() and (h.image[8:, 15] == 255).all()

    def test_too_few_maps(self):
        with pytest.raises(ValueError, match="at least 4"):
            assemble_hfom(self.maps(n=3))


class TestSsim:
    def test_self_similarity_is_two(self):
        rng = np.random.default_rng(81)
        img = rng.integers(0, 256, (32, 32)).astype(np.uint8)
        assert ssim(img, img) == pytest.approx(2.0, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(82)
        for _ in range(10):
            a = rng.integers(0, 256, (24, 24)).astype(np.uint8)
            b = rng.integers(0, 256, (24, 24)).astype(np.uint8)
            assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_range(self):
        rng = np.random.default_rng(83)
        for _ in range(10):
            a = rng.integers(0, 256, (20, 20)).astype(np.uint8)
            b = rng.integers(0, 256, (20, 20)).astype(np.uint8)
            assert 0.0 <= ssim(a, b) <= 2.0

    def test_opposite_constants_closed_form(self):
        a = np.zeros((20, 20), dtype=np.uint8)
        b = np.full((20, 20), 255, dtype=np.uint8)
        c1 = (0.01 * 255) ** 2
        expect = c1 / (255.0**2 + c1) + 1.0
        assert ssim(a, b) == pytest.approx(expect, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            ssim(np.zeros((8, 8), dtype=np.uint8), np.zeros((9, 9), dtype=np.uint8))


@pytest.fixture(scope="module")
def standard_pool():
    rng = np.random.default_rng(84)
    pool = []
    for i in range(10):
        img = synth_image("standard", 96, rng)
        pool.append((f"std_{i}", img, extract_features(img)))
    return pool


class TestPipeline:
    def test_stage_report_and_monotonicity(self, standard_pool):
        result = hfom_pipeline(standard_pool, HfomConfig(n=10))
        names = [name for name, _ in result.stages]
        assert names == list(STAGE_NAMES)
        counts = dict(result.stages)
        assert counts["Rotation"] >= counts["Binarization"]
        assert (
            counts["Orientation Map Modification at Block Level"]
            >= counts["Ridge Orientation Fields Generation"]
        )

    def test_deterministic(self, standard_pool):
        r1 = hfom_pipeline(standard_pool, HfomConfig(n=10))
        r2 = hfom_pipeline(standard_pool, HfomConfig(n=10))
        assert np.array_equal(r1.hfom.image, r2.hfom.image)
        assert r1.stages == r2.stages
        assert r1.hfom.provenance == r2.hfom.provenance

    def test_hybrid_is_binary(self, standard_pool):
        result = hfom_pipeline(standard_pool, HfomConfig(n=10))
        assert set(np.unique(result.hfom.image)) <= {0, 255}

    def test_unused_maps_contribute_nothing(self, standard_pool):
        result = hfom_pipeline(standard_pool, HfomConfig(n=10))
        used = {z for _, z in result.hfom.provenance}
        assert len(used) == 4
        assert len(standard_pool) - len(used) >= 6

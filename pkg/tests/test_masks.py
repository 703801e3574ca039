import itertools

import numpy as np
import pytest

from tilelab.data.prng import make_rng
from tilelab.errors import ConfigValidationError
from tilelab.grid import Dims3, TokenCoord, VideoGrid
from tilelab.masks import (
    BlockClassifier,
    BlockType,
    CLEARSpec,
    FullSpec,
    NATTENSpec,
    STASpec,
    SwinSpec,
    TiledNATTENSpec,
    TokenMask,
    attended_pair_count,
    classify_blocks,
    clear_mask,
    compare_analytic,
    kv_block_schedule,
    natten_block_counts_analytic,
    natten_mask,
    parse_mask_spec,
    parse_mask_specs,
    schedule_lengths,
    sparsity,
    sta_block_counts_analytic,
    sta_mask,
    swin_mask,
)
from tilelab.masks.analytic import interior_rows_match

HUNYUAN = VideoGrid.build((30, 48, 80), (6, 8, 8))
CUBE = VideoGrid.build((48, 48, 48), (4, 4, 4))


def _c(*values):
    return TokenCoord(*values)


# ---- predicates ----

def test_natten_mask_examples():
    dims, window = Dims3(4, 4, 4), Dims3(3, 3, 3)
    assert natten_mask(_c(0, 0, 0), _c(2, 2, 2), dims, window) is True
    assert natten_mask(_c(0, 0, 0), _c(3, 0, 0), dims, window) is False
    full = Dims3(5, 5, 5)
    assert natten_mask(_c(0, 0, 0), _c(4, 4, 4), full, full) is True


def test_natten_rejects_even_window():
    with pytest.raises(ConfigValidationError, match="must be odd"):
        natten_mask(_c(0, 0, 0), _c(0, 0, 0), Dims3(4, 4, 4), Dims3(3, 2, 3))


def test_sta_mask_examples(toy_grid):
    assert sta_mask(_c(0, 0, 0), _c(5, 5, 5), toy_grid, Dims3(6, 6, 6)) is True
    assert sta_mask(_c(0, 0, 1), _c(1, 1, 0), toy_grid, Dims3(2, 2, 2)) is True
    assert sta_mask(_c(0, 0, 0), _c(6, 0, 0), toy_grid, Dims3(6, 6, 6)) is False


def test_sta_window_equal_to_dims_attends_everything():
    grid = VideoGrid.build((6, 6, 6), (2, 2, 2))
    coords = TokenMask(STASpec(window=(6, 6, 6)), grid).dense()
    assert coords.all()


@pytest.mark.parametrize("window", [(4, 2, 2), (3, 2, 2)])
def test_sta_rejects_invalid_windows(toy_grid, window):
    with pytest.raises(ConfigValidationError):
        sta_mask(_c(0, 0, 0), _c(0, 0, 0), toy_grid, Dims3(*window))


def test_swin_mask_examples():
    dims = Dims3(4, 4, 4)
    assert swin_mask(_c(0, 0, 0), _c(1, 1, 1), dims, Dims3(2, 2, 2)) is True
    assert swin_mask(_c(1, 1, 1), _c(2, 1, 1), dims, Dims3(2, 2, 2)) is False
    # shifted cells start at offset 1 and wrap
    assert swin_mask(_c(1, 1, 1), _c(2, 1, 1), dims, Dims3(2, 2, 2), shifted=True) is True
    assert swin_mask(_c(0, 0, 0), _c(3, 3, 3), dims, Dims3(2, 2, 2), shifted=True) is True
    for shifted in (False, True):
        assert swin_mask(_c(0, 3, 1), _c(3, 0, 2), dims, dims, shifted=shifted) is True


def test_swin_rejects_non_dividing_window():
    with pytest.raises(ConfigValidationError):
        swin_mask(_c(0, 0, 0), _c(0, 0, 0), Dims3(4, 4, 4), Dims3(3, 2, 2))


def test_clear_mask_examples():
    assert clear_mask(_c(1, 2, 3), _c(1, 2, 3), 0.5) is True
    assert clear_mask(_c(0, 0, 0), _c(0, 3, 4), 5) is True
    assert clear_mask(_c(0, 0, 0), _c(0, 3, 4), 4.9) is False


@pytest.mark.parametrize("spec", [CLEARSpec(radius=1.8), SwinSpec(window=(2, 2, 2)),
                                  SwinSpec(window=(2, 4, 2), shifted=True)])
def test_clear_and_swin_are_symmetric(small_grid, spec):
    dense = TokenMask(spec, small_grid).dense()
    np.testing.assert_array_equal(dense, dense.T)


def test_natten_symmetric_on_interior_queries():
    grid = VideoGrid.build((7, 7, 7), (1, 1, 1))
    spec = NATTENSpec(window=(3, 3, 3))
    dense = TokenMask(spec, grid).dense()
    coords = TokenMask(spec, grid).coords
    # queries whose window never touches the border, keys anywhere in their window
    interior = np.flatnonzero(np.all((coords >= 2) & (coords <= 4), axis=1))
    sub = dense[np.ix_(interior, interior)]
    np.testing.assert_array_equal(sub, sub.T)


def test_sta_symmetric_on_interior_tiles():
    grid = VideoGrid.build((8, 8, 8), (2, 2, 2))
    mask = TokenMask(STASpec(window=(6, 6, 6)), grid)
    dense = mask.dense()
    # tiles 1 and 2 on every axis never have their window clamped
    interior = np.flatnonzero(np.all((mask.coords >= 2) & (mask.coords <= 5), axis=1))
    sub = dense[np.ix_(interior, interior)]
    np.testing.assert_array_equal(sub, sub.T)
    assert not np.array_equal(dense, dense.T)


# ---- mask spec documents ----

def test_parse_mask_spec_round_trip():
    spec = parse_mask_spec('{"family": "sta", "window": [18, 24, 24]}')
    assert isinstance(spec, STASpec) and spec.window == (18, 24, 24)
    assert parse_mask_spec(spec.to_json()) == spec
    assert isinstance(parse_mask_spec({"family": "tiled_natten", "window": [3, 3, 3]}), TiledNATTENSpec)
    assert parse_mask_spec({"family": "swin", "window": [2, 2, 2], "shifted": True}).shifted


@pytest.mark.parametrize("document", [
    {"family": "hilbert"},
    {"family": "sta"},
    {"family": "clear", "radius": 0},
    {"family": "sta", "window": [2, 2]},
    {"family": "full", "window": [2, 2, 2]},
])
def test_parse_mask_spec_rejects_invalid(document):
    with pytest.raises(ConfigValidationError):
        parse_mask_spec(document)


def test_parse_pattern_list():
    specs = parse_mask_specs([{"family": "sta", "window": [2, 2, 2]}, {"family": "full"}])
    assert [s.family for s in specs] == ["sta", "full"]


# ---- block classification ----

def test_full_mask_is_all_dense(small_grid):
    block_map = classify_blocks(FullSpec(), small_grid)
    assert block_map.counts.dense == small_grid.num_blocks ** 2
    assert block_map.sparsity == 0.0
    assert sparsity(FullSpec(), small_grid) == 0.0


def test_counts_partition_all_blocks(toy_grid):
    block_map = classify_blocks(TiledNATTENSpec(window=(3, 3, 3)), toy_grid)
    assert block_map.counts.total == toy_grid.num_blocks ** 2
    assert block_map.to_dict()["attended_pairs"] == block_map.attended_pair_count


def test_sta_example_counts_on_toy_grid(toy_grid):
    block_map = classify_blocks(STASpec(window=(6, 6, 6)), toy_grid)
    assert block_map.counts.mixed == 0
    assert block_map.counts.dense == 27 * 64
    assert sta_block_counts_analytic(toy_grid, Dims3(6, 6, 6))["dense"] == 27 * 64


def test_sta_never_produces_mixed_blocks_randomized():
    rng = make_rng(2024)
    checked = 0
    while checked < 50:
        tile = rng.integers(2, 5, size=3)
        tiles = rng.integers(1, 6, size=3)
        dims = tile * tiles
        if np.prod(dims) > 4096:
            continue
        tile_window = [int(rng.choice(np.arange(1, n + 1, 2))) for n in tiles]
        window = tuple(int(w * t) for w, t in zip(tile_window, tile))
        grid = VideoGrid.build(tuple(int(x) for x in dims), tuple(int(x) for x in tile))
        block_map = classify_blocks(STASpec(window=window), grid, method="exhaustive")
        assert block_map.counts.mixed == 0, (grid, window)
        assert block_map.counts.dense == sta_block_counts_analytic(grid, Dims3.of(window))["dense"]
        checked += 1


@pytest.mark.parametrize("spec", [
    STASpec(window=(6, 2, 6)),
    TiledNATTENSpec(window=(5, 3, 7)),
    SwinSpec(window=(4, 2, 8)),
    SwinSpec(window=(4, 4, 2), shifted=True),
    FullSpec(),
])
def test_factorized_matches_exhaustive(toy_grid, spec):
    classifier = BlockClassifier()
    fast = classifier.classify(spec, toy_grid, method="factorized")
    slow = classifier.classify(spec, toy_grid, method="exhaustive")
    np.testing.assert_array_equal(fast.pair_counts, slow.pair_counts)
    np.testing.assert_array_equal(fast.types, slow.types)


def test_factorized_refuses_non_separable(toy_grid):
    with pytest.raises(ConfigValidationError):
        BlockClassifier().classify(CLEARSpec(radius=2), toy_grid, method="factorized")
    with pytest.raises(ConfigValidationError):
        BlockClassifier().classify(NATTENSpec(window=(3, 3, 3)), toy_grid, method="factorized")


def test_classification_independent_of_workers(toy_grid):
    spec = CLEARSpec(radius=2.5)
    one = BlockClassifier(n_jobs=1, rows_per_task=5).classify(spec, toy_grid)
    many = BlockClassifier(n_jobs=4, rows_per_task=5).classify(spec, toy_grid)
    np.testing.assert_array_equal(one.pair_counts, many.pair_counts)


@pytest.mark.parametrize("spec", [
    NATTENSpec(window=(3, 3, 3)),
    TiledNATTENSpec(window=(3, 3, 3)),
    CLEARSpec(radius=1.5),
    SwinSpec(window=(2, 4, 2), shifted=True),
])
def test_block_types_reproduce_pair_count(small_grid, spec):
    block_map = classify_blocks(spec, small_grid)
    b2 = small_grid.block_size ** 2
    total = 0
    for i, j in itertools.product(range(block_map.num_blocks), repeat=2):
        if block_map.types[i, j] == BlockType.DENSE:
            total += b2
        elif block_map.types[i, j] == BlockType.MIXED:
            total += int(block_map.pair_mask(i, j).sum())
    assert total == block_map.attended_pair_count
    assert total == int(TokenMask(spec, small_grid).dense().sum())
    assert total == attended_pair_count(spec, small_grid)


def test_tiled_natten_has_more_dense_blocks(toy_grid):
    natten = classify_blocks(NATTENSpec(window=(5, 5, 5)), toy_grid)
    tiled = classify_blocks(TiledNATTENSpec(window=(5, 5, 5)), toy_grid)
    assert natten.counts.dense == 0
    assert tiled.counts.dense > 0
    assert natten.attended_pair_count == tiled.attended_pair_count


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_sta_monotone_in_window(axis):
    grid = VideoGrid.build((12, 12, 12), (2, 2, 2))
    previous = 0
    for w in (2, 6, 10):
        window = [6, 6, 6]
        window[axis] = w
        pairs = attended_pair_count(STASpec(window=tuple(window)), grid)
        assert pairs > previous
        previous = pairs


def test_sta_monotone_under_random_per_axis_growth():
    grid = VideoGrid.build((14, 14, 14), (2, 2, 2))
    gen = make_rng(5)
    for _ in range(20):
        window = [4 * int(gen.integers(0, 3)) + 2 for _ in range(3)]
        axis = int(gen.integers(0, 3))
        larger = list(window)
        larger[axis] += 4
        small = classify_blocks(STASpec(window=tuple(window)), grid)
        big = classify_blocks(STASpec(window=tuple(larger)), grid)
        assert big.attended_pair_count > small.attended_pair_count
        assert big.counts.dense > small.counts.dense


# ---- analytic counts ----

def test_natten_analytic_small():
    counts = natten_block_counts_analytic(VideoGrid.build((8, 8, 8), (2, 2, 2)), Dims3(3, 3, 3))
    assert counts == {"dense": 64, "mixed": 1664}


def test_natten_analytic_clamps_dense_to_zero():
    counts = natten_block_counts_analytic(VideoGrid.build((8, 8, 8), (4, 4, 4)), Dims3(5, 5, 5))
    assert counts["dense"] == 0


def test_sta_analytic_examples():
    assert sta_block_counts_analytic(HUNYUAN, Dims3(18, 24, 24))["dense"] == 8100
    grid = VideoGrid.build((6, 6, 6), (2, 2, 2))
    counts = sta_block_counts_analytic(grid, Dims3(6, 6, 6))
    assert counts == {"dense": 27 ** 2, "mixed": 0, "empty": 0}
    with pytest.raises(ConfigValidationError):
        sta_block_counts_analytic(grid, Dims3(4, 4, 4))


def test_compare_analytic_sta_has_no_delta(toy_grid):
    report = compare_analytic(STASpec(window=(2, 6, 2)), toy_grid)
    assert set(report["delta"].values()) == {0}
    assert compare_analytic(CLEARSpec(radius=2), toy_grid) == {}


def test_compare_analytic_tiled_natten_interior(toy_grid):
    report = compare_analytic(TiledNATTENSpec(window=(3, 3, 3)), toy_grid)
    assert report["analytic"] == {"dense": 64, "mixed": 1664}
    assert report["interior_rows_match"] is True


def test_cube48_block_ratios():
    blocks = CUBE.num_blocks ** 2
    assert blocks == 1728 ** 2

    natten = natten_block_counts_analytic(CUBE, Dims3(11, 11, 11))
    assert natten == {"dense": 1728, "mixed": 214272}
    assert round(100 * natten["dense"] / blocks, 2) == 0.06
    # the published 7.17 truncates 7.1759
    assert abs(100 * natten["mixed"] / blocks - 7.17) < 0.01

    for window, dense_pct in ((12, 1.56), (20, 7.23)):
        block_map = classify_blocks(STASpec(window=(window,) * 3), CUBE)
        analytic = sta_block_counts_analytic(CUBE, Dims3(window, window, window))
        assert block_map.counts.dense == analytic["dense"]
        assert block_map.counts.mixed == 0
        assert round(100 * block_map.counts.dense / blocks, 2) == dense_pct


def test_cube48_tiled_natten_interior_rows():
    block_map = classify_blocks(TiledNATTENSpec(window=(11, 11, 11)), CUBE)
    assert interior_rows_match(block_map)


def test_hunyuan_sta_sparsity():
    assert sparsity(STASpec(window=(18, 24, 24)), HUNYUAN) == pytest.approx(0.91, abs=1e-12)
    assert sparsity(STASpec(window=(30, 40, 40)), HUNYUAN) == pytest.approx(7 / 12, abs=1e-12)
    block_map = classify_blocks(STASpec(window=(18, 24, 24)), HUNYUAN)
    assert block_map.counts.dense == 8100
    assert block_map.sparsity == pytest.approx(0.91, abs=1e-12)


def test_clear_pair_count_matches_enumeration(small_grid):
    for radius in (1.0, 1.5, 2.3, 10.0):
        spec = CLEARSpec(radius=radius)
        assert attended_pair_count(spec, small_grid) == int(TokenMask(spec, small_grid).dense().sum())


# ---- schedules ----

def test_kv_schedule_sta_example(toy_grid):
    block_map = classify_blocks(STASpec(window=(6, 6, 6)), toy_grid)
    expected = sorted((a * 4 + b) * 4 + c for a in range(3) for b in range(3) for c in range(3))
    assert kv_block_schedule(0, block_map) == expected
    assert set(schedule_lengths(block_map).tolist()) == {27}


def test_kv_schedule_full_and_self(toy_grid):
    full = classify_blocks(FullSpec(), toy_grid)
    assert kv_block_schedule(5, full) == list(range(toy_grid.num_blocks))
    own = classify_blocks(STASpec(window=(2, 2, 2)), toy_grid)
    for q_block in (0, 17, 63):
        assert kv_block_schedule(q_block, own) == [q_block]


def test_kv_schedule_out_of_range(toy_grid):
    block_map = classify_blocks(FullSpec(), toy_grid)
    with pytest.raises(ConfigValidationError):
        kv_block_schedule(64, block_map)

import numpy as np
import pytest

from tilelab.config import ReferenceConfig
from tilelab.grid import VideoGrid
from tilelab.masks import CLEARSpec, FullSpec, NATTENSpec, STASpec, TiledNATTENSpec, classify_blocks
from tilelab.visualization import BlockMapRenderer, ReportBuilder, ReportConfig


def _parse_pgm(blob):
    magic, width, height, maxval, payload = blob.split(maxsplit=4)
    return magic, int(width), int(height), int(maxval), payload


def test_render_pgm(tmp_path, small_grid):
    block_map = classify_blocks(TiledNATTENSpec(window=(3, 3, 3)), small_grid)
    path = BlockMapRenderer().render(block_map, tmp_path / "map.pgm")
    magic, width, height, maxval, payload = _parse_pgm(path.read_bytes())
    assert magic == b"P5" and maxval == 255
    assert width == height == small_grid.num_blocks
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    expected = np.choose(block_map.types, [0, 128, 255])
    np.testing.assert_array_equal(pixels, expected)


def test_render_sta_has_no_gray(tmp_path, toy_grid):
    block_map = classify_blocks(STASpec(window=(6, 6, 6)), toy_grid)
    pixels = BlockMapRenderer().to_pixels(block_map)
    assert set(np.unique(pixels).tolist()) == {0, 255}


def test_mask_comparison_rows():
    grid = VideoGrid.build((30, 48, 80), (6, 8, 8))
    configs = [
        ReferenceConfig(name="sta-18-24-24", spec=STASpec(window=(18, 24, 24)),
                    published_sparsity=0.91, published_tflops=14.76),
        ReferenceConfig(name="natten-19-25-25", spec=NATTENSpec(window=(19, 25, 25)), published_sparsity=0.8969),
        ReferenceConfig(name="clear-r16", spec=CLEARSpec(radius=16.0)),
        ReferenceConfig(name="full", spec=FullSpec()),
    ]
    rows = ReportBuilder(ReportConfig(heads=24, d=128)).mask_comparison(configs, grid)
    by_name = {row["name"]: row for row in rows}

    sta = by_name["sta-18-24-24"]
    assert sta["sparsity"] == pytest.approx(0.91)
    assert sta["sparsity_matches_published"] is True
    assert sta["mixed_ratio"] == 0.0
    assert sta["dense_ratio"] == pytest.approx(8100 / 300 ** 2)
    assert sta["tflops"] == pytest.approx(14.6767, abs=1e-3)

    # plain NATTEN is too large to enumerate here; blocks are skipped
    assert by_name["natten-19-25-25"]["dense_ratio"] is None
    assert 0 < by_name["clear-r16"]["sparsity"] < 1
    assert by_name["clear-r16"]["sparsity_matches_published"] is None
    assert by_name["full"]["sparsity"] == 0.0


def test_rows_to_csv():
    text = ReportBuilder.to_csv([{"layer": 0, "head": 1, "mean_recall": 0.5, "std_recall": 0.0}],
                                ["layer", "head", "mean_recall", "std_recall"])
    assert text.splitlines() == ["layer,head,mean_recall,std_recall", "0,1,0.5,0.0"]

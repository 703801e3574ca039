"""
Comparison and benchmark reports across mask configurations
"""
import io
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from tilelab.attention.flops import flops_estimate, tflops
from tilelab.grid.video_grid import VideoGrid
from tilelab.masks.analytic import compare_analytic, sparsity
from tilelab.masks.block_map import BlockClassifier


@dataclass
class ReportConfig:
    """Attention shape the FLOP column assumes, and the enumeration budget"""
    heads: int = 24
    d: int = 128
    max_exhaustive_tokens: int = 16384
    sparsity_tolerance: float = 5e-5
    n_jobs: int = 1


class ReportBuilder:
    def __init__(self, config: Optional[ReportConfig] = None):
        self.config = config or ReportConfig()
        self.classifier = BlockClassifier(n_jobs=self.config.n_jobs)
        self.logger = logging.getLogger(__name__)

    def mask_comparison(self, configs: Sequence[Any], grid: VideoGrid) -> List[Dict[str, Any]]:
        """One row per named configuration: sparsity, TFLOPs and block ratios

        Published figures are shown next to the computed ones; deviations are
        logged and flagged, never treated as failures.
        """
        rows = []
        for entry in configs:
            spec = entry.spec
            spec.check(grid)
            level = sparsity(spec, grid)
            row: Dict[str, Any] = {
                "name": entry.name,
                "mask": spec.label,
                "sparsity": level,
                "tflops": tflops(flops_estimate(grid.num_tokens, self.config.d, self.config.heads, level)),
                "published_sparsity": entry.published_sparsity,
                "published_tflops": entry.published_tflops,
                "sparsity_matches_published": None,
            }
            if entry.published_sparsity is not None:
                matches = bool(abs(level - entry.published_sparsity) <= self.config.sparsity_tolerance)
                row["sparsity_matches_published"] = matches
                if not matches:
                    self.logger.warning(
                        f"{entry.name}: sparsity {level:.4f} differs from published {entry.published_sparsity:.4f}"
                    )
            row.update(self._block_columns(spec, grid))
            rows.append(row)
        return rows

    def _block_columns(self, spec, grid: VideoGrid) -> Dict[str, Any]:
        factorized = spec.separable and spec.ordering == "tile"
        if not factorized and grid.num_tokens > self.config.max_exhaustive_tokens:
            self.logger.info(f"{spec.label}: skipping block enumeration on {grid.num_tokens} tokens")
            return {"dense_ratio": None, "mixed_ratio": None, "empty_ratio": None}
        block_map = self.classifier.classify(spec, grid)
        ratios = block_map.counts.ratios()
        columns = {f"{key}_ratio": value for key, value in ratios.items()}
        analytic = compare_analytic(spec, grid, block_map)
        if analytic:
            columns["analytic_delta"] = analytic["delta"]
        return columns

    @staticmethod
    def to_csv(rows: List[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
        frame = pd.DataFrame(rows, columns=list(columns) if columns else None)
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, lineterminator="\n")
        return buffer.getvalue()

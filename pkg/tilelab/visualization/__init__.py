"""
Block map images and tabular reports
"""
from tilelab.visualization.block_map_renderer import BlockMapRenderer
from tilelab.visualization.report_builder import ReportBuilder, ReportConfig

__all__ = ["BlockMapRenderer", "ReportBuilder", "ReportConfig"]

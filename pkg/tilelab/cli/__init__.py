"""
Command-line surface: typer application plus the bench and gen-tensors workflows
"""
from tilelab.cli.workflows import bench, gen_tensors

__all__ = ["bench", "gen_tensors"]

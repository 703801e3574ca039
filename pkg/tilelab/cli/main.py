"""
tilelab command-line application
"""
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import numpy as np
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from typer.core import TyperGroup

from tilelab import __version__
from tilelab.attention.executor import BlockSparseExecutor
from tilelab.attention.oracle import dense_attention_oracle
from tilelab.attention.recall import attention_recall
from tilelab.attention.tensors import AttnConfig
from tilelab.cli import workflows
from tilelab.config import GridConfig, TileLabSettings, load_settings
from tilelab.data.tensor_store import TensorStore
from tilelab.errors import ConfigValidationError, StorageError, TileLabError
from tilelab.grid.flatten import tile_permute, tile_unpermute
from tilelab.grid.video_grid import Dims3, VideoGrid
from tilelab.masks.analytic import compare_analytic
from tilelab.masks.block_map import BlockClassifier
from tilelab.masks.families import FullSpec, MaskSpec, parse_mask_spec, parse_mask_specs
from tilelab.masks.token_mask import TokenMask
from tilelab.search.head_stats import recall_stats, recall_stats_rows
from tilelab.search.mask_search import mask_search, search_summary
from tilelab.search.toy_model import ToyModel, ToyModelConfig
from tilelab.training.losses import (
    FinetuneObjective,
    LossWeights,
    attn_distill_loss,
    data_loss,
    final_layer_loss,
)
from tilelab.visualization.block_map_renderer import BlockMapRenderer
from tilelab.visualization.report_builder import ReportBuilder, ReportConfig

logger = logging.getLogger("tilelab.cli")
stderr_console = Console(stderr=True)

FORMATS = ("json", "csv")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
LAYOUTS = ("zigzag", "tile")
LOSS_KINDS = ("attn", "final", "data", "combined")

tensor_store = TensorStore()
block_map_renderer = BlockMapRenderer()


class ExitCodeGroup(TyperGroup):
    """Exit 1 on usage and validation errors, 2 on storage errors"""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            result = super().main(
                args=args, prog_name=prog_name, complete_var=complete_var,
                standalone_mode=False, **extra,
            )
        except click.exceptions.Abort:
            stderr_console.print("Aborted!")
            sys.exit(1)
        except click.ClickException as e:
            e.show()
            sys.exit(1)
        except TileLabError as e:
            logger.error(e.message)
            stderr_console.print(f"error: {e.message}", markup=False)
            sys.exit(e.exit_code)
        code = result if isinstance(result, int) else 0
        if standalone_mode:
            sys.exit(code)
        return code


app = typer.Typer(
    cls=ExitCodeGroup,
    name="tilelab",
    help="Sliding tile attention: masks, block maps, block-sparse attention and mask search",
    add_completion=False,
    no_args_is_help=True,
)


@dataclass
class CliState:
    settings: TileLabSettings
    threads: int


def configure_logging(level: str) -> None:
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    root.addHandler(RichHandler(console=stderr_console, show_path=False, rich_tracebacks=False))
    root.setLevel(level)


@app.callback()
def _global_options(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", help="Settings file (default: $TILELAB_CONFIG or config.yaml)"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker threads for block classification and execution"),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING or ERROR"),
):
    settings = load_settings(config)
    level = (log_level or settings.logging.level).upper()
    if level not in LOG_LEVELS:
        raise ConfigValidationError(f"unknown log level '{log_level}', expected one of {LOG_LEVELS}")
    if threads is not None and threads < 1:
        raise ConfigValidationError(f"--threads must be >= 1, got {threads}")
    configure_logging(level)
    ctx.obj = CliState(settings=settings, threads=threads or settings.threads)
    logger.debug(f"tilelab {__version__}, {ctx.obj.threads} thread(s)")


# ---- input helpers ----

def _state(ctx: typer.Context) -> CliState:
    return ctx.obj


def _read_json(path: Path, what: str) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot read {what} {path}: {e.strerror or e}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigValidationError(f"{what} {path} is not valid JSON: {e}")


def _load_mask(value: str) -> MaskSpec:
    """Inline MaskSpec JSON or a path to a MaskSpec document"""
    if value.lstrip().startswith("{"):
        return parse_mask_spec(value)
    return parse_mask_spec(_read_json(Path(value), "mask spec"))


def _resolve_grid(state: CliState, dims: Optional[str], tile: Optional[str],
                  preset: Optional[str], grid_file: Optional[Path]) -> VideoGrid:
    chosen = [name for name, value in (("--dims", dims), ("--preset", preset), ("--grid", grid_file)) if value]
    if len(chosen) != 1:
        raise ConfigValidationError("give exactly one of --dims, --preset or --grid")
    if preset:
        return VideoGrid.from_preset(preset, state.settings)
    if grid_file:
        try:
            return GridConfig.model_validate(_read_json(grid_file, "grid")).to_grid()
        except ValidationError as e:
            raise ConfigValidationError(f"grid {grid_file}: {e.errors()[0].get('msg')}")
    return VideoGrid.build(Dims3.parse(dims), Dims3.parse(tile) if tile else None)


def _load_toy_model(state: CliState, path: Optional[Path]) -> ToyModel:
    if path is None:
        return ToyModel(state.settings.toy_model)
    try:
        return ToyModel(ToyModelConfig.model_validate(_read_json(path, "toy model")))
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ()))
        raise ConfigValidationError(f"toy model {path}: {location}: {first.get('msg')}")


def _read_heads(path: Path) -> np.ndarray:
    """(N, d) or (heads, N, d) tensor as (heads, N, d)"""
    return _as_heads(tensor_store.read(path), path)


def _as_heads(array: np.ndarray, path: Path) -> np.ndarray:
    if array.ndim == 2:
        return array[None]
    if array.ndim != 3:
        raise ConfigValidationError(f"{path}: expected (N, d) or (heads, N, d), got shape {array.shape}")
    return array


def _layout_maps(layout: str, ordering: str, grid: VideoGrid):
    """Row reorderings (file -> family ordering, family ordering -> file) for (heads, N, d) arrays"""
    def per_head(fn):
        return lambda x: np.stack([fn(x[h], grid) for h in range(x.shape[0])])

    if layout == ordering:
        return (lambda x: x), (lambda x: x)
    if layout == "zigzag":
        return per_head(tile_permute), per_head(tile_unpermute)
    return per_head(tile_unpermute), per_head(tile_permute)


def _check_choice(value: str, choices, flag: str) -> str:
    if value not in choices:
        raise ConfigValidationError(f"{flag} must be one of {choices}, got '{value}'")
    return value


def _emit(payload: Dict[str, Any]) -> None:
    typer.echo(json.dumps(payload, sort_keys=True))


def _emit_rows(rows: List[Dict[str, Any]], fmt: str, columns: Optional[List[str]] = None,
               payload: Optional[Dict[str, Any]] = None) -> None:
    if fmt == "csv":
        typer.echo(ReportBuilder.to_csv(rows, columns), nl=False)
    else:
        _emit(payload if payload is not None else {"rows": rows})


# shared grid options
DIMS = typer.Option(None, "--dims", help="Grid dims t,h,w")
TILE = typer.Option(None, "--tile", help="Tile t,h,w (default 1,1,1)")
PRESET = typer.Option(None, "--preset", help="Named grid from config.yaml")
GRID = typer.Option(None, "--grid", help='Grid document {"dims": [t,h,w], "tile": [t,h,w]}')
MASK = typer.Option(..., "--mask", help="MaskSpec JSON file or inline JSON")
FORMAT = typer.Option("json", "--format", help="json or csv")


# ---- commands ----

@app.command("mask-stats")
def mask_stats(
    ctx: typer.Context,
    mask: str = MASK,
    dims: Optional[str] = DIMS,
    tile: Optional[str] = TILE,
    preset: Optional[str] = PRESET,
    grid_file: Optional[Path] = GRID,
    analytic: bool = typer.Option(False, "--analytic", help="Add closed-form block counts"),
    method: str = typer.Option("auto", "--method", help="auto, factorized or exhaustive"),
    fmt: str = FORMAT,
):
    """Dense/mixed/empty block counts and sparsity of one mask"""
    state = _state(ctx)
    _check_choice(fmt, FORMATS, "--format")
    spec = _load_mask(mask)
    grid = _resolve_grid(state, dims, tile, preset, grid_file)
    block_map = BlockClassifier(n_jobs=state.threads).classify(spec, grid, method=method)
    payload = block_map.to_dict()
    logger.info(f"{spec.label} on {grid}: {block_map.counts.to_dict()}")
    row = dict(payload)
    if analytic:
        report = compare_analytic(spec, grid, block_map) or None
        payload["analytic"] = report
        if report:
            row.update({f"analytic_{key}": value for key, value in report["analytic"].items()})
    _emit_rows([row], fmt, payload=payload)


@app.command("mask-render")
def mask_render(
    ctx: typer.Context,
    mask: str = MASK,
    out: Path = typer.Option(..., "--out", help="Output .pgm path"),
    dims: Optional[str] = DIMS,
    tile: Optional[str] = TILE,
    preset: Optional[str] = PRESET,
    grid_file: Optional[Path] = GRID,
):
    """Write the block map as a P5 PGM: dense 0, mixed 128, empty 255"""
    state = _state(ctx)
    spec = _load_mask(mask)
    grid = _resolve_grid(state, dims, tile, preset, grid_file)
    block_map = BlockClassifier(n_jobs=state.threads).classify(spec, grid)
    path = block_map_renderer.render(block_map, out)
    _emit({"out": str(path), "blocks": block_map.num_blocks})


@app.command("mask-compare")
def mask_compare(
    ctx: typer.Context,
    dims: Optional[str] = DIMS,
    tile: Optional[str] = TILE,
    preset: Optional[str] = PRESET,
    grid_file: Optional[Path] = GRID,
    heads: Optional[int] = typer.Option(None, "--heads", help="Heads assumed by the TFLOP column"),
    d: Optional[int] = typer.Option(None, "--d", help="Head dim assumed by the TFLOP column"),
    fmt: str = FORMAT,
):
    """Sparsity, TFLOPs and block ratios of the configured mask catalogue"""
    state = _state(ctx)
    _check_choice(fmt, FORMATS, "--format")
    settings = state.settings
    if not (dims or preset or grid_file):
        preset = settings.compare.grid
    grid = _resolve_grid(state, dims, tile, preset, grid_file)
    builder = ReportBuilder(ReportConfig(
        heads=heads or settings.attention.heads,
        d=d or settings.attention.d,
        max_exhaustive_tokens=settings.compare.max_exhaustive_tokens,
        n_jobs=state.threads,
    ))
    rows = builder.mask_comparison(settings.compare.configs, grid)
    _emit_rows(rows, fmt, payload={"grid": grid.to_dict(), "rows": rows})


@app.command("attn")
def attn(
    ctx: typer.Context,
    q_path: Path = typer.Option(..., "--q"),
    k_path: Path = typer.Option(..., "--k"),
    v_path: Path = typer.Option(..., "--v"),
    mask: str = MASK,
    out: Path = typer.Option(..., "--out", help="Output .stat path"),
    dims: Optional[str] = DIMS,
    tile: Optional[str] = TILE,
    preset: Optional[str] = PRESET,
    grid_file: Optional[Path] = GRID,
    layout: str = typer.Option("zigzag", "--layout", help="Token order of the input and output files: zigzag or tile"),
    check_oracle: bool = typer.Option(False, "--check-oracle", help="Compare against the float64 dense oracle"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Oracle tolerance (default from config)"),
):
    """Block-sparse attention over STAT tensors"""
    state = _state(ctx)
    _check_choice(layout, LAYOUTS, "--layout")
    spec = _load_mask(mask)
    grid = _resolve_grid(state, dims, tile, preset, grid_file)
    raw = [tensor_store.read(path) for path in (q_path, k_path, v_path)]
    squeeze = raw[0].ndim == 2
    q, k, v = (_as_heads(array, path) for array, path in zip(raw, (q_path, k_path, v_path)))

    # rows are converted from the file layout to the family's ordering and back
    to_spec, to_file = _layout_maps(layout, spec.ordering, grid)
    q, k, v = (to_spec(x) for x in (q, k, v))

    block_map = BlockClassifier(n_jobs=state.threads).classify(spec, grid)
    config = AttnConfig(
        heads=q.shape[0], d=q.shape[-1],
        working_dtype=state.settings.attention.working_dtype,
        oracle_dtype=state.settings.attention.oracle_dtype,
    )
    result = BlockSparseExecutor(block_map, config=config, n_jobs=state.threads).run_heads(q, k, v)

    payload: Dict[str, Any] = {
        "out": str(out),
        "heads": int(q.shape[0]),
        "tokens": int(q.shape[1]),
        "d": int(q.shape[2]),
        "sparsity": block_map.sparsity,
    }
    max_abs_err = None
    if check_oracle:
        token_mask = None if isinstance(spec, FullSpec) else TokenMask(spec, grid)
        reference = np.stack([
            dense_attention_oracle(q[h], k[h], v[h], mask=token_mask, dtype=config.oracle)
            for h in range(q.shape[0])
        ])
        max_abs_err = float(np.max(np.abs(result.astype(np.float64) - reference)))
        payload["max_abs_err"] = max_abs_err
        payload["tolerance"] = tol if tol is not None else state.settings.attention.tolerance

    result = to_file(result)
    tensor_store.write(out, result[0] if squeeze else result)
    _emit(payload)
    if max_abs_err is not None and max_abs_err > payload["tolerance"]:
        raise ConfigValidationError(
            f"max abs error {max_abs_err:.3e} exceeds tolerance {payload['tolerance']:.1e}"
        )


@app.command("recall")
def recall(
    ctx: typer.Context,
    q_path: Path = typer.Option(..., "--q"),
    k_path: Path = typer.Option(..., "--k"),
    window: str = typer.Option(..., "--window", help="Local window t,h,w"),
    dims: Optional[str] = DIMS,
    tile: Optional[str] = TILE,
    preset: Optional[str] = PRESET,
    grid_file: Optional[Path] = GRID,
):
    """Share of softmax mass inside each query's local window (zigzag-ordered Q, K)"""
    state = _state(ctx)
    grid = _resolve_grid(state, dims, tile, preset, grid_file)
    q, k = _read_heads(q_path), _read_heads(k_path)
    if q.shape != k.shape:
        raise ConfigValidationError(f"shape mismatch: Q{q.shape} K{k.shape}")
    size = Dims3.parse(window)
    per_head = [attention_recall(q[h], k[h], grid, size) for h in range(q.shape[0])]
    _emit({"recall": float(np.mean(per_head)), "per_head": per_head, "window": list(size)})


@app.command("recall-stats")
def recall_stats_command(
    ctx: typer.Context,
    model: Optional[Path] = typer.Option(None, "--model", help="Toy model JSON (default from config)"),
    window: Optional[str] = typer.Option(None, "--window", help="Local window t,h,w"),
    prompts: Optional[int] = typer.Option(None, "--prompts", help="Number of seeded prompts (>= 2)"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    fmt: str = typer.Option("csv", "--format", help="csv or json"),
):
    """Per-head mean and standard deviation of recall across prompts"""
    state = _state(ctx)
    _check_choice(fmt, FORMATS, "--format")
    defaults = state.settings.search
    toy = _load_toy_model(state, model)
    size = Dims3.parse(window) if window else Dims3.of(defaults.recall_window)
    count = prompts if prompts is not None else defaults.prompts
    seed = defaults.seed if seed is None else seed
    inputs = [toy.sample_inputs(seed, index) for index in range(count)]
    rows = recall_stats_rows(recall_stats(toy, inputs, size))
    _emit_rows(rows, fmt, columns=["layer", "head", "mean_recall", "std_recall"])


@app.command("search")
def search(
    ctx: typer.Context,
    patterns: Path = typer.Option(..., "--patterns", help="JSON list of MaskSpecs, sparsest first, ending with full"),
    out: Path = typer.Option(..., "--out", help="Output dict.json"),
    model: Optional[Path] = typer.Option(None, "--model", help="Toy model JSON (default from config)"),
    delta: Optional[float] = typer.Option(None, "--delta"),
    delta_mode: Optional[str] = typer.Option(None, "--delta-mode", help="relative or absolute"),
    steps: Optional[int] = typer.Option(None, "--steps"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    cumulative: Optional[bool] = typer.Option(
        None, "--cumulative/--isolated",
        help="Keep accepted masks for later heads, or test each head against all-full (default from config)",
    ),
):
    """Pick the sparsest acceptable mask per (step, layer, head)"""
    state = _state(ctx)
    defaults = state.settings.search
    toy = _load_toy_model(state, model)
    candidates = parse_mask_specs(_read_json(patterns, "pattern list"))
    steps = defaults.steps if steps is None else steps
    cumulative = defaults.cumulative if cumulative is None else cumulative
    if steps < 1:
        raise ConfigValidationError(f"--steps must be >= 1, got {steps}")
    result = mask_search(
        toy, candidates,
        delta=defaults.delta if delta is None else delta,
        steps=steps,
        seed=defaults.seed if seed is None else seed,
        delta_mode=delta_mode or defaults.delta_mode,
        cumulative=cumulative,
        n_jobs=state.threads,
    )
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(result.masks.to_json(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write {out}: {e.strerror or e}")
    _emit({"out": str(out), "cumulative": cumulative, **search_summary(result, toy.grid)})


@app.command("loss")
def loss(
    student: Path = typer.Option(..., "--student", help="(layers, N, width) or (N, width) STAT tensor"),
    teacher: Path = typer.Option(..., "--teacher"),
    kind: str = typer.Option(..., "--kind", help="attn, final, data or combined"),
    f_path: Optional[Path] = typer.Option(None, "--f"),
    x0_path: Optional[Path] = typer.Option(None, "--x0"),
    weights: str = typer.Option("1,0.5,0.5", "--weights", help="alpha,beta,gamma"),
):
    """Distillation and data loss terms between student and teacher outputs"""
    _check_choice(kind, LOSS_KINDS, "--kind")
    loss_weights = LossWeights.parse(weights)
    s, t = tensor_store.read(student), tensor_store.read(teacher)
    s_layers = list(s) if s.ndim >= 3 else [s]
    t_layers = list(t) if t.ndim >= 3 else [t]
    needs_data = kind in ("data", "combined")
    if needs_data and (f_path is None or x0_path is None):
        raise ConfigValidationError(f"--kind {kind} needs --f and --x0")
    f = tensor_store.read(f_path) if needs_data else None
    x0 = tensor_store.read(x0_path) if needs_data else None

    if kind == "combined":
        terms = FinetuneObjective(loss_weights).evaluate(s_layers, t_layers, s_layers[-1], f, x0)
        _emit({"kind": kind, "value": terms.pop("combined"), "terms": terms})
        return
    if kind == "attn":
        value, weight = attn_distill_loss(s_layers, t_layers), loss_weights.gamma
    elif kind == "final":
        value, weight = final_layer_loss(s_layers[-1], t_layers[-1]), loss_weights.beta
    else:
        value, weight = data_loss(s_layers[-1], f, x0), loss_weights.alpha
    _emit({"kind": kind, "value": value, "weighted": weight * value})


@app.command("bench")
def bench(
    ctx: typer.Context,
    mask: str = MASK,
    dims: Optional[str] = DIMS,
    tile: Optional[str] = TILE,
    preset: Optional[str] = PRESET,
    grid_file: Optional[Path] = GRID,
    heads: Optional[int] = typer.Option(None, "--heads"),
    d: Optional[int] = typer.Option(None, "--d"),
    repeats: int = typer.Option(0, "--repeats", help="0 reports the static cost model only"),
    seed: int = typer.Option(0, "--seed"),
):
    """FLOP estimate and block counts, with executor and oracle timings"""
    state = _state(ctx)
    settings = state.settings.attention
    spec = _load_mask(mask)
    grid = _resolve_grid(state, dims, tile, preset, grid_file)
    report = workflows.bench(
        spec, grid,
        heads=heads or settings.heads,
        d=d or settings.d,
        repeats=repeats,
        seed=seed,
        n_jobs=state.threads,
        config=AttnConfig(working_dtype=settings.working_dtype),
    )
    _emit(report)


@app.command("gen-tensors")
def gen_tensors(
    ctx: typer.Context,
    out: Path = typer.Option(..., "--out", help="Output directory for q.stat, k.stat, v.stat"),
    seed: int = typer.Option(0, "--seed"),
    n: Optional[int] = typer.Option(None, "--n", help="Tokens (default: the grid's token count)"),
    d: int = typer.Option(64, "--d"),
    heads: int = typer.Option(1, "--heads"),
    dims: Optional[str] = DIMS,
    tile: Optional[str] = TILE,
    preset: Optional[str] = PRESET,
    grid_file: Optional[Path] = GRID,
):
    """Seeded standard-normal Q, K, V tensors in STAT format"""
    state = _state(ctx)
    if n is None:
        n = _resolve_grid(state, dims, tile, preset, grid_file).num_tokens
    _emit(workflows.gen_tensors(seed, n, d, heads, out))


def main() -> None:
    app()


if __name__ == "__main__":
    main()

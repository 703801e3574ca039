"""
Training-free per-head mask search

For every step the model is run with full attention to get a reference
output. Each (layer, head) then tries the candidate patterns from most to
least sparse and keeps the first one whose output MSE against the reference
stays under the threshold. The final candidate must be full attention and is
recorded without a trial, so every head always gets an entry.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from tilelab.errors import ConfigValidationError
from tilelab.grid.video_grid import VideoGrid
from tilelab.masks.analytic import sparsity
from tilelab.masks.families import FullSpec, MaskSpec, parse_mask_spec
from tilelab.search.toy_model import Assignment, HeadKey, ToyModel

EntryKey = Tuple[int, int, int]
DELTA_MODES = ("relative", "absolute")


class SearchDict:
    """(step, layer, head) -> chosen MaskSpec; serialised with 't/l/h' keys"""

    def __init__(self, entries: Optional[Dict[EntryKey, MaskSpec]] = None):
        self.entries: Dict[EntryKey, MaskSpec] = dict(entries or {})

    def __setitem__(self, key: EntryKey, spec: MaskSpec) -> None:
        self.entries[key] = spec

    def __getitem__(self, key: EntryKey) -> MaskSpec:
        return self.entries[key]

    def __contains__(self, key) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[EntryKey]:
        return iter(sorted(self.entries))

    def items(self):
        return sorted(self.entries.items())

    def to_json(self) -> Dict[str, Any]:
        return {f"{t}/{l}/{h}": spec.to_json() for (t, l, h), spec in self.items()}

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "SearchDict":
        entries = {}
        for key, value in data.items():
            try:
                t, l, h = (int(part) for part in key.split("/"))
            except ValueError:
                raise ConfigValidationError(f"search dict key '{key}' is not of the form t/l/h")
            entries[(t, l, h)] = parse_mask_spec(value)
        return cls(entries)


@dataclass
class SearchResult:
    masks: SearchDict
    forward_passes: int
    thresholds: List[float] = field(default_factory=list)


class MaskSearcher:
    def __init__(self, model: ToyModel, patterns: Sequence[MaskSpec], delta: float,
                 delta_mode: str = "relative", cumulative: bool = False, n_jobs: int = 1):
        self.model = model
        self.patterns = list(patterns)
        self.delta = float(delta)
        self.delta_mode = delta_mode
        self.cumulative = cumulative
        self.n_jobs = n_jobs
        self.logger = logging.getLogger(__name__)
        self._validate()

    def _validate(self) -> None:
        if not self.patterns:
            raise ConfigValidationError("pattern list is empty")
        if not isinstance(self.patterns[-1], FullSpec):
            raise ConfigValidationError("pattern list must end with the full-attention pattern")
        if not self.delta >= 0:
            raise ConfigValidationError(f"delta must be >= 0, got {self.delta}")
        if self.delta_mode not in DELTA_MODES:
            raise ConfigValidationError(f"unknown delta mode '{self.delta_mode}', expected one of {DELTA_MODES}")
        levels = [sparsity(p, self.model.grid) for p in self.patterns]
        for i in range(1, len(levels)):
            if levels[i] > levels[i - 1]:
                raise ConfigValidationError(
                    f"patterns must be ordered by descending sparsity: "
                    f"{self.patterns[i].label} ({levels[i]:.4f}) follows "
                    f"{self.patterns[i - 1].label} ({levels[i - 1]:.4f})"
                )

    def search(self, inputs: Sequence[np.ndarray]) -> SearchResult:
        result = SearchResult(masks=SearchDict(), forward_passes=0)
        for step, x in enumerate(inputs):
            assignment = self.model.full_assignment()
            reference = self.model.forward(x, assignment)
            result.forward_passes += 1
            threshold = self._threshold(reference)
            result.thresholds.append(threshold)

            keys = self.model.head_keys()
            if self.cumulative or self.n_jobs == 1:
                outcomes = []
                for key in keys:
                    outcome = self._search_head(x, reference, assignment, key, threshold)
                    if self.cumulative:
                        assignment[key] = outcome[0]
                    outcomes.append(outcome)
            else:
                outcomes = Parallel(n_jobs=self.n_jobs, prefer="threads")(
                    delayed(self._search_head)(x, reference, assignment, key, threshold)
                    for key in keys
                )
            for (layer, head), (spec, passes) in zip(keys, outcomes):
                result.masks[(step, layer, head)] = spec
                result.forward_passes += passes
                self.logger.debug(f"step {step} layer {layer} head {head}: {spec.label}")
            self.logger.info(f"Search step {step} done, threshold {threshold:.3e}")
        return result

    def _threshold(self, reference: np.ndarray) -> float:
        if self.delta_mode == "absolute" or self.delta in (0.0, float("inf")):
            return self.delta
        return self.delta * float(np.mean(reference ** 2))

    def _search_head(self, x: np.ndarray, reference: np.ndarray, assignment: Assignment,
                     key: HeadKey, threshold: float) -> Tuple[MaskSpec, int]:
        passes = 0
        for spec in self.patterns[:-1]:
            trial = dict(assignment)
            trial[key] = spec
            output = self.model.forward(x, trial)
            passes += 1
            if float(np.mean((reference - output) ** 2)) < threshold:
                return spec, passes
        return self.patterns[-1], passes


def mask_search(model: ToyModel, patterns: Sequence[MaskSpec], delta: float, steps: int,
                inputs: Optional[Sequence[np.ndarray]] = None, seed: int = 0,
                **options) -> SearchResult:
    """Search masks over `steps` seeded inputs (or the given ones)"""
    if inputs is None:
        inputs = [model.sample_inputs(seed, step) for step in range(steps)]
    elif len(inputs) != steps:
        raise ConfigValidationError(f"expected {steps} inputs, got {len(inputs)}")
    return MaskSearcher(model, patterns, delta, **options).search(inputs)


def search_summary(result: SearchResult, grid: VideoGrid) -> Dict[str, Any]:
    """Pattern usage, mean mask sparsity and the implied attention-FLOP reduction"""
    usage: Dict[str, int] = {}
    levels = []
    for _, spec in result.masks.items():
        usage[spec.label] = usage.get(spec.label, 0) + 1
        levels.append(sparsity(spec, grid))
    mean_sparsity = float(np.mean(levels)) if levels else 0.0
    return {
        "entries": len(result.masks),
        "forward_passes": result.forward_passes,
        "pattern_usage": usage,
        "mean_sparsity": mean_sparsity,
        "attention_flop_reduction": 1.0 / (1.0 - mean_sparsity) if mean_sparsity < 1 else float("inf"),
    }

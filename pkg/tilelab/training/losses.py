"""
Fine-tuning objective terms for distilling a sparse-attention student from a
dense-attention teacher. All norms are squared Frobenius norms.
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from tilelab.errors import ConfigValidationError


@dataclass(frozen=True)
class LossWeights:
    """alpha weights the data loss, beta the final-layer loss, gamma the attention loss"""
    alpha: float = 1.0
    beta: float = 0.5
    gamma: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not value >= 0:
                raise ConfigValidationError(f"loss weight {name} must be >= 0, got {value}")

    @classmethod
    def defaults(cls) -> "LossWeights":
        return cls(1.0, 0.5, 0.5)

    @classmethod
    def parse(cls, text: str) -> "LossWeights":
        """Parse the CLI form 'alpha,beta,gamma'"""
        try:
            values = [float(part) for part in text.split(",")]
        except ValueError:
            raise ConfigValidationError(f"cannot parse loss weights '{text}'")
        if len(values) != 3:
            raise ConfigValidationError(f"expected 3 loss weights, got {len(values)}")
        return cls(*values)


def _squared_norm(a: np.ndarray, b: np.ndarray, what: str) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigValidationError(f"{what}: shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sum(diff * diff))


def attn_distill_loss(student: Sequence[np.ndarray], teacher: Sequence[np.ndarray]) -> float:
    """Mean over layers of the squared norm of each layer's output difference"""
    if len(student) != len(teacher):
        raise ConfigValidationError(
            f"student has {len(student)} layers but teacher has {len(teacher)}"
        )
    if not student:
        raise ConfigValidationError("attention distillation needs at least one layer")
    total = sum(
        _squared_norm(s, t, f"layer {i}") for i, (s, t) in enumerate(zip(student, teacher))
    )
    return total / len(student)


def final_layer_loss(student_final: np.ndarray, teacher_final: np.ndarray) -> float:
    return _squared_norm(student_final, teacher_final, "final layer")


def data_loss(model_out: np.ndarray, f: np.ndarray, x0: np.ndarray) -> float:
    """Flow-matching data term: || (f - x0) - model_out ||^2"""
    f, x0 = np.asarray(f, dtype=np.float64), np.asarray(x0, dtype=np.float64)
    if f.shape != x0.shape:
        raise ConfigValidationError(f"data loss: shape mismatch f{f.shape} vs x0{x0.shape}")
    return _squared_norm(f - x0, model_out, "data loss")


def combined_loss(terms: Dict[str, float], weights: Optional[LossWeights] = None) -> float:
    weights = weights or LossWeights.defaults()
    for name in ("data", "final", "attn"):
        if name not in terms:
            raise ConfigValidationError(f"missing loss term '{name}'")
        if not terms[name] >= 0:
            raise ConfigValidationError(f"loss term '{name}' must be >= 0, got {terms[name]}")
    return weights.alpha * terms["data"] + weights.beta * terms["final"] + weights.gamma * terms["attn"]


class FinetuneObjective:
    """Evaluates all three terms and their weighted sum in one report"""

    def __init__(self, weights: Optional[LossWeights] = None):
        self.weights = weights or LossWeights.defaults()

    def evaluate(self, student_layers: Sequence[np.ndarray], teacher_layers: Sequence[np.ndarray],
                 model_out: np.ndarray, f: np.ndarray, x0: np.ndarray) -> Dict[str, Any]:
        terms = {
            "data": data_loss(model_out, f, x0),
            "final": final_layer_loss(student_layers[-1], teacher_layers[-1]),
            "attn": attn_distill_loss(student_layers, teacher_layers),
        }
        return {**terms, "combined": combined_loss(terms, self.weights)}

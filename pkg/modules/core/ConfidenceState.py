"""ConfidenceState module

Per-point confidences ``c`` in [0, 1] and the mean-normalized weights ``w`` used as transport marginals and as
alignment weights.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ConfidenceState:
    """
    Attributes:
        confidence (np.ndarray): n-vector in [0, 1].
        weights (np.ndarray): n-vector >= 0 summing to ``target_mass``.
        target_mass (float): Declared total mass of ``weights``.
        fallback (bool): True when the confidences were degenerate and uniform weights were used instead.
    """
    confidence: np.ndarray
    weights: np.ndarray
    target_mass: float
    fallback: bool = False

    def __post_init__(self):
        for name in ('confidence', 'weights'):
            value = np.array(getattr(self, name), dtype=np.float64, copy=True).reshape(-1)
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        if self.confidence.shape != self.weights.shape:
            raise ValueError("confidence and weights must have the same length")

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def with_weights(self, weights: np.ndarray) -> 'ConfidenceState':
        """Same confidences with replaced alignment weights (used when degenerate points are zeroed)."""
        return ConfidenceState(self.confidence, weights, float(np.sum(weights)), self.fallback)

"""Sampling regions: a bounding box plus an optional membership predicate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from . import defaults
from .errors import InsufficientSamples


@dataclass(frozen=True)
class Region:
    """Box ``lower < x < upper`` intersected with ``predicate(x)``."""

    lower: np.ndarray
    upper: np.ndarray
    predicate: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))

    @property
    def dim(self):
        return self.lower.size

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            return False
        if np.any(x <= self.lower) or np.any(x >= self.upper):
            return False
        return True if self.predicate is None else bool(self.predicate(x))

    def sample(self, seed=0, count=defaults.SAMPLES, max_draws=None):
        """Deterministic scrambled-Halton points inside the region.

        Points are drawn in the box and filtered by the predicate until
        ``count`` are accepted.
        """
        count = int(count)
        if count <= 0:
            return np.zeros((0, self.dim))
        engine = qmc.Halton(d=self.dim, scramble=True, seed=np.random.default_rng(seed))
        max_draws = max_draws or 1000 * count + 10000
        accepted = []
        drawn = 0
        batch = max(64, 2 * count)
        while len(accepted) < count and drawn < max_draws:
            pts = qmc.scale(engine.random(batch), self.lower, self.upper)
            drawn += batch
            for p in pts:
                if self.contains(p):
                    accepted.append(p)
                    if len(accepted) == count:
                        break
        if len(accepted) < count:
            raise InsufficientSamples(f"only {len(accepted)} of {count} samples fell inside {self.name or 'the region'}")
        return np.array(accepted)


def box(lower, upper, name=""):
    return Region(np.asarray(lower, float), np.asarray(upper, float), None, name)

"""Per-round training-instance selection.

Minimal-variance sampling keeps the k instances with the largest regularized
gradient sqrt(g^2 + lambda*h^2); uniform sampling draws k without replacement
from a seeded generator; "none" keeps everything. Selection is deterministic
given its inputs (plus the seed, for uniform) and always returns ascending
indices so downstream accumulation order is pinned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fedboost.losses import GradHess
from fedboost.seeding import derive_seed

METHODS = ("none", "uniform", "mvs")


@dataclass(frozen=True)
class SamplingConfig:
    method: str = "none"
    fraction: int = 100  # percent of instances kept per round
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown sampling method {self.method!r}")
        if not 0 < self.fraction <= 100:
            raise ValueError("fraction must be in (0, 100]")
        if self.method == "none" and self.fraction != 100:
            raise ValueError("method 'none' requires fraction == 100")


def sample_size(n: int, fraction: int) -> int:
    return -((-fraction * n) // 100)  # ceil(fraction * n / 100)


def regularized_gradient(g, h, reg_lambda: float) -> np.ndarray:
    """sqrt(g^2 + lambda*h^2), elementwise."""
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    return np.sqrt(g * g + reg_lambda * h * h)


def regularized_gradient_multi(gh: GradHess, reg_lambda: float) -> np.ndarray:
    """Per-instance score folding all output columns through the same form:
    sqrt(sum_c g_c^2 + lambda * sum_c h_c^2)."""
    return np.sqrt(np.sum(gh.g**2, axis=1) + reg_lambda * np.sum(gh.h**2, axis=1))


def mvs_select(ghat: np.ndarray, fraction: int) -> np.ndarray:
    """Indices of the ceil(fraction*n/100) largest scores, lowest index on
    ties; returned ascending."""
    ghat = np.asarray(ghat, dtype=np.float64)
    if ghat.size == 0:
        raise ValueError("empty score vector")
    k = sample_size(ghat.shape[0], fraction)
    order = np.argsort(-ghat, kind="stable")  # stable: equal scores keep index order
    return np.sort(order[:k])


def uniform_select(n: int, fraction: int, seed: int) -> np.ndarray:
    """ceil(fraction*n/100) distinct indices, uniform without replacement."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = sample_size(n, fraction)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=k, replace=False))


def select(
    config: SamplingConfig,
    n: int,
    gh: GradHess | None = None,
    reg_lambda: float = 0.0,
    round_index: int = 1,
    seed: int | None = None,
) -> np.ndarray:
    """Dispatch to the configured selection method.

    MVS needs gradients from the previous round's model; on round 1 there are
    none yet and every instance is kept (cold start). ``seed`` overrides the
    config seed for per-round uniform draws.
    """
    if config.method == "none":
        return np.arange(n, dtype=np.int64)
    if config.method == "uniform":
        return uniform_select(n, config.fraction, config.seed if seed is None else seed)
    if gh is None:
        if round_index <= 1:
            return np.arange(n, dtype=np.int64)
        raise ValueError("mvs needs gradients from the previous round's predictions")
    ghat = regularized_gradient_multi(gh, reg_lambda)
    return mvs_select(ghat, config.fraction)


def select_for_round(
    config: SamplingConfig,
    n: int,
    round_index: int,
    gh: GradHess | None,
    reg_lambda: float,
) -> np.ndarray:
    """Per-round selection as the trainers use it: uniform reseeds each round
    from the config seed; mvs sees gradients only from round 2 on."""
    if config.method == "uniform":
        return select(config, n, seed=derive_seed(config.seed, "round", round_index))
    if config.method == "mvs":
        prior = gh if round_index > 1 else None
        return select(config, n, gh=prior, reg_lambda=reg_lambda, round_index=round_index)
    return select(config, n)
